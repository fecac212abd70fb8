#include "anmd/placement.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "anmd/autodiff.hpp"

namespace anmd {

std::map<int, double> layer_grad_scores(const ModelGraph& model, const Dataset& calib) {
  if (calib.size() == 0) throw Error("layer_grad_scores: empty calibration batch");
  if (!model.attachments.empty())
    throw Error("layer_grad_scores: expects a clean model without attachments");

  ForwardOptions fo;
  fo.mode = RunMode::Clean;
  fo.record_tape = true;
  ForwardResult fr = forward(model, calib.images, fo);

  // Sum-reduced loss makes the gradient slice of sample n exactly the
  // gradient of that sample's own loss.
  LossResult lr = cross_entropy(fr.logits, calib.labels, Reduction::Sum);
  BackwardOptions bo;
  bo.want_output_grads = true;
  Gradients grads = backward(model, fr.tape, lr.grad, bo);

  std::map<int, double> scores;
  const int N = calib.size();
  for (int l = 0; l < static_cast<int>(model.layers.size()); ++l) {
    if (!attachment_eligible(model, l)) continue;
    const Tensor4& g = grads.output_grad[static_cast<std::size_t>(l)];
    const std::int64_t per_sample = g.sample_elems();
    double acc = 0.0;
    for (int n = 0; n < N; ++n) {
      const double* p = g.sample(n);
      double ss = 0.0;
      for (std::int64_t i = 0; i < per_sample; ++i) ss += p[i] * p[i];
      acc += std::sqrt(ss);
    }
    scores[l] = acc / static_cast<double>(N);
  }
  return scores;
}

PlacementPlan select_layers(const std::map<int, double>& scores, double eta_pct,
                            std::int64_t backbone_param_count,
                            const std::map<int, int>& channel_map, double ratio,
                            SelectMode mode) {
  if (eta_pct < 0.0) throw Error("select_layers: eta_pct must be >= 0");

  PlacementPlan plan;
  plan.eta_pct = eta_pct;
  plan.ratio = ratio;
  plan.backbone_params = backbone_param_count;
  plan.budget = static_cast<std::int64_t>(std::floor(eta_pct / 100.0 *
                                                     static_cast<double>(backbone_param_count)));
  plan.scores = scores;

  // Descending score; ties go to the lower layer index.
  std::vector<std::pair<int, double>> order(scores.begin(), scores.end());
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::int64_t remaining = plan.budget;
  for (const auto& [idx, score] : order) {
    auto ch = channel_map.find(idx);
    if (ch == channel_map.end())
      throw Error("select_layers: no channel count for layer " + std::to_string(idx));
    const std::int64_t cost = denoiser_param_count(ch->second, ratio);
    if (cost > remaining) {
      if (mode == SelectMode::StopAtOverflow) break;
      continue;
    }
    plan.entries.push_back(PlacementEntry{idx, ch->second, cost, score});
    plan.total_cost += cost;
    remaining -= cost;
  }
  return plan;
}

PlacementPlan plan_placement(const ModelGraph& model, const Dataset& calib, double eta_pct,
                             double ratio, SelectMode mode) {
  const std::map<int, double> scores = layer_grad_scores(model, calib);
  const auto shapes = layer_output_shapes(model, 1);
  std::map<int, int> channel_map;
  for (const auto& [idx, score] : scores) channel_map[idx] = shapes[static_cast<std::size_t>(idx)].c;
  return select_layers(scores, eta_pct, model.backbone_param_count(), channel_map, ratio, mode);
}

void write_plan(std::ostream& out, const PlacementPlan& plan, std::uint64_t seed) {
  const double overhead = plan.backbone_params == 0
                              ? 0.0
                              : 100.0 * static_cast<double>(plan.total_cost) /
                                    static_cast<double>(plan.backbone_params);
  out << "# anmd placement plan\n";
  out << "# seed=" << seed << "\n";
  out << "# eta_pct=" << plan.eta_pct << " backbone_params=" << plan.backbone_params
      << " budget=" << plan.budget << " total_cost=" << plan.total_cost
      << " ratio=" << plan.ratio << " overhead_pct=" << overhead << "\n";
  out << "layer_index\tscore\tparam_cost\tcumulative_cost\n";
  std::int64_t cum = 0;
  for (const PlacementEntry& e : plan.entries) {
    cum += e.param_cost;
    out << e.layer_index << "\t" << e.score << "\t" << e.param_cost << "\t" << cum << "\n";
  }
}

void save_plan(const std::string& path, const PlacementPlan& plan, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw Error("save_plan: cannot open " + path);
  write_plan(out, plan, seed);
  if (!out) throw Error("save_plan: write failed for " + path);
}

PlacementPlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("load_plan: cannot open " + path);
  PlacementPlan plan;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream is(line.substr(1));
      std::string tok;
      while (is >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        if (key == "eta_pct") plan.eta_pct = std::stod(val);
        else if (key == "backbone_params") plan.backbone_params = std::stoll(val);
        else if (key == "budget") plan.budget = std::stoll(val);
        else if (key == "total_cost") plan.total_cost = std::stoll(val);
        else if (key == "ratio") plan.ratio = std::stod(val);
      }
      continue;
    }
    if (!saw_header) {  // column header line
      saw_header = true;
      continue;
    }
    std::istringstream is(line);
    PlacementEntry e;
    std::int64_t cum = 0;
    if (!(is >> e.layer_index >> e.score >> e.param_cost >> cum))
      throw Error("load_plan: malformed row in " + path + ": " + line);
    plan.entries.push_back(e);
    plan.scores[e.layer_index] = e.score;
  }
  return plan;
}

}  // namespace anmd
