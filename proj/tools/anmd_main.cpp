// anmd command-line driver: dataset prep, backbone training, noisy
// evaluation, placement planning, denoiser training, hardware simulation and
// report rendering. Exit codes: 0 ok, 1 runtime failure, 2 config error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "anmd/config.hpp"
#include "anmd/hw.hpp"
#include "anmd/placement.hpp"
#include "anmd/report.hpp"
#include "anmd/serialize.hpp"
#include "anmd/trainer.hpp"

namespace fs = std::filesystem;
using namespace anmd;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string output_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

ExperimentConfig resolve_config(const CommonOpts& common) {
  ExperimentConfig cfg =
      common.config_path.empty() ? ExperimentConfig{} : load_config_file(common.config_path);
  if (!common.output_dir.empty()) cfg.output_dir = common.output_dir;
  if (common.seed_set) cfg.seed = common.seed;
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& common) {
  cmd->add_option("--config", common.config_path, "experiment config (JSON)");
  cmd->add_option("--out-dir", common.output_dir, "override output directory");
  cmd->add_option("--seed", common.seed, "override master seed")
      ->each([&common](const std::string&) { common.seed_set = true; });
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.output_dir);
  return (fs::path(cfg.output_dir) / name).string();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

CsvTable metrics_table(const ExperimentConfig& cfg, const std::string& model_name,
                       const std::vector<EpochStats>& stats) {
  CsvTable t;
  t.header = {{"seed", std::to_string(cfg.seed)}, {"model", model_name}};
  t.columns = {"epoch", "loss", "accuracy_pct"};
  for (const EpochStats& s : stats)
    t.rows.push_back({std::to_string(s.epoch), fmt(s.loss), fmt(100.0 * s.accuracy)});
  return t;
}

// ---------------------------------------------------------------- gen-data

int cmd_gen_data(const CommonOpts& common) {
  const ExperimentConfig cfg = resolve_config(common);
  auto [train, test] = load_datasets(cfg);
  fs::create_directories(fs::path(cfg.output_dir) / "data");
  const std::string train_path = (fs::path(cfg.output_dir) / "data" / "train.bin").string();
  const std::string test_path = (fs::path(cfg.output_dir) / "data" / "test.bin").string();
  if (train.size() > 0) save_cifar10(train, train_path);
  if (test.size() > 0) save_cifar10(test, test_path);
  std::cout << "wrote " << train.size() << " train records to " << train_path << "\n"
            << "wrote " << test.size() << " test records to " << test_path << "\n";
  return 0;
}

// ----------------------------------------------------------- train-backbone

int cmd_train_backbone(const CommonOpts& common, const std::string& model_out) {
  const ExperimentConfig cfg = resolve_config(common);
  if (cfg.backbone.kind != "smallcnn")
    throw ConfigError("train-backbone: only the smallcnn backbone is trainable");
  auto [train, test] = load_datasets(cfg);
  if (train.size() == 0)
    throw Error("train-backbone: no training data; configure dataset.train_files or a synthetic "
                "dataset");

  ModelGraph model = build_small_cnn(cfg.seed, cfg.dataset.classes);
  TrainConfig tc;
  tc.epochs = cfg.train.backbone_epochs;
  tc.batch_size = cfg.train.batch_size;
  tc.adam.lr = cfg.train.lr;
  tc.seed = cfg.seed;
  tc.mode = RunMode::Clean;

  std::vector<ParamRef> params = trainable_params(model);
  std::vector<Tensor4*> ptrs;
  for (auto& p : params) ptrs.push_back(p.tensor);
  AdamState state = AdamState::init(ptrs, tc.adam);

  const std::vector<EpochStats> stats = train_model(model, train, tc, &state);
  for (const EpochStats& s : stats)
    std::cout << "epoch " << s.epoch << "  loss " << s.loss << "  train-acc "
              << 100.0 * s.accuracy << "%\n";

  const std::string ckpt = model_out.empty() ? out_path(cfg, "backbone.anmd") : model_out;
  save_model_file(model, ckpt);
  std::vector<std::string> names;
  for (const auto& p : params) names.push_back(p.name);
  save_optimizer_file(state, names, ckpt + ".opt");
  save_csv(out_path(cfg, "train_metrics.csv"), metrics_table(cfg, model.name, stats));

  if (test.size() > 0) {
    const double acc = evaluate_accuracy(model, test, RunMode::Clean);
    std::cout << "clean test accuracy " << 100.0 * acc << "%\n";
  }
  std::cout << "checkpoint " << ckpt << "\n";
  return 0;
}

// --------------------------------------------------------------------- eval

NoiseSpec eval_noise_spec(const ExperimentConfig& cfg, const ModelGraph& model, double sigma) {
  // Reuse the checkpoint's noise-enabled layers when present, else fall back
  // to the configured spec; either way the sweep value overrides sigma.
  NoiseSpec spec;
  spec.seed = cfg.seed;
  for (int l = 0; l < static_cast<int>(model.layers.size()); ++l) {
    const LayerDesc& layer = model.layers[static_cast<std::size_t>(l)];
    if (layer.noise_enabled) spec.entries.push_back({l, sigma, layer.noise_mean});
  }
  if (spec.entries.empty()) {
    spec = make_noise_spec(cfg, model);
    for (NoiseEntry& e : spec.entries) e.sigma_pct = sigma;
  }
  return spec;
}

int cmd_eval(const CommonOpts& common, const std::string& model_path,
             std::vector<double> sigmas, int seeds, const std::string& out_file,
             const std::string& split) {
  const ExperimentConfig cfg = resolve_config(common);
  ModelGraph model = load_model_file(model_path);
  auto [train, test] = load_datasets(cfg);
  const Dataset& data = split == "train" ? train : test;
  if (data.size() == 0) throw Error("eval: " + split + " split is empty");

  if (sigmas.empty())
    sigmas = cfg.eval.sigma_sweep.empty() ? std::vector<double>{cfg.noise.sigma_pct}
                                          : cfg.eval.sigma_sweep;
  if (seeds <= 0) seeds = cfg.eval.seeds;

  CsvTable t;
  t.header = {{"seed", std::to_string(cfg.seed)},
              {"model", model.name},
              {"split", split},
              {"checkpoint", model_path}};
  t.columns = {"sigma_pct", "seed", "accuracy_pct"};

  for (double sigma : sigmas) {
    ModelGraph m = model;
    apply_noise_spec(m, eval_noise_spec(cfg, m, sigma));
    const int k = sigma == 0.0 ? 1 : seeds;
    std::vector<double> accs;
    for (int i = 0; i < k; ++i) {
      const std::uint64_t s = derive_seed(cfg.seed, RngTag::kEval, static_cast<std::uint64_t>(i));
      const double acc = 100.0 * evaluate_accuracy(m, data, RunMode::Noisy, s);
      accs.push_back(acc);
      t.rows.push_back({fmt(sigma), std::to_string(i), fmt(acc)});
    }
    double mean = 0.0;
    for (double a : accs) mean += a;
    mean /= static_cast<double>(accs.size());
    double var = 0.0;
    for (double a : accs) var += (a - mean) * (a - mean);
    const double stddev = accs.size() > 1 ? std::sqrt(var / (accs.size() - 1)) : 0.0;
    t.rows.push_back({fmt(sigma), "mean", fmt(mean)});
    t.rows.push_back({fmt(sigma), "std", fmt(stddev)});
    std::cout << "sigma " << sigma << "%  accuracy " << mean << "% +- " << stddev << " (" << k
              << " seed" << (k == 1 ? "" : "s") << ")\n";
  }

  const std::string out = out_file.empty() ? out_path(cfg, "eval.csv") : out_file;
  save_csv(out, t);
  std::cout << "metrics " << out << "\n";
  return 0;
}

// --------------------------------------------------------------------- plan

int cmd_plan(const CommonOpts& common, const std::string& model_path, double eta, int calib,
             const std::string& out_file) {
  const ExperimentConfig cfg = resolve_config(common);
  ModelGraph model = load_model_file(model_path);
  auto [train, test] = load_datasets(cfg);
  if (train.size() == 0) throw Error("plan: no training data for the calibration batch");
  if (eta < 0.0) eta = cfg.eta_pct;
  if (calib <= 0) calib = cfg.calib_samples;

  const Dataset calib_set = train.take(std::min(calib, train.size()));
  const PlacementPlan plan =
      plan_placement(model, calib_set, eta, cfg.ratio, cfg.selection());

  const std::string out = out_file.empty() ? out_path(cfg, "plan.txt") : out_file;
  save_plan(out, plan, cfg.seed);
  std::cout << "budget " << plan.budget << " params (" << eta << "% of " << plan.backbone_params
            << "), selected " << plan.entries.size() << " layer(s), cost " << plan.total_cost
            << "\n";
  for (const PlacementEntry& e : plan.entries)
    std::cout << "  layer " << e.layer_index << "  score " << e.score << "  cost " << e.param_cost
              << "\n";
  std::cout << "plan " << out << "\n";
  return 0;
}

// ------------------------------------------------------------ train-denoiser

int cmd_train_denoiser(const CommonOpts& common, const std::string& model_path,
                       const std::string& plan_path, const std::string& model_out) {
  const ExperimentConfig cfg = resolve_config(common);
  ModelGraph model = load_model_file(model_path);
  const PlacementPlan plan = load_plan(plan_path);
  if (plan.entries.empty())
    throw ConfigError("train-denoiser: plan selects no layers (was it made with --eta 0?)");

  auto [train, test] = load_datasets(cfg);
  if (train.size() == 0) throw Error("train-denoiser: no training data");

  apply_noise_spec(model, make_noise_spec(cfg, model));
  std::vector<int> indices;
  for (const PlacementEntry& e : plan.entries) indices.push_back(e.layer_index);
  attach_denoisers(model, indices, plan.ratio, cfg.seed);

  AdamConfig adam;
  adam.lr = cfg.train.lr;
  const std::vector<EpochStats> stats =
      train_denoisers(model, train, cfg.train.denoiser_epochs, cfg.seed, adam,
                      cfg.train.batch_size);
  for (const EpochStats& s : stats)
    std::cout << "epoch " << s.epoch << "  loss " << s.loss << "  train-acc "
              << 100.0 * s.accuracy << "%\n";

  const std::string ckpt = model_out.empty() ? out_path(cfg, "denoised.anmd") : model_out;
  save_model_file(model, ckpt);
  ModelGraph reloaded = model;  // freeze flags already set by train_denoisers
  std::vector<ParamRef> params = trainable_params(reloaded);
  save_csv(out_path(cfg, "denoiser_train_metrics.csv"), metrics_table(cfg, model.name, stats));
  std::cout << "denoiser parameters " << model.denoiser_param_count_total() << " ("
            << params.size() << " tensors), checkpoint " << ckpt << "\n";
  return 0;
}

// ------------------------------------------------------------------- hw-sim

int cmd_hw_sim(const CommonOpts& common, const std::string& model_path,
               std::vector<int> attach, const std::string& dump_luts) {
  const ExperimentConfig cfg = resolve_config(common);
  CycleReport report;
  if (!model_path.empty()) {
    const ModelGraph model = load_model_file(model_path);
    report = simulate_model_cycles(model, cfg.hw);
  } else {
    if (cfg.backbone.shape_table.empty())
      throw ConfigError("hw-sim: provide --model or a backbone.shape_table in the config");
    const std::set<int> att(attach.begin(), attach.end());
    for (int a : att)
      if (a < 0 || a >= static_cast<int>(cfg.backbone.shape_table.size()))
        throw ConfigError("hw-sim: --attach index " + std::to_string(a) +
                          " outside the shape table");
    report = simulate_network_cycles(cfg.backbone.shape_table, att, cfg.ratio, cfg.hw);
  }

  const std::vector<std::pair<std::string, std::string>> header = {
      {"seed", std::to_string(cfg.seed)},
      {"conv_cores", std::to_string(cfg.hw.num_conv_cores)},
      {"cancel_lanes", std::to_string(cfg.hw.num_cancel_lanes)},
      {"clock_mhz", std::to_string(cfg.hw.clock_mhz)}};

  {
    std::ofstream out(out_path(cfg, "cycles.csv"));
    write_cycles_csv(out, report, header);
  }

  // Per-layer rollup: base vs added denoiser cycles.
  std::map<int, std::pair<std::int64_t, std::int64_t>> rollup;  // layer -> (base, denoiser)
  for (const CycleRow& row : report.rows) {
    auto& slot = rollup[row.layer];
    (row.phase == "base" ? slot.first : slot.second) += row.cycles;
  }
  CsvTable by_layer;
  by_layer.header = header;
  by_layer.columns = {"layer", "base_cycles", "denoiser_cycles", "total_cycles"};
  for (const auto& [layer, c] : rollup)
    by_layer.rows.push_back({std::to_string(layer), std::to_string(c.first),
                             std::to_string(c.second), std::to_string(c.first + c.second)});
  save_csv(out_path(cfg, "cycles_by_layer.csv"), by_layer);

  CsvTable summary;
  summary.header = header;
  summary.columns = {"total_without", "total_with", "overhead_pct"};
  summary.rows.push_back({std::to_string(report.total_without),
                          std::to_string(report.total_with), fmt(report.overhead_pct())});
  save_csv(out_path(cfg, "cycles_summary.csv"), summary);

  if (!dump_luts.empty()) {
    fs::create_directories(dump_luts);
    const BoxMullerLut lut = BoxMullerLut::make(cfg.hw.lut_bits);
    std::ofstream r(fs::path(dump_luts) / "r_lut.hex");
    dump_lut_hex(r, lut.r_lut);
    std::ofstream c(fs::path(dump_luts) / "cos_lut.hex");
    dump_lut_hex(c, lut.cos_lut);
    std::cout << "luts dumped to " << dump_luts << "\n";
  }

  std::cout << "cycles without denoisers " << report.total_without << ", with "
            << report.total_with << ", overhead " << report.overhead_pct() << "%\n"
            << "traces in " << cfg.output_dir << "\n";
  return 0;
}

// ------------------------------------------------------------------- report

int cmd_report(const CommonOpts& common, const std::string& dir) {
  const ExperimentConfig cfg = resolve_config(common);
  const std::string target = dir.empty() ? cfg.output_dir : dir;
  const ReportOutput out = render_report(target);
  std::cout << out.text;
  if (!out.summary.rows.empty())
    save_csv((fs::path(target) / "report.csv").string(), out.summary);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"activation-noise mitigation toolkit: denoising blocks, budgeted placement and a "
               "fixed-point denoiser hardware model"};
  app.require_subcommand(1);

  CommonOpts c_gen, c_tb, c_eval, c_plan, c_td, c_hw, c_rep;

  CLI::App* gen = app.add_subcommand("gen-data", "materialize the configured dataset as binary batches");
  add_common(gen, c_gen);

  std::string tb_model_out;
  CLI::App* tb = app.add_subcommand("train-backbone", "train the clean reference backbone");
  add_common(tb, c_tb);
  tb->add_option("--model", tb_model_out, "checkpoint output path");

  std::string ev_model, ev_out, ev_split = "test";
  std::vector<double> ev_sigmas;
  int ev_seeds = 0;
  CLI::App* ev = app.add_subcommand("eval", "clean/noisy accuracy of a checkpoint");
  add_common(ev, c_eval);
  ev->add_option("--model", ev_model, "model checkpoint")->required();
  ev->add_option("--noise-sigma-pct", ev_sigmas, "noise sigma sweep values (percent)");
  ev->add_option("--seeds", ev_seeds, "noise seeds per sigma");
  ev->add_option("--out", ev_out, "metrics CSV path");
  ev->add_option("--split", ev_split, "train|test")->check(CLI::IsMember({"train", "test"}));

  std::string pl_model, pl_out;
  double pl_eta = -1.0;
  int pl_calib = 0;
  CLI::App* pl = app.add_subcommand("plan", "gradient-ranked budgeted denoiser placement");
  add_common(pl, c_plan);
  pl->add_option("--model", pl_model, "model checkpoint")->required();
  pl->add_option("--eta", pl_eta, "parameter budget, percent of backbone parameters");
  pl->add_option("--calib", pl_calib, "calibration batch size");
  pl->add_option("--out", pl_out, "plan output path");

  std::string td_model, td_plan, td_out;
  CLI::App* td = app.add_subcommand("train-denoiser", "train attached denoiser blocks, backbone frozen");
  add_common(td, c_td);
  td->add_option("--model", td_model, "backbone checkpoint")->required();
  td->add_option("--plan", td_plan, "placement plan file")->required();
  td->add_option("--out", td_out, "checkpoint output path");

  std::string hw_model, hw_dump;
  std::vector<int> hw_attach;
  CLI::App* hw = app.add_subcommand("hw-sim", "systolic cycle model of backbone and denoisers");
  add_common(hw, c_hw);
  hw->add_option("--model", hw_model, "model checkpoint (conv shapes + attachments)");
  hw->add_option("--attach", hw_attach, "attach denoisers at these shape-table rows");
  hw->add_option("--dump-luts", hw_dump, "write r/cos LUT hex dumps into this directory");

  std::string rep_dir;
  CLI::App* rep = app.add_subcommand("report", "format metrics, plan and cycle artifacts");
  add_common(rep, c_rep);
  rep->add_option("--dir", rep_dir, "artifact directory (default: config output_dir)");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_gen_data(c_gen);
    if (tb->parsed()) return cmd_train_backbone(c_tb, tb_model_out);
    if (ev->parsed()) return cmd_eval(c_eval, ev_model, ev_sigmas, ev_seeds, ev_out, ev_split);
    if (pl->parsed()) return cmd_plan(c_plan, pl_model, pl_eta, pl_calib, pl_out);
    if (td->parsed()) return cmd_train_denoiser(c_td, td_model, td_plan, td_out);
    if (hw->parsed()) return cmd_hw_sim(c_hw, hw_model, hw_attach, hw_dump);
    if (rep->parsed()) return cmd_report(c_rep, rep_dir);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
