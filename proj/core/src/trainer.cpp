#include "anmd/trainer.hpp"

#include <algorithm>
#include <numeric>

namespace anmd {

namespace {

void push_param(std::vector<ParamRef>& out, Tensor4& t, std::string name) {
  if (!t.empty()) out.push_back(ParamRef{&t, std::move(name)});
}

}  // namespace

std::vector<ParamRef> trainable_params(ModelGraph& model) {
  std::vector<ParamRef> out;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    LayerDesc& layer = model.layers[l];
    if (!layer.trainable) continue;
    const std::string base = "layer." + std::to_string(l);
    push_param(out, layer.weight, base + ".weight");
    push_param(out, layer.bias, base + ".bias");
  }
  for (auto& [idx, d] : model.attachments) {
    const std::string base = "denoiser." + std::to_string(idx);
    push_param(out, d.pw_reduce.weight, base + ".pw_reduce.weight");
    push_param(out, d.pw_reduce.bias, base + ".pw_reduce.bias");
    push_param(out, d.dw.weight, base + ".dw.weight");
    push_param(out, d.dw.bias, base + ".dw.bias");
    push_param(out, d.head_mean.weight, base + ".head_mean.weight");
    push_param(out, d.head_mean.bias, base + ".head_mean.bias");
    push_param(out, d.head_scale.weight, base + ".head_scale.weight");
    push_param(out, d.head_scale.bias, base + ".head_scale.bias");
  }
  return out;
}

std::vector<const Tensor4*> collect_grads(const ModelGraph& model, const Gradients& grads) {
  std::vector<const Tensor4*> out;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const LayerDesc& layer = model.layers[l];
    if (!layer.trainable) continue;
    if (!layer.weight.empty()) out.push_back(&grads.weight[l]);
    if (!layer.bias.empty()) out.push_back(&grads.bias[l]);
  }
  for (const auto& [idx, d] : model.attachments) {
    const auto it = grads.denoiser.find(idx);
    if (it == grads.denoiser.end())
      throw Error("collect_grads: missing denoiser gradients for layer " + std::to_string(idx));
    const DenoiserGrads& g = it->second;
    out.push_back(&g.pw_w);
    out.push_back(&g.pw_b);
    out.push_back(&g.dw_w);
    out.push_back(&g.dw_b);
    out.push_back(&g.mean_w);
    out.push_back(&g.mean_b);
    out.push_back(&g.scale_w);
    out.push_back(&g.scale_b);
    (void)d;
  }
  return out;
}

namespace {

Dataset gather_batch(const Dataset& data, const std::vector<int>& order, int start, int count) {
  std::vector<int> idx(order.begin() + start, order.begin() + start + count);
  return subset(data, idx);
}

int count_correct(const Tensor4& logits, const std::vector<int>& labels) {
  int correct = 0;
  const int C = logits.shape().c;
  for (int n = 0; n < logits.shape().n; ++n) {
    const double* row = logits.sample(n);
    int best = 0;
    for (int c = 1; c < C; ++c)
      if (row[c] > row[best]) best = c;
    if (best == labels[static_cast<std::size_t>(n)]) ++correct;
  }
  return correct;
}

}  // namespace

std::vector<EpochStats> train_model(ModelGraph& model, const Dataset& data,
                                    const TrainConfig& cfg, AdamState* external_state) {
  if (data.size() == 0) throw Error("train_model: empty dataset");
  std::vector<ParamRef> params = trainable_params(model);
  if (params.empty()) throw Error("train_model: no trainable parameters");

  std::vector<Tensor4*> ptrs;
  ptrs.reserve(params.size());
  for (auto& p : params) ptrs.push_back(p.tensor);

  AdamState local = AdamState::init(ptrs, cfg.adam);
  AdamState& state = external_state != nullptr ? *external_state : local;
  if (external_state != nullptr && external_state->m.empty())
    *external_state = AdamState::init(ptrs, cfg.adam);

  std::vector<EpochStats> stats;
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order(static_cast<std::size_t>(data.size()));
    std::iota(order.begin(), order.end(), 0);
    RngStream shuffle(derive_seed(cfg.seed, RngTag::kShuffle, static_cast<std::uint64_t>(epoch)));
    for (int i = data.size() - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle.next_below(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }

    double loss_sum = 0.0;
    std::int64_t seen = 0;
    int correct = 0;
    for (int start = 0; start < data.size(); start += cfg.batch_size) {
      const int count = std::min(cfg.batch_size, data.size() - start);
      Dataset batch = gather_batch(data, order, start, count);

      ForwardOptions fo;
      fo.mode = cfg.mode;
      fo.seed = cfg.seed;
      fo.step = step++;
      fo.record_tape = true;
      ForwardResult fr = forward(model, batch.images, fo);

      LossResult lr = cross_entropy(fr.logits, batch.labels, Reduction::Mean);
      loss_sum += lr.loss * count;
      seen += count;
      correct += count_correct(fr.logits, batch.labels);

      Gradients grads = backward(model, fr.tape, lr.grad);
      adam_step(ptrs, collect_grads(model, grads), state);
    }

    stats.push_back(EpochStats{epoch, loss_sum / static_cast<double>(seen),
                               static_cast<double>(correct) / static_cast<double>(seen)});
  }
  return stats;
}

std::vector<EpochStats> train_denoisers(ModelGraph& model, const Dataset& data, int epochs,
                                        std::uint64_t seed, const AdamConfig& adam,
                                        int batch_size) {
  if (model.attachments.empty())
    throw ConfigError("train_denoisers: model has no denoiser attachments");
  if (epochs <= 0) return {};
  for (auto& layer : model.layers) layer.trainable = false;

  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.adam = adam;
  cfg.seed = seed;
  cfg.mode = RunMode::Noisy;  // the blocks must learn under the noise they will face
  return train_model(model, data, cfg);
}

namespace {

double evaluate_impl(const ModelGraph& model, const Dataset& data, RunMode mode,
                     std::uint64_t seed, int batch_size, bool want_loss) {
  if (data.size() == 0) throw Error("evaluate: empty dataset");
  double loss_sum = 0.0;
  int correct = 0;
  std::uint64_t step = 0;
  std::vector<int> order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), 0);
  for (int start = 0; start < data.size(); start += batch_size) {
    const int count = std::min(batch_size, data.size() - start);
    Dataset batch = gather_batch(data, order, start, count);
    ForwardOptions fo;
    fo.mode = mode;
    fo.seed = seed;
    fo.step = step++;
    ForwardResult fr = forward(model, batch.images, fo);
    if (want_loss) {
      loss_sum += cross_entropy(fr.logits, batch.labels).loss * count;
    } else {
      correct += count_correct(fr.logits, batch.labels);
    }
  }
  return want_loss ? loss_sum / static_cast<double>(data.size())
                   : static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace

double evaluate_accuracy(const ModelGraph& model, const Dataset& data, RunMode mode,
                         std::uint64_t seed, int batch_size) {
  return evaluate_impl(model, data, mode, seed, batch_size, false);
}

double evaluate_loss(const ModelGraph& model, const Dataset& data, RunMode mode,
                     std::uint64_t seed, int batch_size) {
  return evaluate_impl(model, data, mode, seed, batch_size, true);
}

}  // namespace anmd
