#include "anmd/model.hpp"

#include <algorithm>
#include <cmath>

#include "anmd/noise.hpp"

namespace anmd {

std::int64_t ModelGraph::backbone_param_count() const {
  std::int64_t total = 0;
  for (const auto& l : layers) total += l.param_count();
  return total;
}

std::int64_t ModelGraph::denoiser_param_count_total() const {
  std::int64_t total = 0;
  for (const auto& [idx, d] : attachments) total += d.param_count();
  return total;
}

std::vector<Shape4> layer_output_shapes(const ModelGraph& model, int n) {
  std::vector<Shape4> shapes;
  shapes.reserve(model.layers.size());
  Shape4 cur = model.input_shape;
  cur.n = n;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    cur = layer_output_shape(model.layers[i], cur, "layer " + std::to_string(i));
    shapes.push_back(cur);
  }
  return shapes;
}

bool attachment_eligible(const ModelGraph& model, int layer_index) {
  if (layer_index < 0 || layer_index >= static_cast<int>(model.layers.size())) return false;
  return model.layers[layer_index].kind != LayerKind::Linear;
}

namespace {

// Per-sample additive Gaussian noise, streams split per (seed, step, layer,
// sample) so batch composition does not couple draws across samples.
Tensor4 draw_injected_noise(const Tensor4& activation, const LayerDesc& layer, int layer_idx,
                            const ForwardOptions& opts) {
  Tensor4 z(activation.shape());
  const std::vector<double> mags = per_sample_magnitude(activation);
  const std::int64_t per_sample = activation.sample_elems();
  for (int s = 0; s < activation.shape().n; ++s) {
    const double sigma = layer.noise_sigma_pct / 100.0 * mags[static_cast<std::size_t>(s)];
    RngStream rng(derive_seed(opts.seed, RngTag::kNoise, opts.step,
                              static_cast<std::uint64_t>(layer_idx),
                              static_cast<std::uint64_t>(s)));
    double* zp = z.sample(s);
    for (std::int64_t i = 0; i < per_sample; ++i) zp[i] = layer.noise_mean + sigma * rng.next_gauss();
  }
  return z;
}

Tensor4 draw_eps(const Shape4& shape, int layer_idx, const ForwardOptions& opts) {
  Tensor4 eps(shape);
  const std::int64_t per_sample =
      static_cast<std::int64_t>(shape.c) * shape.h * shape.w;
  for (int s = 0; s < shape.n; ++s) {
    RngStream rng(derive_seed(opts.seed, RngTag::kEpsilon, opts.step,
                              static_cast<std::uint64_t>(layer_idx),
                              static_cast<std::uint64_t>(s)));
    double* ep = eps.data() + static_cast<std::int64_t>(s) * per_sample;
    for (std::int64_t i = 0; i < per_sample; ++i) ep[i] = rng.next_gauss();
  }
  return eps;
}

}  // namespace

ForwardResult forward(const ModelGraph& model, const Tensor4& x, const ForwardOptions& opts) {
  if (model.layers.empty()) throw Error("forward: model has no layers");
  Shape4 expect = model.input_shape;
  expect.n = x.shape().n;
  if (!(x.shape() == expect))
    throw Error("forward: input shape " + x.shape().str() + " does not match model input " +
                expect.str());

  ForwardResult res;
  ActivationTape& tape = res.tape;
  Tensor4 cur = x;

  for (int l = 0; l < static_cast<int>(model.layers.size()); ++l) {
    const LayerDesc& layer = model.layers[l];
    const std::string label = "layer " + std::to_string(l) + " (" + layer_kind_name(layer.kind) + ")";
    if (opts.record_tape) tape.layer_inputs.push_back(cur);

    Tensor4 out = layer_forward(cur, layer, label);
    if (opts.record_tape) tape.output_shapes.push_back(out.shape());

    // Noise lands on the raw layer output, before any attached denoiser.
    if (opts.mode == RunMode::Noisy && layer.noise_enabled && layer.noise_sigma_pct != 0.0) {
      Tensor4 z;
      if (opts.replay != nullptr) {
        auto it = opts.replay->injected.find(l);
        if (it == opts.replay->injected.end())
          throw Error("forward: replay is missing injected noise for layer " + std::to_string(l));
        z = it->second;
      } else {
        z = draw_injected_noise(out, layer, l, opts);
      }
      if (opts.capture_noise) tape.captured.injected[l] = z;
      add_inplace(out, z);
    }

    auto att = model.attachments.find(l);
    if (att != model.attachments.end()) {
      Tensor4 eps;
      if (opts.replay != nullptr) {
        auto it = opts.replay->eps.find(l);
        if (it == opts.replay->eps.end())
          throw Error("forward: replay is missing eps for layer " + std::to_string(l));
        eps = it->second;
      } else {
        eps = draw_eps(out.shape(), l, opts);
      }
      if (opts.capture_noise) tape.captured.eps[l] = eps;

      DenoiserForward df = denoiser_forward(out, att->second, eps);
      Tensor4 denoised = std::move(df.denoised);
      if (opts.record_tape) {
        DenoiserTapeEntry entry;
        entry.block_input = std::move(out);
        entry.fwd = std::move(df);  // intermediates for backward; output moved out above
        tape.denoisers.emplace(l, std::move(entry));
      }
      out = std::move(denoised);
    }

    cur = std::move(out);
  }

  require_finite(cur, "forward logits");
  res.logits = std::move(cur);
  return res;
}

Tensor4 forward_from(const ModelGraph& model, int from, const Tensor4& activation) {
  Tensor4 cur = activation;
  for (int l = from; l < static_cast<int>(model.layers.size()); ++l) {
    cur = layer_forward(cur, model.layers[l], "layer " + std::to_string(l));
  }
  return cur;
}

namespace {

LayerDesc plain_layer(LayerKind kind) {
  LayerDesc d;
  d.kind = kind;
  return d;
}

LayerDesc conv_layer(int c_in, int c_out, int stride, RngStream& rng) {
  LayerDesc d;
  d.kind = LayerKind::Conv2d;
  d.in_channels = c_in;
  d.out_channels = c_out;
  d.kernel = 3;
  d.stride = stride;
  d.padding = 1;
  d.weight = Tensor4(Shape4{c_out, c_in, 3, 3});
  d.bias = Tensor4(Shape4{c_out, 1, 1, 1});
  const double bound = std::sqrt(6.0 / (static_cast<double>(c_in) * 9.0));
  for (std::int64_t i = 0; i < d.weight.size(); ++i) d.weight[i] = rng.next_uniform(-bound, bound);
  d.trainable = true;
  return d;
}

}  // namespace

ModelGraph build_small_cnn(std::uint64_t seed, int num_classes) {
  ModelGraph m;
  m.name = "smallcnn";
  m.num_classes = num_classes;
  m.input_shape = Shape4{1, 3, 32, 32};

  RngStream rng(derive_seed(seed, RngTag::kInit));
  m.layers.push_back(conv_layer(3, 32, 1, rng));
  m.layers.push_back(plain_layer(LayerKind::LeakyRelu));
  m.layers.push_back(conv_layer(32, 32, 2, rng));
  m.layers.push_back(plain_layer(LayerKind::LeakyRelu));
  m.layers.push_back(conv_layer(32, 64, 2, rng));
  m.layers.push_back(plain_layer(LayerKind::LeakyRelu));
  m.layers.push_back(plain_layer(LayerKind::GlobalAvgPool));

  LayerDesc fc;
  fc.kind = LayerKind::Linear;
  fc.in_channels = 64;
  fc.out_channels = num_classes;
  fc.weight = Tensor4(Shape4{num_classes, 64, 1, 1});
  fc.bias = Tensor4(Shape4{num_classes, 1, 1, 1});
  const double bound = std::sqrt(6.0 / 64.0);
  for (std::int64_t i = 0; i < fc.weight.size(); ++i) fc.weight[i] = rng.next_uniform(-bound, bound);
  fc.trainable = true;
  m.layers.push_back(std::move(fc));
  return m;
}

void attach_denoisers(ModelGraph& model, const std::vector<int>& layer_indices, double ratio,
                      std::uint64_t seed) {
  const auto shapes = layer_output_shapes(model, 1);
  for (int idx : layer_indices) {
    if (idx < 0 || idx >= static_cast<int>(model.layers.size()))
      throw Error("attach: layer index " + std::to_string(idx) + " out of range");
    if (!attachment_eligible(model, idx))
      throw Error("attach: layer " + std::to_string(idx) + " does not produce a 4-D activation");
    if (model.attachments.count(idx) != 0)
      throw Error("attach: duplicate attachment at layer " + std::to_string(idx));
    const int channels = shapes[static_cast<std::size_t>(idx)].c;
    model.attachments.emplace(
        idx, denoiser_init(channels, ratio, mix_seed(seed, static_cast<std::uint64_t>(idx))));
  }
}

}  // namespace anmd
