#include "anmd/noise.hpp"

#include <cmath>

#include "anmd/model.hpp"

namespace anmd {

double feature_magnitude(const Tensor4& x) {
  if (x.empty()) throw Error("feature_magnitude: empty tensor");
  return x.mean_abs();
}

std::vector<double> per_sample_magnitude(const Tensor4& x) {
  if (x.empty()) throw Error("per_sample_magnitude: empty tensor");
  const std::int64_t per_sample = x.sample_elems();
  std::vector<double> mags(static_cast<std::size_t>(x.shape().n));
  for (int s = 0; s < x.shape().n; ++s) {
    const double* p = x.sample(s);
    double acc = 0.0;
    for (std::int64_t i = 0; i < per_sample; ++i) acc += std::abs(p[i]);
    mags[static_cast<std::size_t>(s)] = acc / static_cast<double>(per_sample);
  }
  return mags;
}

Tensor4 inject(const Tensor4& x, double sigma_pct, double mean, std::uint64_t stream_seed) {
  if (sigma_pct < 0.0) throw Error("inject: sigma_pct must be >= 0");
  if (sigma_pct == 0.0 && mean == 0.0) return x;

  Tensor4 y = x;
  const std::vector<double> mags = per_sample_magnitude(x);
  const std::int64_t per_sample = x.sample_elems();
  for (int s = 0; s < x.shape().n; ++s) {
    const double sigma = sigma_pct / 100.0 * mags[static_cast<std::size_t>(s)];
    RngStream rng(mix_seed(stream_seed, static_cast<std::uint64_t>(s)));
    double* p = y.sample(s);
    for (std::int64_t i = 0; i < per_sample; ++i) p[i] += mean + sigma * rng.next_gauss();
  }
  require_finite(y, "inject");
  return y;
}

void apply_noise_spec(ModelGraph& model, const NoiseSpec& spec) {
  for (const NoiseEntry& e : spec.entries) {
    if (e.layer_index < 0 || e.layer_index >= static_cast<int>(model.layers.size()))
      throw Error("apply_noise_spec: layer index " + std::to_string(e.layer_index) +
                  " out of range (model has " + std::to_string(model.layers.size()) + " layers)");
    if (!std::isfinite(e.sigma_pct) || e.sigma_pct < 0.0)
      throw Error("apply_noise_spec: sigma_pct must be finite and >= 0");
    LayerDesc& layer = model.layers[static_cast<std::size_t>(e.layer_index)];
    layer.noise_enabled = true;
    layer.noise_sigma_pct = e.sigma_pct;
    layer.noise_mean = e.mean;
  }
}

NoiseSpec all_conv_noise(const ModelGraph& model, double sigma_pct, double mean,
                         std::uint64_t seed) {
  NoiseSpec spec;
  spec.seed = seed;
  for (int l = 0; l < static_cast<int>(model.layers.size()); ++l) {
    const LayerKind k = model.layers[static_cast<std::size_t>(l)].kind;
    if (k == LayerKind::Conv2d || k == LayerKind::DepthwiseConv2d ||
        k == LayerKind::PointwiseConv2d)
      spec.entries.push_back(NoiseEntry{l, sigma_pct, mean});
  }
  return spec;
}

}  // namespace anmd
