#include "anmd/hw.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <numbers>
#include <ostream>
#include <set>

#include "anmd/rng.hpp"

namespace anmd {

void validate_hw_config(const HwConfig& cfg) {
  if (cfg.num_conv_cores < 1 || cfg.num_cancel_lanes < 1 || cfg.lut_bits < 1 ||
      cfg.pipeline_fill < 1 || cfg.cancel_pipeline_depth < 1 || cfg.clock_mhz < 1)
    throw ConfigError("hw config: all counts must be >= 1");
  if (cfg.lut_bits > 16) throw ConfigError("hw config: lut_bits must be <= 16");
}

Lfsr::Lfsr(std::uint16_t seed) : state_(seed) {
  if (seed == 0) throw ConfigError("lfsr: seed must be nonzero");
}

std::uint16_t Lfsr::step_bit() {
  const std::uint16_t bit =
      static_cast<std::uint16_t>(std::popcount(static_cast<unsigned>(state_ & kTapMask)) & 1);
  state_ = static_cast<std::uint16_t>((state_ >> 1) | (bit << 15));
  return state_;
}

std::uint16_t Lfsr::next_word() {
  for (int i = 0; i < 16; ++i) step_bit();
  return state_;
}

double Lfsr::next_uniform() { return static_cast<double>(next_word()) / 65536.0; }

LfsrBank LfsrBank::from_master_seed(int num_lanes, std::uint64_t master) {
  if (num_lanes < 1) throw ConfigError("lfsr bank: need at least one lane");
  RngStream rng(mix_seed(master, 0x1f5f));
  std::set<std::uint16_t> used;
  std::vector<std::uint16_t> seeds;
  while (static_cast<int>(seeds.size()) < 2 * num_lanes) {
    const std::uint16_t s = static_cast<std::uint16_t>(rng.next_u64() & 0xFFFF);
    if (s == 0 || used.count(s) != 0) continue;
    used.insert(s);
    seeds.push_back(s);
  }
  return from_seeds(seeds);
}

LfsrBank LfsrBank::from_seeds(const std::vector<std::uint16_t>& seeds) {
  if (seeds.empty() || seeds.size() % 2 != 0)
    throw ConfigError("lfsr bank: need two seeds per lane");
  std::set<std::uint16_t> uniq(seeds.begin(), seeds.end());
  if (uniq.size() != seeds.size())
    throw ConfigError("lfsr bank: duplicate seed values");
  LfsrBank bank;
  for (std::size_t i = 0; i < seeds.size(); i += 2)
    bank.lanes.push_back({Lfsr(seeds[i]), Lfsr(seeds[i + 1])});
  return bank;
}

BoxMullerLut BoxMullerLut::make(int bits) {
  if (bits < 2 || bits > 16) throw ConfigError("box-muller lut: bits must be in [2,16]");
  BoxMullerLut lut;
  lut.bits = bits;
  const int n = 1 << bits;
  lut.r_lut.resize(static_cast<std::size_t>(n));
  lut.cos_lut.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double u_mid = (static_cast<double>(i) + 0.5) / n;
    const double r = std::sqrt(-2.0 * std::log(u_mid));
    lut.r_lut[static_cast<std::size_t>(i)] =
        static_cast<std::int16_t>(std::rint(r * 4096.0));  // Q4.12
    const double u_edge = static_cast<double>(i) / n;
    const double c = std::cos(2.0 * std::numbers::pi * u_edge);
    lut.cos_lut[static_cast<std::size_t>(i)] =
        static_cast<std::int16_t>(std::rint(c * 16384.0));  // Q2.14
  }
  // Pin the quarter-period entries so e.g. u2 = 0.25 yields exactly zero.
  lut.cos_lut[0] = 16384;
  lut.cos_lut[static_cast<std::size_t>(n / 4)] = 0;
  lut.cos_lut[static_cast<std::size_t>(n / 2)] = -16384;
  lut.cos_lut[static_cast<std::size_t>(3 * n / 4)] = 0;
  return lut;
}

std::int16_t unc_z1(double u1, double u2, const BoxMullerLut& lut, const QFormat& q) {
  if (!(u1 > 0.0 && u1 < 1.0 && u2 > 0.0 && u2 < 1.0))
    throw Error("unc_z1: u1, u2 must lie in (0,1)");
  const int n = 1 << lut.bits;
  const int i1 = std::min(static_cast<int>(u1 * n), n - 1);
  const int i2 = std::min(static_cast<int>(u2 * n), n - 1);
  const std::int64_t prod = static_cast<std::int64_t>(lut.r_lut[static_cast<std::size_t>(i1)]) *
                            lut.cos_lut[static_cast<std::size_t>(i2)];
  // Q4.12 * Q2.14 has 26 fractional bits; round once to the working format.
  return saturate16(rne_shift(prod, 26 - q.frac_bits));
}

std::int16_t gauss_gen(std::int16_t z1, std::int16_t mu, std::int16_t sigma, const QFormat& q) {
  const std::int64_t prod = static_cast<std::int64_t>(z1) * sigma;
  const std::int64_t scaled = rne_shift(prod, q.frac_bits);
  return saturate16(scaled + mu);
}

namespace {

void require_same_fx(const FxTensor& a, const FxTensor& b, const char* op) {
  if (!(a.shape == b.shape))
    throw Error(std::string(op) + ": shape mismatch " + a.shape.str() + " vs " + b.shape.str());
  if (!(a.q == b.q)) throw Error(std::string(op) + ": Q-format mismatch");
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

}  // namespace

std::pair<FxTensor, std::int64_t> noise_cancel(const FxTensor& x, const FxTensor& mu,
                                               const FxTensor& sigma, const HwConfig& cfg,
                                               LfsrBank& bank, const BoxMullerLut& lut) {
  validate_hw_config(cfg);
  require_same_fx(x, mu, "noise_cancel");
  require_same_fx(x, sigma, "noise_cancel");
  const int lanes = cfg.num_cancel_lanes;
  if (static_cast<int>(bank.lanes.size()) < lanes)
    throw ConfigError("noise_cancel: bank has " + std::to_string(bank.lanes.size()) +
                      " lanes, config needs " + std::to_string(lanes));

  FxTensor out = x;
  for (std::int64_t e = 0; e < x.size(); ++e) {
    auto& pair = bank.lanes[static_cast<std::size_t>(e % lanes)];
    const double u1 = pair[0].next_uniform();
    const double u2 = pair[1].next_uniform();
    const std::int16_t z1 = unc_z1(u1, u2, lut, x.q);
    const std::int16_t y = gauss_gen(z1, mu[e], sigma[e], x.q);
    out[e] = saturate16(static_cast<std::int64_t>(x[e]) - y);
  }
  const std::int64_t cycles = ceil_div(x.size(), lanes) + cfg.cancel_pipeline_depth;
  return {std::move(out), cycles};
}

FxTensor fx_conv(const FxTensor& x, const FxTensor& w, const FxTensor* bias, LayerKind kind,
                 int stride, int padding) {
  if (!(x.q == w.q) || (bias != nullptr && !(bias->q == x.q)))
    throw Error("fx_conv: operands must share the working Q-format");
  const int c_out = w.shape.n;
  const int cipg = w.shape.c;
  const int K = w.shape.h;
  const bool depthwise = kind == LayerKind::DepthwiseConv2d;
  const int groups = depthwise ? c_out : 1;
  const int c_in = depthwise ? c_out : cipg;
  if (x.shape.c != c_in)
    throw Error("fx_conv: input has " + std::to_string(x.shape.c) + " channels, weights expect " +
                std::to_string(c_in));
  if (depthwise && cipg != 1) throw Error("fx_conv: depthwise weights must have cipg=1");

  const int H = x.shape.h, W = x.shape.w;
  const int HO = (H + 2 * padding - K) / stride + 1;
  const int WO = (W + 2 * padding - K) / stride + 1;
  if (HO < 1 || WO < 1) throw Error("fx_conv: kernel does not fit input " + x.shape.str());

  FxTensor out;
  out.shape = Shape4{x.shape.n, c_out, HO, WO};
  out.q = x.q;
  out.data.assign(static_cast<std::size_t>(out.shape.elems()), 0);

  const std::int64_t acc_limit = (std::int64_t{1} << (kFxAccumulatorBits - 1)) - 1;
  const int copg = c_out / groups;
  const std::int64_t x_plane = static_cast<std::int64_t>(H) * W;
  const std::int64_t o_plane = static_cast<std::int64_t>(HO) * WO;

  for (int n = 0; n < x.shape.n; ++n) {
    const std::int64_t x_base = static_cast<std::int64_t>(n) * c_in * x_plane;
    const std::int64_t o_base = static_cast<std::int64_t>(n) * c_out * o_plane;
    for (int co = 0; co < c_out; ++co) {
      const int gi = co / copg;
      for (int ho = 0; ho < HO; ++ho) {
        for (int wo = 0; wo < WO; ++wo) {
          std::int64_t acc = 0;
          if (bias != nullptr)
            acc = static_cast<std::int64_t>((*bias)[co]) << x.q.frac_bits;
          for (int cig = 0; cig < cipg; ++cig) {
            const int ci = depthwise ? co : gi * cipg + cig;
            for (int kh = 0; kh < K; ++kh) {
              const int hi = ho * stride - padding + kh;
              if (hi < 0 || hi >= H) continue;
              for (int kw = 0; kw < K; ++kw) {
                const int wi = wo * stride - padding + kw;
                if (wi < 0 || wi >= W) continue;
                const std::int64_t xv = x[x_base + (static_cast<std::int64_t>(ci) * H + hi) * W + wi];
                const std::int64_t wv =
                    w[((static_cast<std::int64_t>(co) * cipg + cig) * K + kh) * K + kw];
                acc += xv * wv;
                if (acc > acc_limit || acc < -acc_limit - 1)
                  throw Error("fx_conv: 40-bit accumulator overflow at output channel " +
                              std::to_string(co));
              }
            }
          }
          out[o_base + (static_cast<std::int64_t>(co) * HO + ho) * WO + wo] =
              saturate16(rne_shift(acc, x.q.frac_bits));
        }
      }
    }
  }
  return out;
}

FxTensor fx_leaky_relu(const FxTensor& x) {
  FxTensor out = x;
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const std::int16_t v = x[i];
    out[i] = v >= 0 ? v : static_cast<std::int16_t>(v >> 7);
  }
  return out;
}

std::int64_t conv_cycles(const ConvShape& shape, const HwConfig& cfg) {
  validate_hw_config(cfg);
  const std::int64_t hw = static_cast<std::int64_t>(shape.h_out) * shape.w_out;
  if (shape.kind == LayerKind::DepthwiseConv2d)
    return ceil_div(shape.c_out, cfg.num_conv_cores) * (hw + cfg.pipeline_fill);
  return ceil_div(shape.c_out, cfg.num_conv_cores) *
         (hw * shape.c_in + cfg.pipeline_fill);
}

std::int64_t lrelu_cycles(std::int64_t elements, const HwConfig& cfg) {
  return ceil_div(elements, cfg.num_conv_cores);
}

std::int64_t cancel_cycles(std::int64_t elements, const HwConfig& cfg) {
  return ceil_div(elements, cfg.num_cancel_lanes) + cfg.cancel_pipeline_depth;
}

FxDenoiser quantize_denoiser(const DenoiserParams& params, const QFormat& q) {
  FxDenoiser d;
  d.channels = params.channels();
  d.bottleneck = params.bottleneck_channels();
  d.pw_w = quantize(params.pw_reduce.weight, q);
  d.pw_b = quantize(params.pw_reduce.bias, q);
  d.dw_w = quantize(params.dw.weight, q);
  d.dw_b = quantize(params.dw.bias, q);
  d.mean_w = quantize(params.head_mean.weight, q);
  d.mean_b = quantize(params.head_mean.bias, q);
  d.scale_w = quantize(params.head_scale.weight, q);
  d.scale_b = quantize(params.head_scale.bias, q);
  return d;
}

FxTensor fx_denoiser_forward(const FxDenoiser& d, const FxTensor& x, const HwConfig& cfg,
                             LfsrBank& bank, const BoxMullerLut& lut) {
  const FxTensor t1 = fx_leaky_relu(fx_conv(x, d.pw_w, &d.pw_b, LayerKind::PointwiseConv2d, 1, 0));
  const FxTensor t2 = fx_leaky_relu(fx_conv(t1, d.dw_w, &d.dw_b, LayerKind::DepthwiseConv2d, 1, 1));
  const FxTensor mu = fx_conv(t2, d.mean_w, &d.mean_b, LayerKind::PointwiseConv2d, 1, 0);
  const FxTensor sg = fx_conv(t2, d.scale_w, &d.scale_b, LayerKind::PointwiseConv2d, 1, 0);
  return noise_cancel(x, mu, sg, cfg, bank, lut).first;
}

namespace {

ConvShape pointwise_shape(int c_in, int c_out, int h, int w) {
  return ConvShape{LayerKind::PointwiseConv2d, c_in, c_out, h, w};
}

}  // namespace

std::pair<FxTensor, DcuTrace> dcu_run(const FxDenoiser& d, const FxTensor& x, const HwConfig& cfg,
                                      LfsrBank& bank, const BoxMullerLut& lut) {
  validate_hw_config(cfg);
  if (x.shape.c != d.channels)
    throw Error("dcu_run: input has " + std::to_string(x.shape.c) + " channels, block expects " +
                std::to_string(d.channels));

  const int H = x.shape.h, W = x.shape.w;
  const std::int64_t trunk_elems = static_cast<std::int64_t>(x.shape.n) * d.bottleneck * H * W;
  const std::int64_t full_elems = x.shape.elems();

  // Activation memory: each phase reads and writes named buffers, the DCU
  // enabling one block at a time.
  std::map<std::string, FxTensor> mem;
  mem.emplace("input", x);

  DcuTrace trace;
  auto account = [&trace](const std::string& phase, std::int64_t cycles) {
    trace.phases.push_back(PhaseCycles{phase, cycles});
    trace.total += cycles;
  };

  mem["pw"] = fx_conv(mem.at("input"), d.pw_w, &d.pw_b, LayerKind::PointwiseConv2d, 1, 0);
  account("pw_reduce", conv_cycles(pointwise_shape(d.channels, d.bottleneck, H, W), cfg));

  mem["pw_act"] = fx_leaky_relu(mem.at("pw"));
  account("lrelu1", lrelu_cycles(trunk_elems, cfg));

  mem["dw"] = fx_conv(mem.at("pw_act"), d.dw_w, &d.dw_b, LayerKind::DepthwiseConv2d, 1, 1);
  account("dw", conv_cycles(ConvShape{LayerKind::DepthwiseConv2d, d.bottleneck, d.bottleneck, H, W}, cfg));

  mem["dw_act"] = fx_leaky_relu(mem.at("dw"));
  account("lrelu2", lrelu_cycles(trunk_elems, cfg));

  mem["mu"] = fx_conv(mem.at("dw_act"), d.mean_w, &d.mean_b, LayerKind::PointwiseConv2d, 1, 0);
  mem["sigma"] = fx_conv(mem.at("dw_act"), d.scale_w, &d.scale_b, LayerKind::PointwiseConv2d, 1, 0);
  const std::int64_t head_cost = conv_cycles(pointwise_shape(d.bottleneck, d.channels, H, W), cfg);
  if (cfg.parallel_heads) {
    account("heads_parallel", head_cost);  // both heads overlap on core groups
  } else {
    account("head_mean", head_cost);
    account("head_scale", head_cost);
  }

  auto [cancelled, cancel_cyc] = noise_cancel(mem.at("input"), mem.at("mu"), mem.at("sigma"), cfg,
                                              bank, lut);
  mem["output"] = std::move(cancelled);
  account("cancel", cancel_cyc);
  (void)full_elems;

  return {std::move(mem.at("output")), std::move(trace)};
}

std::vector<PhaseCycles> denoiser_phase_cycles(int channels, int bottleneck, int h, int w,
                                               const HwConfig& cfg) {
  const std::int64_t trunk_elems = static_cast<std::int64_t>(bottleneck) * h * w;
  const std::int64_t full_elems = static_cast<std::int64_t>(channels) * h * w;
  std::vector<PhaseCycles> phases;
  phases.push_back({"pw_reduce", conv_cycles(pointwise_shape(channels, bottleneck, h, w), cfg)});
  phases.push_back({"lrelu1", lrelu_cycles(trunk_elems, cfg)});
  phases.push_back(
      {"dw", conv_cycles(ConvShape{LayerKind::DepthwiseConv2d, bottleneck, bottleneck, h, w}, cfg)});
  phases.push_back({"lrelu2", lrelu_cycles(trunk_elems, cfg)});
  const std::int64_t head_cost = conv_cycles(pointwise_shape(bottleneck, channels, h, w), cfg);
  if (cfg.parallel_heads) {
    phases.push_back({"heads_parallel", head_cost});
  } else {
    phases.push_back({"head_mean", head_cost});
    phases.push_back({"head_scale", head_cost});
  }
  phases.push_back({"cancel", cancel_cycles(full_elems, cfg)});
  return phases;
}

CycleReport simulate_network_cycles(const std::vector<ConvShape>& convs,
                                    const std::set<int>& attachments, double ratio,
                                    const HwConfig& cfg) {
  validate_hw_config(cfg);
  CycleReport report;
  for (int i = 0; i < static_cast<int>(convs.size()); ++i) {
    const ConvShape& shape = convs[static_cast<std::size_t>(i)];
    const std::int64_t base = conv_cycles(shape, cfg);
    report.rows.push_back(CycleRow{i, "base", base});
    report.total_without += base;
    report.total_with += base;

    if (attachments.count(i) == 0) continue;
    const int cb = bottleneck_width(shape.c_out, ratio);
    for (const PhaseCycles& p :
         denoiser_phase_cycles(shape.c_out, cb, shape.h_out, shape.w_out, cfg)) {
      report.rows.push_back(CycleRow{i, p.phase, p.cycles});
      report.total_with += p.cycles;
    }
  }
  return report;
}

CycleReport simulate_model_cycles(const ModelGraph& model, const HwConfig& cfg) {
  validate_hw_config(cfg);
  const auto shapes = layer_output_shapes(model, 1);
  CycleReport report;
  for (int l = 0; l < static_cast<int>(model.layers.size()); ++l) {
    const LayerDesc& layer = model.layers[static_cast<std::size_t>(l)];
    const Shape4& out_shape = shapes[static_cast<std::size_t>(l)];
    const bool is_conv = layer.kind == LayerKind::Conv2d ||
                         layer.kind == LayerKind::DepthwiseConv2d ||
                         layer.kind == LayerKind::PointwiseConv2d;
    if (is_conv) {
      const ConvShape shape{layer.kind, layer.in_channels, layer.out_channels, out_shape.h,
                            out_shape.w};
      const std::int64_t base = conv_cycles(shape, cfg);
      report.rows.push_back(CycleRow{l, "base", base});
      report.total_without += base;
      report.total_with += base;
    }
    auto att = model.attachments.find(l);
    if (att != model.attachments.end()) {
      for (const PhaseCycles& p :
           denoiser_phase_cycles(att->second.channels(), att->second.bottleneck_channels(),
                                 out_shape.h, out_shape.w, cfg)) {
        report.rows.push_back(CycleRow{l, p.phase, p.cycles});
        report.total_with += p.cycles;
      }
    }
  }
  return report;
}

void write_cycles_csv(std::ostream& out, const CycleReport& report,
                      const std::vector<std::pair<std::string, std::string>>& header) {
  for (const auto& [k, v] : header) out << "# " << k << "=" << v << "\n";
  out << "layer,phase,cycles,cumulative\n";
  std::int64_t cum = 0;
  for (const CycleRow& row : report.rows) {
    cum += row.cycles;
    out << row.layer << "," << row.phase << "," << row.cycles << "," << cum << "\n";
  }
}

void dump_lut_hex(std::ostream& out, const std::vector<std::int16_t>& lut) {
  static const char* digits = "0123456789abcdef";
  for (std::int16_t v : lut) {
    const std::uint16_t u = static_cast<std::uint16_t>(v);
    out << digits[(u >> 12) & 0xF] << digits[(u >> 8) & 0xF] << digits[(u >> 4) & 0xF]
        << digits[u & 0xF] << "\n";
  }
}

}  // namespace anmd
