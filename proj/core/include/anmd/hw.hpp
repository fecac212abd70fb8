#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "anmd/fixed_point.hpp"
#include "anmd/model.hpp"

namespace anmd {

struct HwConfig {
  int num_conv_cores = 4;
  int num_cancel_lanes = 4;
  int lut_bits = 10;
  int pipeline_fill = 4;          // 3x3 input-stationary array: rows+cols-2
  int cancel_pipeline_depth = 8;
  int clock_mhz = 500;            // reporting only
  bool parallel_heads = false;    // what-if: overlap the two head convolutions
};

void validate_hw_config(const HwConfig& cfg);

// 16-bit Fibonacci LFSR, taps {16,15,13,4} (x^16+x^15+x^13+x^4+1, maximal
// length). One sample = 16 single-bit steps, so successive words are 16 apart
// in the m-sequence. The normalized output state/65536 lies in (0,1): the
// state is never 0, so ln(u) stays finite.
class Lfsr {
 public:
  static constexpr std::uint16_t kTapMask = 0xD008;  // bits 16,15,13,4 (1-indexed)

  explicit Lfsr(std::uint16_t seed);

  std::uint16_t state() const { return state_; }
  std::uint16_t step_bit();   // one shift; returns the new state
  std::uint16_t next_word();  // 16 bit-steps
  double next_uniform();      // next_word() / 65536

 private:
  std::uint16_t state_;
};

// Two LFSRs (U1, U2 sources) per cancellation lane, all seeds distinct.
struct LfsrBank {
  std::vector<std::array<Lfsr, 2>> lanes;

  static LfsrBank from_master_seed(int num_lanes, std::uint64_t master);
  // seeds.size() must be 2*num_lanes; duplicates or zeros are a ConfigError.
  static LfsrBank from_seeds(const std::vector<std::uint16_t>& seeds);
};

// Lookup tables for the Box-Muller cosine branch. R holds sqrt(-2 ln u) in
// Q4.12 sampled at bin midpoints (the singularity at u=0 never lands on a
// midpoint); C holds cos(2*pi*u) in Q2.14 sampled at bin left edges with the
// quarter-period entries pinned to exact 0 / +-1.
struct BoxMullerLut {
  int bits = 10;
  std::vector<std::int16_t> r_lut;    // Q4.12
  std::vector<std::int16_t> cos_lut;  // Q2.14

  static BoxMullerLut make(int bits);
};

// z1 = R(u1) * C(u2), rounded once to the working format. u1, u2 in (0,1).
std::int16_t unc_z1(double u1, double u2, const BoxMullerLut& lut, const QFormat& q);

// y = sat(rne(z1 * sigma) + mu), all operands in the working format.
std::int16_t gauss_gen(std::int16_t z1, std::int16_t mu, std::int16_t sigma, const QFormat& q);

// Elementwise x_hat = sat(x - gauss_gen(unc_z1(...), mu, sigma)); element e is
// served by lane e % lanes, each lane consuming its own LFSR pair in element
// order. cycles = ceil(elements/lanes) + cancel_pipeline_depth.
std::pair<FxTensor, std::int64_t> noise_cancel(const FxTensor& x, const FxTensor& mu,
                                               const FxTensor& sigma, const HwConfig& cfg,
                                               LfsrBank& bank, const BoxMullerLut& lut);

// Exact integer MACs in a 40-bit accumulator, one rounding at writeback.
// Output is bit-identical for any core count or PE schedule.
FxTensor fx_conv(const FxTensor& x, const FxTensor& w, const FxTensor* bias, LayerKind kind,
                 int stride, int padding);

// Slope 1/128 as an arithmetic right shift by 7.
FxTensor fx_leaky_relu(const FxTensor& x);

// Layer geometry as seen by the cycle model.
struct ConvShape {
  LayerKind kind = LayerKind::Conv2d;
  int c_in = 0;
  int c_out = 0;
  int h_out = 0;
  int w_out = 0;
};

// Closed-form cycle count of the 3x3 input-stationary systolic array:
// standard/pointwise ceil(C_out/cores) * (H_out*W_out*C_in + fill);
// depthwise ceil(C/cores) * (H_out*W_out + fill).
std::int64_t conv_cycles(const ConvShape& shape, const HwConfig& cfg);
std::int64_t lrelu_cycles(std::int64_t elements, const HwConfig& cfg);
std::int64_t cancel_cycles(std::int64_t elements, const HwConfig& cfg);

// -------- DCU: phase-sequenced execution of one quantized denoiser --------

struct FxDenoiser {
  int channels = 0;
  int bottleneck = 0;
  FxTensor pw_w, pw_b, dw_w, dw_b, mean_w, mean_b, scale_w, scale_b;
};

FxDenoiser quantize_denoiser(const DenoiserParams& params, const QFormat& q);

// Direct composition of the fx ops; the reference the DCU must match bitwise.
FxTensor fx_denoiser_forward(const FxDenoiser& d, const FxTensor& x, const HwConfig& cfg,
                             LfsrBank& bank, const BoxMullerLut& lut);

struct PhaseCycles {
  std::string phase;
  std::int64_t cycles = 0;
};

struct DcuTrace {
  std::vector<PhaseCycles> phases;
  std::int64_t total = 0;  // always the sum of the phase entries
};

// Runs the phase sequence pw_reduce -> lrelu -> dw -> lrelu -> head_mean ->
// head_scale -> noise_cancel through the DCU's buffer memory, accounting
// cycles per phase.
std::pair<FxTensor, DcuTrace> dcu_run(const FxDenoiser& d, const FxTensor& x, const HwConfig& cfg,
                                      LfsrBank& bank, const BoxMullerLut& lut);

// -------- Network-level cycle accounting --------

struct CycleRow {
  int layer = 0;
  std::string phase;
  std::int64_t cycles = 0;
};

struct CycleReport {
  std::vector<CycleRow> rows;
  std::int64_t total_without = 0;
  std::int64_t total_with = 0;

  double overhead_pct() const {
    return total_without == 0
               ? 0.0
               : 100.0 * static_cast<double>(total_with - total_without) /
                     static_cast<double>(total_without);
  }
};

// Phase cycle breakdown of one denoiser block on a C-channel HxW input.
std::vector<PhaseCycles> denoiser_phase_cycles(int channels, int bottleneck, int h, int w,
                                               const HwConfig& cfg);

// Baseline cycles for every conv layer in the table plus denoiser phases at
// the attached indices (block input = that conv's output feature map).
CycleReport simulate_network_cycles(const std::vector<ConvShape>& convs,
                                    const std::set<int>& attachments, double ratio,
                                    const HwConfig& cfg);

// Same accounting keyed by model layer index: baseline rows for conv layers,
// denoiser phases at the model's attachment points.
CycleReport simulate_model_cycles(const ModelGraph& model, const HwConfig& cfg);

void write_cycles_csv(std::ostream& out, const CycleReport& report,
                      const std::vector<std::pair<std::string, std::string>>& header);

// One 4-hex-digit word per line (two's complement raw values).
void dump_lut_hex(std::ostream& out, const std::vector<std::int16_t>& lut);

}  // namespace anmd
