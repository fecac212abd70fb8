#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "anmd/dataset.hpp"
#include "anmd/model.hpp"

namespace anmd {

struct PlacementEntry {
  int layer_index = 0;
  int channels = 0;
  std::int64_t param_cost = 0;
  double score = 0.0;
};

struct PlacementPlan {
  std::vector<PlacementEntry> entries;  // descending score
  std::int64_t total_cost = 0;
  std::int64_t budget = 0;
  std::int64_t backbone_params = 0;
  double eta_pct = 0.0;
  double ratio = kDefaultBottleneckRatio;
  std::map<int, double> scores;  // every eligible layer, selected or not
};

// Per-layer mean L2 norm of the per-sample loss gradient w.r.t. the layer's
// output feature map, computed on the clean model (no noise, no attachments).
std::map<int, double> layer_grad_scores(const ModelGraph& model, const Dataset& calib);

enum class SelectMode {
  SkipAndContinue,  // first-fit-decreasing: skip layers that do not fit
  StopAtOverflow,   // stop at the first layer that does not fit
};

// Greedy budgeted selection: descending score, ties broken by lower layer
// index; budget = floor(eta_pct/100 * backbone_param_count).
PlacementPlan select_layers(const std::map<int, double>& scores, double eta_pct,
                            std::int64_t backbone_param_count,
                            const std::map<int, int>& channel_map,
                            double ratio = kDefaultBottleneckRatio,
                            SelectMode mode = SelectMode::SkipAndContinue);

// Scores + selection on a model, using shapes from static propagation.
PlacementPlan plan_placement(const ModelGraph& model, const Dataset& calib, double eta_pct,
                             double ratio = kDefaultBottleneckRatio,
                             SelectMode mode = SelectMode::SkipAndContinue);

void write_plan(std::ostream& out, const PlacementPlan& plan, std::uint64_t seed);
void save_plan(const std::string& path, const PlacementPlan& plan, std::uint64_t seed);
PlacementPlan load_plan(const std::string& path);

}  // namespace anmd
