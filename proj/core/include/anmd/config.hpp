#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "anmd/dataset.hpp"
#include "anmd/hw.hpp"
#include "anmd/model.hpp"
#include "anmd/noise.hpp"
#include "anmd/placement.hpp"

namespace anmd {

struct DatasetConfig {
  std::string kind = "synthetic";  // "synthetic" | "cifar10-bin"
  // synthetic
  int n_train = 8192;
  int n_test = 2048;
  int classes = 10;
  int size = 32;
  double amplitude = 0.25;
  double pixel_noise = 0.18;
  // cifar10-bin
  std::vector<std::string> train_files;
  std::vector<std::string> test_files;
};

struct BackboneConfig {
  std::string kind = "smallcnn";  // "smallcnn" | "shape-table"
  std::vector<ConvShape> shape_table;
};

struct NoiseConfig {
  std::string apply_to = "all-conv";  // "all-conv" | "layers"
  double sigma_pct = 6.0;
  double mean = 0.0;
  std::vector<NoiseEntry> layers;
};

struct TrainSection {
  int backbone_epochs = 8;
  int denoiser_epochs = 5;
  int batch_size = 128;
  double lr = 1e-3;
};

struct EvalSection {
  int seeds = 5;
  std::vector<double> sigma_sweep;  // empty: use noise.sigma_pct
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  DatasetConfig dataset;
  BackboneConfig backbone;
  NoiseConfig noise;
  double eta_pct = 4.0;
  double ratio = kDefaultBottleneckRatio;
  int calib_samples = 256;
  std::string select_mode = "skip";  // "skip" | "stop"
  TrainSection train;
  EvalSection eval;
  HwConfig hw;
  int frac_bits = 8;

  SelectMode selection() const;
  QFormat qformat() const { return QFormat{frac_bits}; }
};

// Strict parse: unknown keys anywhere raise ConfigError naming the key.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config_file(const std::string& path);

// Materializes the configured dataset (train, test).
std::pair<Dataset, Dataset> load_datasets(const ExperimentConfig& cfg);

NoiseSpec make_noise_spec(const ExperimentConfig& cfg, const ModelGraph& model);

}  // namespace anmd
