#include "anmd/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace anmd {

using json = nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (allowed.count(key) == 0)
      throw ConfigError("config: unknown key \"" + (where.empty() ? key : where + "." + key) +
                        "\"");
  }
}

template <typename T>
void get_if(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) {
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("config: key \"") + key + "\" has the wrong type");
    }
  }
}

DatasetConfig parse_dataset(const json& j) {
  DatasetConfig d;
  check_keys(j, "dataset",
             {"kind", "n_train", "n_test", "classes", "size", "amplitude", "pixel_noise",
              "train_files", "test_files"});
  get_if(j, "kind", d.kind);
  if (d.kind != "synthetic" && d.kind != "cifar10-bin")
    throw ConfigError("config: dataset.kind must be \"synthetic\" or \"cifar10-bin\"");
  get_if(j, "n_train", d.n_train);
  get_if(j, "n_test", d.n_test);
  get_if(j, "classes", d.classes);
  get_if(j, "size", d.size);
  get_if(j, "amplitude", d.amplitude);
  get_if(j, "pixel_noise", d.pixel_noise);
  get_if(j, "train_files", d.train_files);
  get_if(j, "test_files", d.test_files);
  if (d.kind == "cifar10-bin" && (d.train_files.empty() && d.test_files.empty()))
    throw ConfigError("config: dataset.kind cifar10-bin needs train_files and/or test_files");
  return d;
}

BackboneConfig parse_backbone(const json& j) {
  BackboneConfig b;
  check_keys(j, "backbone", {"kind", "shape_table"});
  get_if(j, "kind", b.kind);
  if (b.kind != "smallcnn" && b.kind != "shape-table")
    throw ConfigError("config: backbone.kind must be \"smallcnn\" or \"shape-table\"");
  if (j.contains("shape_table")) {
    for (const json& row : j.at("shape_table")) {
      check_keys(row, "backbone.shape_table[]", {"kind", "c_in", "c_out", "h_out", "w_out"});
      ConvShape s;
      std::string kind = "conv2d";
      get_if(row, "kind", kind);
      s.kind = layer_kind_from_name(kind);
      get_if(row, "c_in", s.c_in);
      get_if(row, "c_out", s.c_out);
      get_if(row, "h_out", s.h_out);
      get_if(row, "w_out", s.w_out);
      if (s.c_in < 1 || s.c_out < 1 || s.h_out < 1 || s.w_out < 1)
        throw ConfigError("config: shape_table rows need positive dims");
      b.shape_table.push_back(s);
    }
  }
  if (b.kind == "shape-table" && b.shape_table.empty())
    throw ConfigError("config: backbone.kind shape-table needs a shape_table");
  return b;
}

NoiseConfig parse_noise(const json& j) {
  NoiseConfig n;
  check_keys(j, "noise", {"apply_to", "sigma_pct", "mean", "layers"});
  get_if(j, "apply_to", n.apply_to);
  if (n.apply_to != "all-conv" && n.apply_to != "layers")
    throw ConfigError("config: noise.apply_to must be \"all-conv\" or \"layers\"");
  get_if(j, "sigma_pct", n.sigma_pct);
  get_if(j, "mean", n.mean);
  if (n.sigma_pct < 0.0) throw ConfigError("config: noise.sigma_pct must be >= 0");
  if (j.contains("layers")) {
    for (const json& row : j.at("layers")) {
      check_keys(row, "noise.layers[]", {"layer", "sigma_pct", "mean"});
      NoiseEntry e;
      get_if(row, "layer", e.layer_index);
      e.sigma_pct = n.sigma_pct;
      e.mean = n.mean;
      get_if(row, "sigma_pct", e.sigma_pct);
      get_if(row, "mean", e.mean);
      n.layers.push_back(e);
    }
  }
  if (n.apply_to == "layers" && n.layers.empty())
    throw ConfigError("config: noise.apply_to layers needs a noise.layers list");
  return n;
}

TrainSection parse_train(const json& j) {
  TrainSection t;
  check_keys(j, "train", {"backbone_epochs", "denoiser_epochs", "batch_size", "lr"});
  get_if(j, "backbone_epochs", t.backbone_epochs);
  get_if(j, "denoiser_epochs", t.denoiser_epochs);
  get_if(j, "batch_size", t.batch_size);
  get_if(j, "lr", t.lr);
  if (t.batch_size < 1) throw ConfigError("config: train.batch_size must be >= 1");
  if (t.lr <= 0.0) throw ConfigError("config: train.lr must be > 0");
  return t;
}

EvalSection parse_eval(const json& j) {
  EvalSection e;
  check_keys(j, "eval", {"seeds", "sigma_sweep"});
  get_if(j, "seeds", e.seeds);
  get_if(j, "sigma_sweep", e.sigma_sweep);
  if (e.seeds < 1) throw ConfigError("config: eval.seeds must be >= 1");
  return e;
}

HwConfig parse_hw(const json& j) {
  HwConfig h;
  check_keys(j, "hw",
             {"conv_cores", "cancel_lanes", "lut_bits", "pipeline_fill", "cancel_pipeline_depth",
              "clock_mhz", "parallel_heads"});
  get_if(j, "conv_cores", h.num_conv_cores);
  get_if(j, "cancel_lanes", h.num_cancel_lanes);
  get_if(j, "lut_bits", h.lut_bits);
  get_if(j, "pipeline_fill", h.pipeline_fill);
  get_if(j, "cancel_pipeline_depth", h.cancel_pipeline_depth);
  get_if(j, "clock_mhz", h.clock_mhz);
  get_if(j, "parallel_heads", h.parallel_heads);
  validate_hw_config(h);
  return h;
}

}  // namespace

SelectMode ExperimentConfig::selection() const {
  return select_mode == "stop" ? SelectMode::StopAtOverflow : SelectMode::SkipAndContinue;
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config: not valid JSON");
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");

  check_keys(j, "",
             {"seed", "output_dir", "dataset", "backbone", "noise", "eta_pct", "ratio",
              "calib_samples", "select_mode", "train", "eval", "hw", "frac_bits"});

  ExperimentConfig cfg;
  get_if(j, "seed", cfg.seed);
  get_if(j, "output_dir", cfg.output_dir);
  if (j.contains("dataset")) cfg.dataset = parse_dataset(j.at("dataset"));
  if (j.contains("backbone")) cfg.backbone = parse_backbone(j.at("backbone"));
  if (j.contains("noise")) cfg.noise = parse_noise(j.at("noise"));
  get_if(j, "eta_pct", cfg.eta_pct);
  get_if(j, "ratio", cfg.ratio);
  get_if(j, "calib_samples", cfg.calib_samples);
  get_if(j, "select_mode", cfg.select_mode);
  if (cfg.select_mode != "skip" && cfg.select_mode != "stop")
    throw ConfigError("config: select_mode must be \"skip\" or \"stop\"");
  if (j.contains("train")) cfg.train = parse_train(j.at("train"));
  if (j.contains("eval")) cfg.eval = parse_eval(j.at("eval"));
  if (j.contains("hw")) cfg.hw = parse_hw(j.at("hw"));
  get_if(j, "frac_bits", cfg.frac_bits);

  if (cfg.eta_pct < 0.0) throw ConfigError("config: eta_pct must be >= 0");
  if (!(cfg.ratio > 0.0 && cfg.ratio <= 1.0)) throw ConfigError("config: ratio must be in (0,1]");
  if (cfg.calib_samples < 1) throw ConfigError("config: calib_samples must be >= 1");
  if (cfg.frac_bits < 1 || cfg.frac_bits > 14)
    throw ConfigError("config: frac_bits must be in [1,14]");
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::pair<Dataset, Dataset> load_datasets(const ExperimentConfig& cfg) {
  const DatasetConfig& d = cfg.dataset;
  if (d.kind == "cifar10-bin") {
    Dataset train = d.train_files.empty() ? Dataset{} : load_cifar10(d.train_files, d.classes);
    Dataset test = d.test_files.empty() ? Dataset{} : load_cifar10(d.test_files, d.classes);
    return {std::move(train), std::move(test)};
  }
  // One draw covering both splits: train and test share the class patterns
  // and differ only in the per-sample draws.
  SyntheticSpec s;
  s.seed = derive_seed(cfg.seed, RngTag::kData);
  s.classes = d.classes;
  s.size = d.size;
  s.amplitude = d.amplitude;
  s.pixel_noise = d.pixel_noise;
  s.n = d.n_train + d.n_test;
  Dataset all = gen_synthetic(s);
  return all.split(d.n_train);
}

NoiseSpec make_noise_spec(const ExperimentConfig& cfg, const ModelGraph& model) {
  if (cfg.noise.apply_to == "all-conv")
    return all_conv_noise(model, cfg.noise.sigma_pct, cfg.noise.mean, cfg.seed);
  NoiseSpec spec;
  spec.seed = cfg.seed;
  spec.entries = cfg.noise.layers;
  return spec;
}

}  // namespace anmd
