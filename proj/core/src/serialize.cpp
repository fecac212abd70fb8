#include "anmd/serialize.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

namespace anmd {

using json = nlohmann::json;

namespace {

constexpr char kMagic[4] = {'A', 'N', 'M', 'D'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF64 = 1;

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& buf) : buf_(buf) {}

  std::uint8_t u8() { return need(1)[0]; }
  std::uint32_t u32() {
    const std::uint8_t* p = need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const std::uint8_t* p = need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  std::string str(std::size_t n) {
    const std::uint8_t* p = need(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  const std::uint8_t* need(std::size_t n) {
    if (pos_ + n > buf_.size())
      throw Error("container: truncated payload (needed " + std::to_string(n) + " bytes at " +
                  std::to_string(pos_) + ", have " + std::to_string(buf_.size()) + ")");
    const std::uint8_t* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  const std::vector<std::uint8_t>& buf_;
  std::size_t pos_ = 0;
};

struct NamedTensor {
  std::string name;
  const Tensor4* tensor;
};

json layer_to_json(const LayerDesc& l, int idx, std::vector<NamedTensor>& tensors) {
  json j;
  j["kind"] = layer_kind_name(l.kind);
  j["in"] = l.in_channels;
  j["out"] = l.out_channels;
  j["kernel"] = l.kernel;
  j["stride"] = l.stride;
  j["padding"] = l.padding;
  j["trainable"] = l.trainable;
  j["noise_enabled"] = l.noise_enabled;
  j["sigma_pct"] = l.noise_sigma_pct;
  j["mean"] = l.noise_mean;
  const std::string base = "layer." + std::to_string(idx);
  if (!l.weight.empty()) {
    j["weight"] = base + ".weight";
    tensors.push_back({base + ".weight", &l.weight});
  }
  if (!l.bias.empty()) {
    j["bias"] = base + ".bias";
    tensors.push_back({base + ".bias", &l.bias});
  }
  return j;
}

void conv_tensors_to_json(json& j, const std::string& base, const LayerDesc& conv,
                          std::vector<NamedTensor>& tensors) {
  j["weight"] = base + ".weight";
  tensors.push_back({base + ".weight", &conv.weight});
  if (!conv.bias.empty()) {
    j["bias"] = base + ".bias";
    tensors.push_back({base + ".bias", &conv.bias});
  }
}

void write_tensor_records(Writer& w, const std::vector<NamedTensor>& tensors) {
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const NamedTensor& nt : tensors) {
    w.u32(static_cast<std::uint32_t>(nt.name.size()));
    w.bytes(nt.name.data(), nt.name.size());
    w.u8(kDtypeF64);
    w.u8(4);
    const Shape4 s = nt.tensor->shape();
    w.u64(static_cast<std::uint64_t>(s.n));
    w.u64(static_cast<std::uint64_t>(s.c));
    w.u64(static_cast<std::uint64_t>(s.h));
    w.u64(static_cast<std::uint64_t>(s.w));
    const std::uint64_t nbytes = static_cast<std::uint64_t>(nt.tensor->size()) * sizeof(double);
    w.u64(nbytes);
    w.bytes(nt.tensor->data(), nbytes);
  }
}

std::vector<std::uint8_t> assemble(const json& manifest, const std::vector<NamedTensor>& tensors) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  const std::string mtext = manifest.dump();
  w.u64(mtext.size());
  w.bytes(mtext.data(), mtext.size());
  write_tensor_records(w, tensors);
  return w.take();
}

std::map<std::string, Tensor4> read_container(Reader& r, json& manifest) {
  const std::string magic = r.str(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw Error("container: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw Error("container: unsupported version " + std::to_string(version) + " (expected " +
                std::to_string(kVersion) + ")");
  const std::uint64_t mlen = r.u64();
  const std::string mtext = r.str(mlen);
  manifest = json::parse(mtext, nullptr, false);
  if (manifest.is_discarded()) throw Error("container: manifest is not valid JSON");

  std::map<std::string, Tensor4> tensors;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.str(name_len);
    const std::uint8_t dtype = r.u8();
    if (dtype != kDtypeF64)
      throw Error("container: unsupported dtype tag " + std::to_string(dtype));
    const std::uint8_t ndim = r.u8();
    if (ndim != 4) throw Error("container: tensor " + name + " has ndim " + std::to_string(ndim));
    Shape4 s;
    s.n = static_cast<int>(r.u64());
    s.c = static_cast<int>(r.u64());
    s.h = static_cast<int>(r.u64());
    s.w = static_cast<int>(r.u64());
    const std::uint64_t nbytes = r.u64();
    if (nbytes != static_cast<std::uint64_t>(s.elems()) * sizeof(double))
      throw Error("container: tensor " + name + " byte length " + std::to_string(nbytes) +
                  " does not match shape " + s.str());
    const std::uint8_t* payload = r.need(nbytes);
    std::vector<double> data(static_cast<std::size_t>(s.elems()));
    std::memcpy(data.data(), payload, nbytes);
    tensors.emplace(name, Tensor4::from(s, std::move(data)));
  }
  return tensors;
}

Tensor4 take_tensor(std::map<std::string, Tensor4>& pool, const std::string& name) {
  auto it = pool.find(name);
  if (it == pool.end()) throw Error("container: missing payload for tensor \"" + name + "\"");
  Tensor4 t = std::move(it->second);
  return t;
}

LayerDesc layer_from_json(const json& j, std::map<std::string, Tensor4>& pool) {
  LayerDesc l;
  l.kind = layer_kind_from_name(j.at("kind").get<std::string>());
  l.in_channels = j.at("in").get<int>();
  l.out_channels = j.at("out").get<int>();
  l.kernel = j.at("kernel").get<int>();
  l.stride = j.at("stride").get<int>();
  l.padding = j.at("padding").get<int>();
  l.trainable = j.at("trainable").get<bool>();
  l.noise_enabled = j.at("noise_enabled").get<bool>();
  l.noise_sigma_pct = j.at("sigma_pct").get<double>();
  l.noise_mean = j.at("mean").get<double>();
  if (j.contains("weight")) l.weight = take_tensor(pool, j.at("weight").get<std::string>());
  if (j.contains("bias")) l.bias = take_tensor(pool, j.at("bias").get<std::string>());
  return l;
}

LayerDesc conv_from_json(const json& j, LayerKind kind, int c_in, int c_out, int kernel,
                         int padding, std::map<std::string, Tensor4>& pool) {
  LayerDesc l;
  l.kind = kind;
  l.in_channels = c_in;
  l.out_channels = c_out;
  l.kernel = kernel;
  l.stride = 1;
  l.padding = padding;
  l.trainable = true;
  l.weight = take_tensor(pool, j.at("weight").get<std::string>());
  if (j.contains("bias")) l.bias = take_tensor(pool, j.at("bias").get<std::string>());
  return l;
}

}  // namespace

std::vector<std::uint8_t> save_model(const ModelGraph& model) {
  json manifest;
  manifest["kind"] = "model";
  manifest["name"] = model.name;
  manifest["classes"] = model.num_classes;
  manifest["input"] = {model.input_shape.c, model.input_shape.h, model.input_shape.w};

  std::vector<NamedTensor> tensors;
  json layers = json::array();
  for (int i = 0; i < static_cast<int>(model.layers.size()); ++i)
    layers.push_back(layer_to_json(model.layers[static_cast<std::size_t>(i)], i, tensors));
  manifest["layers"] = std::move(layers);

  json attachments = json::array();
  for (const auto& [idx, d] : model.attachments) {
    json a;
    a["layer"] = idx;
    a["ratio"] = d.ratio;
    a["channels"] = d.channels();
    a["bottleneck"] = d.bottleneck_channels();
    const std::string base = "denoiser." + std::to_string(idx);
    json pw, dw, hm, hs;
    conv_tensors_to_json(pw, base + ".pw_reduce", d.pw_reduce, tensors);
    conv_tensors_to_json(dw, base + ".dw", d.dw, tensors);
    conv_tensors_to_json(hm, base + ".head_mean", d.head_mean, tensors);
    conv_tensors_to_json(hs, base + ".head_scale", d.head_scale, tensors);
    a["pw_reduce"] = std::move(pw);
    a["dw"] = std::move(dw);
    a["head_mean"] = std::move(hm);
    a["head_scale"] = std::move(hs);
    attachments.push_back(std::move(a));
  }
  manifest["attachments"] = std::move(attachments);
  return assemble(manifest, tensors);
}

ModelGraph load_model(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  json manifest;
  std::map<std::string, Tensor4> pool = read_container(r, manifest);
  if (manifest.value("kind", "") != "model")
    throw Error("container: manifest kind is not \"model\"");

  ModelGraph m;
  m.name = manifest.at("name").get<std::string>();
  m.num_classes = manifest.at("classes").get<int>();
  const auto in = manifest.at("input");
  m.input_shape = Shape4{1, in.at(0).get<int>(), in.at(1).get<int>(), in.at(2).get<int>()};

  for (const json& j : manifest.at("layers")) m.layers.push_back(layer_from_json(j, pool));

  for (const json& a : manifest.at("attachments")) {
    const int idx = a.at("layer").get<int>();
    const int channels = a.at("channels").get<int>();
    const int cb = a.at("bottleneck").get<int>();
    DenoiserParams d;
    d.ratio = a.at("ratio").get<double>();
    d.pw_reduce = conv_from_json(a.at("pw_reduce"), LayerKind::PointwiseConv2d, channels, cb, 1, 0, pool);
    d.dw = conv_from_json(a.at("dw"), LayerKind::DepthwiseConv2d, cb, cb, 3, 1, pool);
    d.head_mean = conv_from_json(a.at("head_mean"), LayerKind::PointwiseConv2d, cb, channels, 1, 0, pool);
    d.head_scale = conv_from_json(a.at("head_scale"), LayerKind::PointwiseConv2d, cb, channels, 1, 0, pool);
    m.attachments.emplace(idx, std::move(d));
  }

  // Validate loaded shapes against declared descriptors.
  for (std::size_t i = 0; i < m.layers.size(); ++i)
    validate_layer(m.layers[i], "layer " + std::to_string(i));
  return m;
}

void save_model_file(const ModelGraph& model, const std::string& path) {
  const std::vector<std::uint8_t> bytes = save_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_model_file: cannot open " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("save_model_file: write failed for " + path);
}

ModelGraph load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_model_file: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return load_model(bytes);
}

std::vector<std::uint8_t> save_optimizer(const AdamState& state,
                                         const std::vector<std::string>& param_names) {
  if (state.m.size() != param_names.size())
    throw Error("save_optimizer: name count does not match moment count");
  json manifest;
  manifest["kind"] = "optimizer";
  manifest["step"] = state.step;
  manifest["lr"] = state.cfg.lr;
  manifest["beta1"] = state.cfg.beta1;
  manifest["beta2"] = state.cfg.beta2;
  manifest["eps"] = state.cfg.eps;
  manifest["params"] = param_names;

  std::vector<NamedTensor> tensors;
  for (std::size_t i = 0; i < param_names.size(); ++i) {
    tensors.push_back({"adam.m." + param_names[i], &state.m[i]});
    tensors.push_back({"adam.v." + param_names[i], &state.v[i]});
  }
  return assemble(manifest, tensors);
}

AdamState load_optimizer(const std::vector<std::uint8_t>& bytes,
                         std::vector<std::string>* param_names) {
  Reader r(bytes);
  json manifest;
  std::map<std::string, Tensor4> pool = read_container(r, manifest);
  if (manifest.value("kind", "") != "optimizer")
    throw Error("container: manifest kind is not \"optimizer\"");

  AdamState s;
  s.step = manifest.at("step").get<std::int64_t>();
  s.cfg.lr = manifest.at("lr").get<double>();
  s.cfg.beta1 = manifest.at("beta1").get<double>();
  s.cfg.beta2 = manifest.at("beta2").get<double>();
  s.cfg.eps = manifest.at("eps").get<double>();
  std::vector<std::string> names = manifest.at("params").get<std::vector<std::string>>();
  for (const std::string& name : names) {
    s.m.push_back(take_tensor(pool, "adam.m." + name));
    s.v.push_back(take_tensor(pool, "adam.v." + name));
  }
  if (param_names != nullptr) *param_names = std::move(names);
  return s;
}

void save_optimizer_file(const AdamState& state, const std::vector<std::string>& param_names,
                         const std::string& path) {
  const std::vector<std::uint8_t> bytes = save_optimizer(state, param_names);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_optimizer_file: cannot open " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

AdamState load_optimizer_file(const std::string& path, std::vector<std::string>* param_names) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_optimizer_file: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return load_optimizer(bytes, param_names);
}

}  // namespace anmd
