#pragma once

#include <string>
#include <vector>

#include "anmd/adam.hpp"
#include "anmd/model.hpp"

namespace anmd {

// Container layout (all integers little-endian):
//   magic "ANMD" | u32 version=1 | u64 manifest length | manifest (JSON text)
//   | u32 tensor count | records of
//     u32 name length | name | u8 dtype (1 = f64) | u8 ndim=4 | u64 dims[4]
//     | u64 byte length | raw payload
// The manifest references payloads by name; save -> load -> save is
// byte-identical.
std::vector<std::uint8_t> save_model(const ModelGraph& model);
ModelGraph load_model(const std::vector<std::uint8_t>& bytes);

void save_model_file(const ModelGraph& model, const std::string& path);
ModelGraph load_model_file(const std::string& path);

// Optimizer sidecar in the same chunk format (manifest kind "optimizer").
// Param names bind moments to the model's parameter registry.
std::vector<std::uint8_t> save_optimizer(const AdamState& state,
                                         const std::vector<std::string>& param_names);
AdamState load_optimizer(const std::vector<std::uint8_t>& bytes,
                         std::vector<std::string>* param_names = nullptr);

void save_optimizer_file(const AdamState& state, const std::vector<std::string>& param_names,
                         const std::string& path);
AdamState load_optimizer_file(const std::string& path,
                              std::vector<std::string>* param_names = nullptr);

}  // namespace anmd
