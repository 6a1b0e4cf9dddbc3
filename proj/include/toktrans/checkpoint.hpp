#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "toktrans/tensor.hpp"

namespace toktrans {

// Container layout: magic "S2T2" | u32 version | u64 header length (LE) |
// header JSON | payload of concatenated little-endian IEEE-754 tensor data.
// Unknown header fields are ignored on read; save/load round-trips are
// bit-identical for f64 tensors.
struct CheckpointData {
    std::map<std::string, Tensor> tensors;
    nlohmann::json metadata;
};

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& tensors,
                     const nlohmann::json& metadata = nlohmann::json::object(),
                     const std::string& dtype = "f64");

CheckpointData load_checkpoint(const std::string& path);

}  // namespace toktrans
