#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ifd/tensor.hpp"
#include "json.hpp"

namespace ifd {

// Checkpoint file: "IFDCKPT1" magic, a JSON header (backbone config, IKT
// kernel size, variant, plus any training-state scalars), then named arrays
// as {name, shape, raw little-endian float32 data} in a fixed order.
struct CheckpointData {
    nlohmann::json header;
    std::vector<std::pair<std::string, Tensor>> entries;

    const Tensor* find(const std::string& name) const;
    bool has(const std::string& name) const { return find(name) != nullptr; }
};

void save_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData load_checkpoint(const std::string& path);

} // namespace ifd
