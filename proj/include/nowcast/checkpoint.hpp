#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace nowcast {

struct NamedTensorBlob {
    std::string name;
    std::vector<std::int64_t> shape;
    std::vector<float> data;
};

// Raw contents of an SMCK checkpoint file: a key=value spec summary plus the
// named parameter and buffer tensors, f32 little-endian on disk.
struct CheckpointBlob {
    std::vector<std::pair<std::string, std::string>> spec_kv;
    std::vector<NamedTensorBlob> tensors;
};

void write_smck(const std::string& path, const CheckpointBlob& blob);
CheckpointBlob read_smck(const std::string& path);

}  // namespace nowcast
