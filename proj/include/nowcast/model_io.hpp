#pragma once

#include <algorithm>

#include "nowcast/checkpoint.hpp"
#include "nowcast/nn.hpp"

namespace nowcast {

inline std::vector<std::pair<std::string, std::string>> spec_to_kv(const ModelSpec& s) {
    return {
        {"variant", variant_name(s.variant)},
        {"in_channels", std::to_string(s.in_channels)},
        {"out_channels", std::to_string(s.out_channels)},
        {"base_width", std::to_string(s.base_width)},
        {"depth", std::to_string(s.depth)},
        {"cbam_reduction", std::to_string(s.cbam_reduction)},
        {"spatial_kernel", std::to_string(s.spatial_kernel)},
        {"bilinear", s.bilinear ? "1" : "0"},
        {"dsc_multiplier", std::to_string(s.dsc_multiplier)},
    };
}

inline ModelSpec spec_from_kv(const std::vector<std::pair<std::string, std::string>>& kv) {
    ModelSpec s;
    for (const auto& [k, v] : kv) {
        if (k == "variant") s.variant = variant_from_name(v);
        else if (k == "in_channels") s.in_channels = std::stoi(v);
        else if (k == "out_channels") s.out_channels = std::stoi(v);
        else if (k == "base_width") s.base_width = std::stoi(v);
        else if (k == "depth") s.depth = std::stoi(v);
        else if (k == "cbam_reduction") s.cbam_reduction = std::stoi(v);
        else if (k == "spatial_kernel") s.spatial_kernel = std::stoi(v);
        else if (k == "bilinear") s.bilinear = (v == "1" || v == "true");
        else if (k == "dsc_multiplier") s.dsc_multiplier = std::stoi(v);
        else throw DataError("checkpoint spec block has unknown key '" + k + "'");
    }
    return s;
}

namespace detail {

template <typename S>
NamedTensorBlob tensor_to_blob(const std::string& name, const Tensor<S>& t) {
    NamedTensorBlob b;
    b.name = name;
    for (int i = 0; i < t.ndim(); ++i) b.shape.push_back(t.dim(i));
    b.data.resize(static_cast<std::size_t>(t.numel()));
    for (std::int64_t i = 0; i < t.numel(); ++i)
        b.data[static_cast<std::size_t>(i)] = static_cast<float>(t.values()(i));
    return b;
}

template <typename S>
void blob_into_tensor(const NamedTensorBlob& b, Tensor<S>& t) {
    if (static_cast<std::int64_t>(b.data.size()) != t.numel())
        throw DataError("checkpoint tensor '" + b.name + "' has " +
                        std::to_string(b.data.size()) + " values, model expects " +
                        std::to_string(t.numel()));
    for (std::int64_t i = 0; i < t.numel(); ++i)
        t.values()(i) = static_cast<S>(b.data[static_cast<std::size_t>(i)]);
}

}  // namespace detail

// Checkpoint = spec summary + all named parameters, then all named buffers.
// Values are stored f32; an f64 model is narrowed on save.
template <typename S>
void save_model(const Model<S>& m, const std::string& path) {
    CheckpointBlob blob;
    blob.spec_kv = spec_to_kv(m.spec);
    for (const auto& [name, t] : m.store.params)
        blob.tensors.push_back(detail::tensor_to_blob(name, t));
    for (const auto& [name, t] : m.store.buffers)
        blob.tensors.push_back(detail::tensor_to_blob(name, t));
    write_smck(path, blob);
}

template <typename S>
Model<S> load_model(const std::string& path) {
    const CheckpointBlob blob = read_smck(path);
    Model<S> m = build_model<S>(spec_from_kv(blob.spec_kv), 0);
    std::size_t cursor = 0;
    auto fill = [&](std::vector<std::pair<std::string, Tensor<S>>>& named) {
        for (auto& [name, t] : named) {
            if (cursor >= blob.tensors.size())
                throw DataError("checkpoint ends before tensor '" + name + "'");
            const NamedTensorBlob& b = blob.tensors[cursor++];
            if (b.name != name)
                throw DataError("checkpoint tensor order mismatch: found '" + b.name +
                                "', expected '" + name + "'");
            detail::blob_into_tensor(b, t);
        }
    };
    fill(m.store.params);
    fill(m.store.buffers);
    if (cursor != blob.tensors.size())
        throw DataError("checkpoint has " + std::to_string(blob.tensors.size() - cursor) +
                        " trailing tensor(s) the model does not define");
    return m;
}

}  // namespace nowcast
