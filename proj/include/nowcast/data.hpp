#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nowcast/tensor.hpp"

namespace nowcast {

// Time-ordered multi-channel frame sequence plus static channels, the
// in-memory form of an STWF file. Values are stored as f32 regardless of the
// compute dtype; sample assembly casts.
struct FrameDataset {
    std::int64_t frames = 0;  // T
    std::int64_t dyn_channels = 0;
    std::int64_t static_channels = 0;
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::uint16_t cadence_minutes = 15;
    std::vector<std::string> channel_names;  // dynamic names first, then static
    std::vector<float> mean, stddev;         // per dynamic channel
    std::vector<float> dynamic;              // T * C_dyn * H * W, row-major
    std::vector<float> statics;              // C_static * H * W

    std::int64_t plane_size() const { return height * width; }
    const float* frame(std::int64_t t, std::int64_t c) const {
        return dynamic.data() + (t * dyn_channels + c) * plane_size();
    }
    float* frame(std::int64_t t, std::int64_t c) {
        return dynamic.data() + (t * dyn_channels + c) * plane_size();
    }
    const float* static_plane(std::int64_t c) const {
        return statics.data() + c * plane_size();
    }

    void validate() const;
};

// STWF container (see README for the byte layout). Round-trips bit-exactly.
FrameDataset read_stwf(const std::string& path);
void write_stwf(const FrameDataset& ds, const std::string& path);

// population mean / std over all frames and pixels of one dynamic channel;
// std is floored at 1e-6
std::pair<float, float> compute_stats(const FrameDataset& ds, std::int64_t channel);
void refresh_stats(FrameDataset& ds);

// frames [t0, t1); static channels, names and stats are carried over
FrameDataset slice_time(const FrameDataset& ds, std::int64_t t0, std::int64_t t1);

struct SplitFractions {
    double train = 0.7;
    double valid = 0.15;  // test gets the remainder
};
struct DatasetSplits {
    FrameDataset train, valid, test;
};
DatasetSplits split_dataset(const FrameDataset& ds, const SplitFractions& f);

// Synthetic weather-like generator: Gaussian blobs advecting with constant
// per-sequence velocities and toroidal wrap-around. Channels: 0 intensity,
// 1 thresholded intensity, 2 smooth transform, 3 binary mask; statics:
// normalized row, normalized column, seeded smooth elevation.
struct SynthConfig {
    std::uint64_t seed = 42;
    std::int64_t frames = 400;
    std::int64_t height = 32;
    std::int64_t width = 32;
    int blobs = 3;
    double velocity_range = 1.0;  // px/frame per axis
};
FrameDataset gen_synthetic(const SynthConfig& cfg);

// ---------------------------------------------------------------------------
// sliding-window sample assembly
// ---------------------------------------------------------------------------

// Input/target plane layout. Default layout stacks t_in frames of dynamic
// channels and appends the static channels once; statics_per_frame instead
// interleaves the statics into every frame block.
struct SampleLayout {
    int t_in = 4;
    int t_out = 32;
    std::vector<int> target_channels;  // empty = all dynamic channels
    bool statics_per_frame = false;

    std::vector<int> targets(std::int64_t c_dyn) const {
        if (!target_channels.empty()) return target_channels;
        std::vector<int> all(static_cast<std::size_t>(c_dyn));
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
        return all;
    }
    std::int64_t in_channels(std::int64_t c_dyn, std::int64_t c_static) const {
        return statics_per_frame ? t_in * (c_dyn + c_static) : t_in * c_dyn + c_static;
    }
    std::int64_t out_channels(std::int64_t c_dyn) const {
        return static_cast<std::int64_t>(t_out) * static_cast<std::int64_t>(targets(c_dyn).size());
    }

    void validate(const FrameDataset& ds) const {
        check_config(t_in >= 1 && t_out >= 1, "t_in and t_out must be >= 1");
        for (int c : targets(ds.dyn_channels))
            check_config(c >= 0 && c < ds.dyn_channels,
                         "target channel " + std::to_string(c) + " out of range [0, " +
                             std::to_string(ds.dyn_channels) + ")");
    }
};

inline std::int64_t window_count(const FrameDataset& ds, const SampleLayout& layout) {
    const std::int64_t n = ds.frames - layout.t_in - layout.t_out + 1;
    return n > 0 ? n : 0;
}

inline std::vector<std::int64_t> window_starts(const FrameDataset& ds, const SampleLayout& layout) {
    std::vector<std::int64_t> starts(static_cast<std::size_t>(window_count(ds, layout)));
    for (std::size_t i = 0; i < starts.size(); ++i) starts[i] = static_cast<std::int64_t>(i);
    return starts;
}

namespace detail {
// min-max bounds of one static plane, used to normalize statics into [0,1]
inline std::pair<float, float> static_bounds(const FrameDataset& ds, std::int64_t c) {
    const float* p = ds.static_plane(c);
    float lo = p[0], hi = p[0];
    for (std::int64_t i = 1; i < ds.plane_size(); ++i) {
        lo = std::min(lo, p[i]);
        hi = std::max(hi, p[i]);
    }
    return {lo, hi};
}
}  // namespace detail

// Copies one normalized dynamic plane into dst.
template <typename S>
void copy_normalized_plane(const FrameDataset& ds, std::int64_t t, std::int64_t c, S* dst) {
    const float* src = ds.frame(t, c);
    const float m = ds.mean[static_cast<std::size_t>(c)];
    const float sd = ds.stddev[static_cast<std::size_t>(c)];
    for (std::int64_t i = 0; i < ds.plane_size(); ++i)
        dst[i] = static_cast<S>((src[i] - m) / sd);
}

template <typename S>
void copy_static_plane(const FrameDataset& ds, std::int64_t c, S* dst) {
    const auto [lo, hi] = detail::static_bounds(ds, c);
    const float range = hi - lo;
    const float* src = ds.static_plane(c);
    for (std::int64_t i = 0; i < ds.plane_size(); ++i)
        dst[i] = range > 0 ? static_cast<S>((src[i] - lo) / range) : S(0);
}

// Builds the stacked input planes for one window into a (1,C_in,H,W) slice.
template <typename S>
void fill_input_planes(const FrameDataset& ds, std::int64_t start, const SampleLayout& layout,
                       S* dst) {
    const std::int64_t hw = ds.plane_size();
    std::int64_t plane = 0;
    for (int t = 0; t < layout.t_in; ++t) {
        for (std::int64_t c = 0; c < ds.dyn_channels; ++c)
            copy_normalized_plane(ds, start + t, c, dst + (plane++) * hw);
        if (layout.statics_per_frame)
            for (std::int64_t c = 0; c < ds.static_channels; ++c)
                copy_static_plane(ds, c, dst + (plane++) * hw);
    }
    if (!layout.statics_per_frame)
        for (std::int64_t c = 0; c < ds.static_channels; ++c)
            copy_static_plane(ds, c, dst + (plane++) * hw);
}

template <typename S>
void fill_target_planes(const FrameDataset& ds, std::int64_t start, const SampleLayout& layout,
                        S* dst) {
    const std::int64_t hw = ds.plane_size();
    const auto targets = layout.targets(ds.dyn_channels);
    std::int64_t plane = 0;
    for (int lead = 1; lead <= layout.t_out; ++lead)
        for (int c : targets)
            copy_normalized_plane(ds, start + layout.t_in - 1 + lead, c, dst + (plane++) * hw);
}

template <typename S>
struct Sample {
    Tensor<S> input;   // (C_in, H, W)
    Tensor<S> target;  // (C_out, H, W)
    std::int64_t start = 0;
};

template <typename S>
Sample<S> assemble_sample(const FrameDataset& ds, std::int64_t start, const SampleLayout& layout) {
    layout.validate(ds);
    check_dim(start >= 0 && start < window_count(ds, layout),
              "window start " + std::to_string(start) + " out of range [0, " +
                  std::to_string(window_count(ds, layout)) + ")");
    Sample<S> s;
    s.start = start;
    s.input = Tensor<S>::uninit(
        {layout.in_channels(ds.dyn_channels, ds.static_channels), ds.height, ds.width});
    s.target = Tensor<S>::uninit({layout.out_channels(ds.dyn_channels), ds.height, ds.width});
    fill_input_planes(ds, start, layout, s.input.data());
    fill_target_planes(ds, start, layout, s.target.data());
    return s;
}

// Stacks several windows into (B,C,H,W) input/target tensors.
template <typename S>
std::pair<Tensor<S>, Tensor<S>> assemble_batch(const FrameDataset& ds,
                                               const std::vector<std::int64_t>& starts,
                                               const SampleLayout& layout) {
    layout.validate(ds);
    check_dim(!starts.empty(), "assemble_batch needs at least one window");
    const std::int64_t B = static_cast<std::int64_t>(starts.size());
    const std::int64_t cin = layout.in_channels(ds.dyn_channels, ds.static_channels);
    const std::int64_t cout = layout.out_channels(ds.dyn_channels);
    Tensor<S> x = Tensor<S>::uninit({B, cin, ds.height, ds.width});
    Tensor<S> y = Tensor<S>::uninit({B, cout, ds.height, ds.width});
    const std::int64_t hw = ds.plane_size();
    for (std::int64_t b = 0; b < B; ++b) {
        const std::int64_t start = starts[static_cast<std::size_t>(b)];
        check_dim(start >= 0 && start < window_count(ds, layout),
                  "window start " + std::to_string(start) + " out of range");
        fill_input_planes(ds, start, layout, x.data() + b * cin * hw);
        fill_target_planes(ds, start, layout, y.data() + b * cout * hw);
    }
    return {x, y};
}

}  // namespace nowcast
