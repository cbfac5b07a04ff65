#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "nowcast/ops.hpp"
#include "nowcast/rng.hpp"

namespace nowcast {

enum class Variant { Unet, UnetDsc, UnetCbam, SmaatUnet };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::Unet: return "unet";
        case Variant::UnetDsc: return "unet_dsc";
        case Variant::UnetCbam: return "unet_cbam";
        case Variant::SmaatUnet: return "smaat_unet";
    }
    return "?";
}

inline Variant variant_from_name(const std::string& s) {
    if (s == "unet") return Variant::Unet;
    if (s == "unet_dsc") return Variant::UnetDsc;
    if (s == "unet_cbam") return Variant::UnetCbam;
    if (s == "smaat_unet") return Variant::SmaatUnet;
    throw ConfigError("unknown model variant '" + s +
                      "' (expected unet, unet_dsc, unet_cbam or smaat_unet)");
}

// Declarative architecture description. The encoder widths are
// base_width * 2^level; with a bilinear decoder the bottleneck width is
// halved so that decoder double-convs keep the classic channel plan.
struct ModelSpec {
    Variant variant = Variant::SmaatUnet;
    int in_channels = 19;
    int out_channels = 128;
    int base_width = 64;
    int depth = 5;
    int cbam_reduction = 16;
    int spatial_kernel = 7;
    bool bilinear = true;
    // Depthwise channel multiplier inside separable double-convs. The value 2
    // reproduces the published 4.0M/4.1M-parameter DSC variants.
    int dsc_multiplier = 2;

    bool uses_dsc() const { return variant == Variant::UnetDsc || variant == Variant::SmaatUnet; }
    bool uses_cbam() const { return variant == Variant::UnetCbam || variant == Variant::SmaatUnet; }

    std::vector<int> encoder_widths() const {
        std::vector<int> w(static_cast<std::size_t>(depth));
        for (int i = 0; i < depth - 1; ++i) w[static_cast<std::size_t>(i)] = base_width << i;
        const int bottleneck = base_width << (depth - 1);
        w[static_cast<std::size_t>(depth - 1)] = bilinear ? bottleneck / 2 : bottleneck;
        return w;
    }

    void validate() const {
        check_config(in_channels >= 1 && out_channels >= 1, "channel counts must be >= 1");
        check_config(base_width >= 1, "base_width must be >= 1");
        check_config(depth >= 2 && depth <= 8, "depth must be in [2, 8]");
        check_config(dsc_multiplier >= 1, "dsc_multiplier must be >= 1");
        check_config(spatial_kernel % 2 == 1, "spatial_kernel must be odd");
        check_config(bilinear, "only the bilinear decoder is supported");
        if (uses_cbam()) {
            check_config(cbam_reduction >= 1, "cbam_reduction must be >= 1");
            for (int w : encoder_widths())
                check_config(w % cbam_reduction == 0,
                             "cbam_reduction " + std::to_string(cbam_reduction) +
                                 " must divide encoder width " + std::to_string(w));
        }
    }
};

// Named, ordered parameter/buffer registry. Registration order is the
// initialization and serialization order, so it must be stable across runs.
template <typename S>
struct ParamStore {
    std::vector<std::pair<std::string, Tensor<S>>> params;
    std::vector<std::pair<std::string, Tensor<S>>> buffers;
    Rng rng;

    explicit ParamStore(std::uint64_t seed) : rng(seed) {}

    Tensor<S> kaiming_uniform(const std::string& name, const Shape& shape, std::int64_t fan_in) {
        Tensor<S> t = Tensor<S>::uninit(shape);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (std::int64_t i = 0; i < t.numel(); ++i)
            t.values()(i) = static_cast<S>(rng.uniform(-bound, bound));
        t.set_requires_grad(true);
        params.emplace_back(name, t);
        return t;
    }
    Tensor<S> constant_param(const std::string& name, const Shape& shape, S v) {
        Tensor<S> t = Tensor<S>::full(shape, v);
        t.set_requires_grad(true);
        params.emplace_back(name, t);
        return t;
    }
    Tensor<S> buffer(const std::string& name, const Shape& shape, S v) {
        Tensor<S> t = Tensor<S>::full(shape, v);
        buffers.emplace_back(name, t);
        return t;
    }

    std::int64_t param_count() const {
        std::int64_t n = 0;
        for (const auto& [name, t] : params) n += t.numel();
        return n;
    }
};

// ---------------------------------------------------------------------------
// layers
// ---------------------------------------------------------------------------
template <typename S>
struct Conv2dLayer {
    Tensor<S> weight;
    Tensor<S> bias;  // undefined when bias-free
    Conv2dOptions opts;

    Tensor<S> operator()(const Tensor<S>& x) const {
        return bias.defined() ? conv2d(x, weight, bias, opts) : conv2d(x, weight, opts);
    }
};

template <typename S>
Conv2dLayer<S> make_conv(ParamStore<S>& ps, const std::string& prefix, int cin, int cout, int k,
                         int groups, bool with_bias, int padding, int stride = 1) {
    Conv2dLayer<S> l;
    l.opts = {stride, padding, groups};
    const std::int64_t fan_in = static_cast<std::int64_t>(cin / groups) * k * k;
    l.weight = ps.kaiming_uniform(prefix + ".weight", {cout, cin / groups, k, k}, fan_in);
    if (with_bias) l.bias = ps.constant_param(prefix + ".bias", {cout}, S(0));
    return l;
}

template <typename S>
struct LinearLayer {
    Tensor<S> weight, bias;
    Tensor<S> operator()(const Tensor<S>& x) const {
        return bias.defined() ? linear(x, weight, bias) : linear(x, weight);
    }
};

template <typename S>
LinearLayer<S> make_linear(ParamStore<S>& ps, const std::string& prefix, int in, int out,
                           bool with_bias = true) {
    LinearLayer<S> l;
    l.weight = ps.kaiming_uniform(prefix + ".weight", {out, in}, in);
    if (with_bias) l.bias = ps.constant_param(prefix + ".bias", {out}, S(0));
    return l;
}

template <typename S>
struct BatchNorm2d {
    Tensor<S> gamma, beta, running_mean, running_var;
    S eps = S(1e-5);
    S momentum = S(0.1);

    Tensor<S> operator()(const Tensor<S>& x, bool training) {
        return batch_norm(x, gamma, beta, running_mean, running_var, training, eps, momentum);
    }
};

template <typename S>
BatchNorm2d<S> make_batch_norm(ParamStore<S>& ps, const std::string& prefix, int channels) {
    BatchNorm2d<S> bn;
    bn.gamma = ps.constant_param(prefix + ".gamma", {channels}, S(1));
    bn.beta = ps.constant_param(prefix + ".beta", {channels}, S(0));
    bn.running_mean = ps.buffer(prefix + ".running_mean", {channels}, S(0));
    bn.running_var = ps.buffer(prefix + ".running_var", {channels}, S(1));
    return bn;
}

// Depthwise k x k followed by pointwise 1x1; both bias-free here since every
// use sits in front of a batch norm.
template <typename S>
struct SeparableConv2d {
    Conv2dLayer<S> depthwise, pointwise;
    Tensor<S> operator()(const Tensor<S>& x) const { return pointwise(depthwise(x)); }
};

template <typename S>
SeparableConv2d<S> make_separable_conv(ParamStore<S>& ps, const std::string& prefix, int cin,
                                       int cout, int k, int multiplier) {
    SeparableConv2d<S> l;
    l.depthwise = make_conv(ps, prefix + ".dw", cin, cin * multiplier, k, cin, false, k / 2);
    l.pointwise = make_conv(ps, prefix + ".pw", cin * multiplier, cout, 1, 1, false, 0);
    return l;
}

// conv -> batch norm -> relu, twice; spatial size preserved
template <typename S>
struct ConvBlock {
    bool separable = false;
    Conv2dLayer<S> conv1, conv2;
    SeparableConv2d<S> sep1, sep2;
    BatchNorm2d<S> bn1, bn2;

    Tensor<S> operator()(const Tensor<S>& x, bool training) {
        Tensor<S> h = separable ? sep1(x) : conv1(x);
        h = relu(bn1(h, training));
        h = separable ? sep2(h) : conv2(h);
        return relu(bn2(h, training));
    }
};

template <typename S>
ConvBlock<S> make_conv_block(ParamStore<S>& ps, const std::string& prefix, int cin, int mid,
                             int cout, bool separable, int multiplier, int k = 3) {
    ConvBlock<S> b;
    b.separable = separable;
    if (separable) {
        b.sep1 = make_separable_conv(ps, prefix + ".conv1", cin, mid, k, multiplier);
    } else {
        b.conv1 = make_conv(ps, prefix + ".conv1", cin, mid, k, 1, false, k / 2);
    }
    b.bn1 = make_batch_norm(ps, prefix + ".bn1", mid);
    if (separable) {
        b.sep2 = make_separable_conv(ps, prefix + ".conv2", mid, cout, k, multiplier);
    } else {
        b.conv2 = make_conv(ps, prefix + ".conv2", mid, cout, k, 1, false, k / 2);
    }
    b.bn2 = make_batch_norm(ps, prefix + ".bn2", cout);
    return b;
}

// channel attention: sigmoid(mlp(avgpool(F)) + mlp(maxpool(F))) in (0,1)
template <typename S>
struct ChannelAttention {
    LinearLayer<S> fc1, fc2;

    Tensor<S> operator()(const Tensor<S>& f) const {
        const std::int64_t B = f.dim(0), C = f.dim(1);
        auto squeeze = [&](Tensor<S> pooled) {
            Tensor<S> h = reshape(pooled, {B, C});
            return fc2(relu(fc1(h)));
        };
        Tensor<S> a = squeeze(reduce_spatial(f, Reduce::Avg));
        Tensor<S> m = squeeze(reduce_spatial(f, Reduce::Max));
        return reshape(sigmoid(add(a, m)), {B, C, 1, 1});
    }
};

template <typename S>
ChannelAttention<S> make_channel_attention(ParamStore<S>& ps, const std::string& prefix,
                                           int channels, int reduction) {
    check_config(reduction >= 1 && channels % reduction == 0,
                 "channel attention reduction " + std::to_string(reduction) +
                     " must divide channel count " + std::to_string(channels));
    ChannelAttention<S> a;
    a.fc1 = make_linear(ps, prefix + ".fc1", channels, channels / reduction);
    a.fc2 = make_linear(ps, prefix + ".fc2", channels / reduction, channels);
    return a;
}

// spatial attention: sigmoid(conv_kxk(concat(channel_avg, channel_max)))
template <typename S>
struct SpatialAttention {
    Conv2dLayer<S> conv;

    Tensor<S> operator()(const Tensor<S>& f) const {
        Tensor<S> pooled = concat_channels(reduce_channel(f, Reduce::Avg),
                                           reduce_channel(f, Reduce::Max));
        return sigmoid(conv(pooled));
    }
};

template <typename S>
SpatialAttention<S> make_spatial_attention(ParamStore<S>& ps, const std::string& prefix, int k) {
    check_config(k % 2 == 1, "spatial attention kernel must be odd, got " + std::to_string(k));
    SpatialAttention<S> a;
    a.conv = make_conv(ps, prefix + ".conv", 2, 1, k, 1, true, k / 2);
    return a;
}

template <typename S>
struct Cbam {
    ChannelAttention<S> ca;
    SpatialAttention<S> sa;

    Tensor<S> operator()(const Tensor<S>& f) const {
        Tensor<S> gated = mul(f, ca(f));
        return mul(gated, sa(gated));
    }
};

template <typename S>
Cbam<S> make_cbam(ParamStore<S>& ps, const std::string& prefix, int channels, int reduction,
                  int spatial_k) {
    Cbam<S> c;
    c.ca = make_channel_attention(ps, prefix + ".ca", channels, reduction);
    c.sa = make_spatial_attention(ps, prefix + ".sa", spatial_k);
    return c;
}

// ---------------------------------------------------------------------------
// the U-Net family
// ---------------------------------------------------------------------------
template <typename S>
struct Model {
    ModelSpec spec;
    ParamStore<S> store{0};
    ConvBlock<S> inc;
    std::vector<ConvBlock<S>> downs;  // depth-1 blocks after maxpool
    std::vector<Cbam<S>> cbams;       // depth gates, empty unless CBAM variant
    std::vector<ConvBlock<S>> ups;    // depth-1 decoder blocks
    Conv2dLayer<S> outc;

    Tensor<S> forward(const Tensor<S>& x, bool training) {
        detail::check_4d(x.shape(), "model input");
        check_dim(x.dim(1) == spec.in_channels,
                  "model expects " + std::to_string(spec.in_channels) + " input channels, got " +
                      std::to_string(x.dim(1)));
        const std::int64_t div = std::int64_t(1) << (spec.depth - 1);
        check_dim(x.dim(2) % div == 0 && x.dim(3) % div == 0,
                  "input " + x.shape().str() + " must be padded so H and W are divisible by " +
                      std::to_string(div));
        const bool attend = spec.uses_cbam();
        std::vector<Tensor<S>> skips(static_cast<std::size_t>(spec.depth - 1));
        Tensor<S> cur = inc(x, training);
        for (int i = 0; i < spec.depth - 1; ++i) {
            Tensor<S> gated = attend ? cbams[static_cast<std::size_t>(i)](cur) : cur;
            skips[static_cast<std::size_t>(i)] = gated;
            cur = downs[static_cast<std::size_t>(i)](maxpool2(gated), training);
        }
        if (attend) cur = cbams[static_cast<std::size_t>(spec.depth - 1)](cur);
        for (int j = 0; j < spec.depth - 1; ++j) {
            const Tensor<S>& skip = skips[static_cast<std::size_t>(spec.depth - 2 - j)];
            cur = ups[static_cast<std::size_t>(j)](concat_channels(skip, upsample_bilinear2(cur)),
                                                   training);
        }
        return outc(cur);
    }

    std::int64_t param_count() const { return store.param_count(); }

    // aggregated by top-level block name, in registration order
    std::vector<std::pair<std::string, std::int64_t>> layer_param_counts() const {
        std::vector<std::pair<std::string, std::int64_t>> out;
        for (const auto& [name, t] : store.params) {
            const std::string layer = name.substr(0, name.find('.'));
            if (out.empty() || out.back().first != layer) out.emplace_back(layer, 0);
            out.back().second += t.numel();
        }
        return out;
    }

    void zero_grad() {
        for (auto& [name, t] : store.params) t.zero_grad();
    }
};

template <typename S>
Model<S> build_model(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    Model<S> m;
    m.spec = spec;
    m.store = ParamStore<S>(seed);
    const auto widths = spec.encoder_widths();
    const bool dsc = spec.uses_dsc();
    const int mult = spec.dsc_multiplier;

    m.inc = make_conv_block(m.store, "inc", spec.in_channels, widths[0], widths[0], dsc, mult);
    for (int i = 0; i < spec.depth - 1; ++i) {
        const int cin = widths[static_cast<std::size_t>(i)];
        const int cout = widths[static_cast<std::size_t>(i + 1)];
        m.downs.push_back(make_conv_block(m.store, "down" + std::to_string(i + 1), cin, cout, cout,
                                          dsc, mult));
    }
    if (spec.uses_cbam()) {
        for (int i = 0; i < spec.depth; ++i)
            m.cbams.push_back(make_cbam(m.store, "cbam" + std::to_string(i + 1),
                                        widths[static_cast<std::size_t>(i)], spec.cbam_reduction,
                                        spec.spatial_kernel));
    }
    int prev = widths[static_cast<std::size_t>(spec.depth - 1)];
    for (int j = 0; j < spec.depth - 1; ++j) {
        const int skip_idx = spec.depth - 2 - j;
        const int skip = widths[static_cast<std::size_t>(skip_idx)];
        const int cin = prev + skip;
        const int cout = skip_idx > 0 ? widths[static_cast<std::size_t>(skip_idx)] / 2
                                      : spec.base_width;
        m.ups.push_back(make_conv_block(m.store, "up" + std::to_string(j + 1), cin, cin / 2, cout,
                                        dsc, mult));
        prev = cout;
    }
    m.outc = make_conv(m.store, "outc", prev, spec.out_channels, 1, 1, true, 0);
    return m;
}

}  // namespace nowcast
