#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <optional>
#include <vector>

#include "nowcast/graph.hpp"
#include "nowcast/tensor.hpp"
#include "nowcast/threading.hpp"

namespace nowcast {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapRM = Eigen::Map<RowMat<S>>;
template <typename S>
using CMapRM = Eigen::Map<const RowMat<S>>;

struct Conv2dOptions {
    int stride = 1;
    int padding = 0;
    int groups = 1;
};

enum class Reduce { Avg, Max };
enum class Elementwise { Add, Mul };

namespace detail {

inline void check_4d(const Shape& s, const char* what) {
    check_dim(s.ndim() == 4, std::string(what) + " must be 4-D, got " + s.str());
}

// Unrolls (C,H,W) into a row-major (C*k*k, OH*OW) patch matrix.
template <typename S>
void im2col(const S* in, std::int64_t C, std::int64_t H, std::int64_t W, int k, int stride,
            int pad, std::int64_t OH, std::int64_t OW, S* cols) {
    for (std::int64_t c = 0; c < C; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                S* row = cols + ((c * k + ki) * k + kj) * OH * OW;
                for (std::int64_t oh = 0; oh < OH; ++oh) {
                    const std::int64_t ih = oh * stride - pad + ki;
                    S* dst = row + oh * OW;
                    if (ih < 0 || ih >= H) {
                        std::fill(dst, dst + OW, S(0));
                        continue;
                    }
                    const S* src = in + (c * H + ih) * W;
                    if (stride == 1) {
                        const std::int64_t lo = std::max<std::int64_t>(0, pad - kj);
                        const std::int64_t hi = std::min<std::int64_t>(OW, W + pad - kj);
                        if (lo > 0) std::fill(dst, dst + lo, S(0));
                        if (hi > lo) std::memcpy(dst + lo, src + lo - pad + kj,
                                                 static_cast<std::size_t>(hi - lo) * sizeof(S));
                        if (hi < OW) std::fill(dst + std::max<std::int64_t>(hi, lo), dst + OW, S(0));
                    } else {
                        for (std::int64_t ow = 0; ow < OW; ++ow) {
                            const std::int64_t iw = ow * stride - pad + kj;
                            dst[ow] = (iw >= 0 && iw < W) ? src[iw] : S(0);
                        }
                    }
                }
            }
        }
    }
}

// Scatter-adds a patch matrix back onto the (C,H,W) plane; adjoint of im2col.
template <typename S>
void col2im_add(const S* cols, std::int64_t C, std::int64_t H, std::int64_t W, int k, int stride,
                int pad, std::int64_t OH, std::int64_t OW, S* out) {
    for (std::int64_t c = 0; c < C; ++c) {
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const S* row = cols + ((c * k + ki) * k + kj) * OH * OW;
                for (std::int64_t oh = 0; oh < OH; ++oh) {
                    const std::int64_t ih = oh * stride - pad + ki;
                    if (ih < 0 || ih >= H) continue;
                    S* dst = out + (c * H + ih) * W;
                    const S* src = row + oh * OW;
                    for (std::int64_t ow = 0; ow < OW; ++ow) {
                        const std::int64_t iw = ow * stride - pad + kj;
                        if (iw >= 0 && iw < W) dst[iw] += src[ow];
                    }
                }
            }
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d: grouped 2-D convolution, zero padding. groups == Cin gives the
// depthwise case, groups == 1 the dense case.
// ---------------------------------------------------------------------------
template <typename S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& weight, const Tensor<S>* bias,
                 const Conv2dOptions& o = {}) {
    detail::check_4d(input.shape(), "conv2d input");
    detail::check_4d(weight.shape(), "conv2d weight");
    const std::int64_t B = input.dim(0), Cin = input.dim(1), H = input.dim(2), W = input.dim(3);
    const std::int64_t Cout = weight.dim(0);
    const int k = static_cast<int>(weight.dim(2));
    check_dim(weight.dim(2) == weight.dim(3), "conv2d kernel must be square, got " + weight.shape().str());
    check_config(k % 2 == 1, "conv2d kernel extent must be odd, got " + std::to_string(k));
    check_config(o.stride >= 1, "conv2d stride must be >= 1");
    check_config(o.padding >= 0, "conv2d padding must be >= 0");
    check_config(o.groups >= 1 && Cin % o.groups == 0 && Cout % o.groups == 0,
                 "conv2d groups=" + std::to_string(o.groups) + " must divide Cin=" +
                     std::to_string(Cin) + " and Cout=" + std::to_string(Cout));
    const std::int64_t CinG = Cin / o.groups, CoutG = Cout / o.groups;
    check_dim(weight.dim(1) == CinG, "conv2d weight axis 1 is " + std::to_string(weight.dim(1)) +
                                         ", expected Cin/groups = " + std::to_string(CinG));
    if (bias) {
        check_dim(bias->ndim() == 1 && bias->dim(0) == Cout,
                  "conv2d bias axis 0 is " + bias->shape().str() + ", expected (" +
                      std::to_string(Cout) + ")");
    }
    const std::int64_t OH = (H + 2 * o.padding - k) / o.stride + 1;
    const std::int64_t OW = (W + 2 * o.padding - k) / o.stride + 1;
    check_dim(H + 2 * o.padding >= k && W + 2 * o.padding >= k && OH >= 1 && OW >= 1,
              "conv2d spatial axes " + input.shape().str() + " too small for kernel " +
                  std::to_string(k) + " with padding " + std::to_string(o.padding));

    Tensor<S> out = Tensor<S>::uninit({B, Cout, OH, OW});
    const std::int64_t ohw = OH * OW;
    const std::int64_t col_rows = Cin * k * k;
    const bool pointwise = (k == 1 && o.stride == 1 && o.padding == 0);

    const S* x = input.data();
    const S* w = weight.data();
    S* y = out.data();

    parallel_for(B, [&](std::int64_t b) {
        std::vector<S> colbuf;
        const S* cols = x + b * Cin * H * W;
        if (!pointwise) {
            colbuf.resize(static_cast<std::size_t>(col_rows * ohw));
            detail::im2col(x + b * Cin * H * W, Cin, H, W, k, o.stride, o.padding, OH, OW,
                           colbuf.data());
            cols = colbuf.data();
        }
        for (int g = 0; g < o.groups; ++g) {
            CMapRM<S> wg(w + g * CoutG * CinG * k * k, CoutG, CinG * k * k);
            CMapRM<S> cg(cols + g * CinG * k * k * ohw, CinG * k * k, ohw);
            MapRM<S> yg(y + (b * Cout + g * CoutG) * ohw, CoutG, ohw);
            yg.noalias() = wg * cg;
        }
        if (bias) {
            const S* bv = bias->data();
            for (std::int64_t c = 0; c < Cout; ++c) {
                Eigen::Map<ArrayX<S>> row(y + (b * Cout + c) * ohw, ohw);
                row += bv[c];
            }
        }
    });

    auto xs = input.storage();
    auto ws = weight.storage();
    auto bs = bias ? bias->storage() : nullptr;
    auto ys = out.storage();
    detail::record_op(out, {&input, &weight, bias}, [xs, ws, bs, ys, o, B, Cin, Cout, CinG, CoutG, H,
                                                     W, k, OH, OW, ohw, col_rows, pointwise] {
        if (!ys->has_grad()) return;
        const S* dy = ys->grad.data();
        const S* w = ws->values.data();
        const S* x = xs->values.data();
        const std::int64_t wsize = Cout * CinG * k * k;
        const bool need_dx = xs->requires_grad;
        const bool need_dw = ws->requires_grad;
        const bool need_db = bs && bs->requires_grad;

        if (need_db) {
            bs->ensure_grad();
            S* db = bs->grad.data();
            for (std::int64_t b = 0; b < B; ++b)
                for (std::int64_t c = 0; c < Cout; ++c) {
                    Eigen::Map<const ArrayX<S>> row(dy + (b * Cout + c) * ohw, ohw);
                    db[c] += row.sum();
                }
        }
        if (!need_dx && !need_dw) return;

        std::vector<S> dw_slabs;
        if (need_dw) dw_slabs.assign(static_cast<std::size_t>(B * wsize), S(0));
        if (need_dx) xs->ensure_grad();
        S* dx = need_dx ? xs->grad.data() : nullptr;

        parallel_for(B, [&](std::int64_t b) {
            std::vector<S> colbuf;
            if (need_dw) {
                const S* cols = x + b * Cin * H * W;
                if (!pointwise) {
                    colbuf.resize(static_cast<std::size_t>(col_rows * ohw));
                    detail::im2col(x + b * Cin * H * W, Cin, H, W, k, o.stride, o.padding, OH, OW,
                                   colbuf.data());
                    cols = colbuf.data();
                }
                for (int g = 0; g < o.groups; ++g) {
                    CMapRM<S> dyg(dy + (b * Cout + g * CoutG) * ohw, CoutG, ohw);
                    CMapRM<S> cg(cols + g * CinG * k * k * ohw, CinG * k * k, ohw);
                    MapRM<S> dwg(dw_slabs.data() + b * wsize + g * CoutG * CinG * k * k, CoutG,
                                 CinG * k * k);
                    dwg.noalias() = dyg * cg.transpose();
                }
            }
            if (need_dx) {
                std::vector<S> dcols(static_cast<std::size_t>(col_rows * ohw));
                for (int g = 0; g < o.groups; ++g) {
                    CMapRM<S> wg(w + g * CoutG * CinG * k * k, CoutG, CinG * k * k);
                    CMapRM<S> dyg(dy + (b * Cout + g * CoutG) * ohw, CoutG, ohw);
                    MapRM<S> dcg(dcols.data() + g * CinG * k * k * ohw, CinG * k * k, ohw);
                    dcg.noalias() = wg.transpose() * dyg;
                }
                if (pointwise) {
                    Eigen::Map<ArrayX<S>> dxb(dx + b * Cin * H * W, Cin * H * W);
                    Eigen::Map<const ArrayX<S>> dcb(dcols.data(), Cin * H * W);
                    dxb += dcb;
                } else {
                    detail::col2im_add(dcols.data(), Cin, H, W, k, o.stride, o.padding, OH, OW,
                                       dx + b * Cin * H * W);
                }
            }
        });

        if (need_dw) {
            ws->ensure_grad();
            Eigen::Map<ArrayX<S>> dw(ws->grad.data(), wsize);
            for (std::int64_t b = 0; b < B; ++b) {
                Eigen::Map<const ArrayX<S>> slab(dw_slabs.data() + b * wsize, wsize);
                dw += slab;  // batch order, independent of thread count
            }
        }
    });
    return out;
}

template <typename S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& weight, const Conv2dOptions& o = {}) {
    return conv2d(input, weight, static_cast<const Tensor<S>*>(nullptr), o);
}
template <typename S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& weight, const Tensor<S>& bias,
                 const Conv2dOptions& o = {}) {
    return conv2d(input, weight, &bias, o);
}

// ---------------------------------------------------------------------------
// maxpool2: 2x2 window, stride 2. Gradient routes to the first maximal
// element in scan order.
// ---------------------------------------------------------------------------
template <typename S>
Tensor<S> maxpool2(const Tensor<S>& input) {
    detail::check_4d(input.shape(), "maxpool2 input");
    const std::int64_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    check_dim(H % 2 == 0 && W % 2 == 0,
              "maxpool2 requires even spatial axes, got " + input.shape().str());
    const std::int64_t OH = H / 2, OW = W / 2;
    Tensor<S> out = Tensor<S>::uninit({B, C, OH, OW});

    std::vector<std::int64_t> argmax(static_cast<std::size_t>(out.numel()));
    const S* x = input.data();
    S* y = out.data();
    for (std::int64_t p = 0; p < B * C; ++p) {
        const S* plane = x + p * H * W;
        for (std::int64_t oh = 0; oh < OH; ++oh)
            for (std::int64_t ow = 0; ow < OW; ++ow) {
                std::int64_t best = (2 * oh) * W + 2 * ow;
                S v = plane[best];
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const std::int64_t i = (2 * oh + dy) * W + (2 * ow + dx);
                        if (plane[i] > v) {
                            v = plane[i];
                            best = i;
                        }
                    }
                const std::int64_t oi = p * OH * OW + oh * OW + ow;
                y[oi] = v;
                argmax[static_cast<std::size_t>(oi)] = p * H * W + best;
            }
    }

    auto xs = input.storage();
    auto ys = out.storage();
    detail::record_op(out, {&input}, [xs, ys, argmax = std::move(argmax)] {
        if (!ys->has_grad() || !xs->requires_grad) return;
        xs->ensure_grad();
        for (std::size_t i = 0; i < argmax.size(); ++i)
            xs->grad(argmax[i]) += ys->grad(static_cast<std::int64_t>(i));
    });
    return out;
}

// ---------------------------------------------------------------------------
// upsample_bilinear2: doubles H and W, align_corners=false convention.
// ---------------------------------------------------------------------------
namespace detail {
struct LerpAxis {
    std::int64_t i0, i1;
    double w1;  // weight of i1; i0 gets 1-w1
};
inline LerpAxis lerp_axis(std::int64_t o, std::int64_t n_in) {
    const double src = std::max(0.0, (static_cast<double>(o) + 0.5) / 2.0 - 0.5);
    std::int64_t i0 = static_cast<std::int64_t>(src);
    if (i0 > n_in - 1) i0 = n_in - 1;
    const std::int64_t i1 = (i0 < n_in - 1) ? i0 + 1 : i0;
    return {i0, i1, src - static_cast<double>(i0)};
}
}  // namespace detail

template <typename S>
Tensor<S> upsample_bilinear2(const Tensor<S>& input) {
    detail::check_4d(input.shape(), "upsample_bilinear2 input");
    const std::int64_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const std::int64_t OH = 2 * H, OW = 2 * W;
    Tensor<S> out = Tensor<S>::uninit({B, C, OH, OW});

    const S* x = input.data();
    S* y = out.data();
    parallel_for(B * C, [&](std::int64_t p) {
        const S* in = x + p * H * W;
        S* o = y + p * OH * OW;
        for (std::int64_t oh = 0; oh < OH; ++oh) {
            const auto ay = detail::lerp_axis(oh, H);
            for (std::int64_t ow = 0; ow < OW; ++ow) {
                const auto ax = detail::lerp_axis(ow, W);
                const double v = (1.0 - ay.w1) * ((1.0 - ax.w1) * in[ay.i0 * W + ax.i0] +
                                                  ax.w1 * in[ay.i0 * W + ax.i1]) +
                                 ay.w1 * ((1.0 - ax.w1) * in[ay.i1 * W + ax.i0] +
                                          ax.w1 * in[ay.i1 * W + ax.i1]);
                o[oh * OW + ow] = static_cast<S>(v);
            }
        }
    });

    auto xs = input.storage();
    auto ys = out.storage();
    detail::record_op(out, {&input}, [xs, ys, B, C, H, W, OH, OW] {
        if (!ys->has_grad() || !xs->requires_grad) return;
        xs->ensure_grad();
        const S* dy = ys->grad.data();
        S* dx = xs->grad.data();
        parallel_for(B * C, [&](std::int64_t p) {
            const S* dyo = dy + p * OH * OW;
            S* dxi = dx + p * H * W;
            for (std::int64_t oh = 0; oh < OH; ++oh) {
                const auto ay = detail::lerp_axis(oh, H);
                for (std::int64_t ow = 0; ow < OW; ++ow) {
                    const auto ax = detail::lerp_axis(ow, W);
                    const double g = dyo[oh * OW + ow];
                    dxi[ay.i0 * W + ax.i0] += static_cast<S>((1.0 - ay.w1) * (1.0 - ax.w1) * g);
                    dxi[ay.i0 * W + ax.i1] += static_cast<S>((1.0 - ay.w1) * ax.w1 * g);
                    dxi[ay.i1 * W + ax.i0] += static_cast<S>(ay.w1 * (1.0 - ax.w1) * g);
                    dxi[ay.i1 * W + ax.i1] += static_cast<S>(ay.w1 * ax.w1 * g);
                }
            }
        });
    });
    return out;
}

// ---------------------------------------------------------------------------
// batch_norm: per-channel normalization. Training mode uses batch statistics
// (biased variance) and updates running stats in place (unbiased variance,
// PyTorch convention); inference mode reads the running stats.
// ---------------------------------------------------------------------------
template <typename S>
Tensor<S> batch_norm(const Tensor<S>& input, const Tensor<S>& gamma, const Tensor<S>& beta,
                     Tensor<S>& running_mean, Tensor<S>& running_var, bool training,
                     S eps = S(1e-5), S momentum = S(0.1)) {
    detail::check_4d(input.shape(), "batch_norm input");
    check_config(eps > S(0), "batch_norm eps must be > 0");
    const std::int64_t B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    check_dim(gamma.ndim() == 1 && gamma.dim(0) == C, "batch_norm gamma axis 0 must equal C");
    check_dim(beta.ndim() == 1 && beta.dim(0) == C, "batch_norm beta axis 0 must equal C");
    const std::int64_t N = B * H * W;
    if (training && N < 2)
        throw DimensionError("batch_norm degenerate statistics: " + std::to_string(N) +
                             " value(s) per channel in training mode");

    ArrayX<S> mean(C), invstd(C);
    const std::int64_t HW = H * W;
    const S* x = input.data();
    if (training) {
        for (std::int64_t c = 0; c < C; ++c) {
            S sum = 0, sq = 0;
            for (std::int64_t b = 0; b < B; ++b) {
                Eigen::Map<const ArrayX<S>> blk(x + (b * C + c) * HW, HW);
                sum += blk.sum();
                sq += (blk * blk).sum();
            }
            const S m = sum / static_cast<S>(N);
            S var = sq / static_cast<S>(N) - m * m;
            if (var < S(0)) var = S(0);
            mean(c) = m;
            invstd(c) = S(1) / std::sqrt(var + eps);
            const S unbiased = N > 1 ? var * static_cast<S>(N) / static_cast<S>(N - 1) : var;
            running_mean.values()(c) = (S(1) - momentum) * running_mean.values()(c) + momentum * m;
            running_var.values()(c) = (S(1) - momentum) * running_var.values()(c) + momentum * unbiased;
        }
    } else {
        for (std::int64_t c = 0; c < C; ++c) {
            mean(c) = running_mean.values()(c);
            invstd(c) = S(1) / std::sqrt(running_var.values()(c) + eps);
        }
    }

    Tensor<S> out = Tensor<S>::uninit(input.shape());
    S* y = out.data();
    const S* gv = gamma.data();
    const S* bv = beta.data();
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t c = 0; c < C; ++c) {
            Eigen::Map<const ArrayX<S>> in(x + (b * C + c) * HW, HW);
            Eigen::Map<ArrayX<S>> o(y + (b * C + c) * HW, HW);
            o = (in - mean(c)) * invstd(c) * gv[c] + bv[c];
        }

    auto xs = input.storage();
    auto gs = gamma.storage();
    auto bs = beta.storage();
    auto ys = out.storage();
    detail::record_op(out, {&input, &gamma, &beta},
                      [xs, gs, bs, ys, mean = std::move(mean), invstd = std::move(invstd), training,
                       B, C, HW, N] {
        if (!ys->has_grad()) return;
        const S* dy = ys->grad.data();
        const S* x = xs->values.data();
        const S* gv = gs->values.data();
        // per-channel sums of dy and dy*xhat, shared by all three grads
        ArrayX<S> sum_dy = ArrayX<S>::Zero(C), sum_dyx = ArrayX<S>::Zero(C);
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t c = 0; c < C; ++c) {
                Eigen::Map<const ArrayX<S>> d(dy + (b * C + c) * HW, HW);
                Eigen::Map<const ArrayX<S>> in(x + (b * C + c) * HW, HW);
                sum_dy(c) += d.sum();
                sum_dyx(c) += (d * (in - mean(c)) * invstd(c)).sum();
            }
        if (gs->requires_grad) {
            gs->ensure_grad();
            gs->grad += sum_dyx;
        }
        if (bs->requires_grad) {
            bs->ensure_grad();
            bs->grad += sum_dy;
        }
        if (xs->requires_grad) {
            xs->ensure_grad();
            S* dx = xs->grad.data();
            for (std::int64_t b = 0; b < B; ++b)
                for (std::int64_t c = 0; c < C; ++c) {
                    Eigen::Map<const ArrayX<S>> d(dy + (b * C + c) * HW, HW);
                    Eigen::Map<const ArrayX<S>> in(x + (b * C + c) * HW, HW);
                    Eigen::Map<ArrayX<S>> o(dx + (b * C + c) * HW, HW);
                    if (training) {
                        const S n = static_cast<S>(N);
                        o += gv[c] * invstd(c) *
                             (d - sum_dy(c) / n -
                              (in - mean(c)) * invstd(c) * (sum_dyx(c) / n));
                    } else {
                        o += d * gv[c] * invstd(c);
                    }
                }
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// activations
// ---------------------------------------------------------------------------
template <typename S>
Tensor<S> relu(const Tensor<S>& x) {
    Tensor<S> out = Tensor<S>::uninit(x.shape());
    out.values() = x.values().max(S(0));
    auto xs = x.storage();
    auto ys = out.storage();
    detail::record_op(out, {&x}, [xs, ys] {
        if (!ys->has_grad() || !xs->requires_grad) return;
        xs->ensure_grad();
        // derivative at exactly 0 is 0
        xs->grad += ys->grad * (xs->values > S(0)).template cast<S>();
    });
    return out;
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& x) {
    Tensor<S> out = Tensor<S>::uninit(x.shape());
    const S* in = x.data();
    S* y = out.data();
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) {
        const S v = in[i];
        if (v >= S(0)) {
            y[i] = S(1) / (S(1) + std::exp(-v));
        } else {
            const S e = std::exp(v);  // stable branch for large |v|
            y[i] = e / (S(1) + e);
        }
    }
    auto xs = x.storage();
    auto ys = out.storage();
    detail::record_op(out, {&x}, [xs, ys] {
        if (!ys->has_grad() || !xs->requires_grad) return;
        xs->ensure_grad();
        xs->grad += ys->grad * ys->values * (S(1) - ys->values);
    });
    return out;
}

// ---------------------------------------------------------------------------
// reductions: reduce_spatial pools H,W down to 1x1; reduce_channel pools C
// down to 1. Max variants route gradient to the first maximal element.
// ---------------------------------------------------------------------------
template <typename S>
Tensor<S> reduce_spatial(const Tensor<S>& x, Reduce kind) {
    detail::check_4d(x.shape(), "reduce_spatial input");
    const std::int64_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    check_dim(HW >= 1, "reduce_spatial needs at least one pixel");
    Tensor<S> out = Tensor<S>::uninit({B, C, 1, 1});
    std::vector<std::int64_t> argmax;
    const S* in = x.data();
    S* y = out.data();
    if (kind == Reduce::Avg) {
        for (std::int64_t p = 0; p < B * C; ++p) {
            Eigen::Map<const ArrayX<S>> blk(in + p * HW, HW);
            y[p] = blk.sum() / static_cast<S>(HW);
        }
    } else {
        argmax.resize(static_cast<std::size_t>(B * C));
        for (std::int64_t p = 0; p < B * C; ++p) {
            const S* blk = in + p * HW;
            std::int64_t best = 0;
            for (std::int64_t i = 1; i < HW; ++i)
                if (blk[i] > blk[best]) best = i;
            y[p] = blk[best];
            argmax[static_cast<std::size_t>(p)] = p * HW + best;
        }
    }
    auto xs = x.storage();
    auto ys = out.storage();
    detail::record_op(out, {&x}, [xs, ys, kind, HW, argmax = std::move(argmax)] {
        if (!ys->has_grad() || !xs->requires_grad) return;
        xs->ensure_grad();
        const std::int64_t planes = ys->grad.size();
        if (kind == Reduce::Avg) {
            for (std::int64_t p = 0; p < planes; ++p) {
                Eigen::Map<ArrayX<S>> blk(xs->grad.data() + p * HW, HW);
                blk += ys->grad(p) / static_cast<S>(HW);
            }
        } else {
            for (std::int64_t p = 0; p < planes; ++p)
                xs->grad(argmax[static_cast<std::size_t>(p)]) += ys->grad(p);
        }
    });
    return out;
}

template <typename S>
Tensor<S> reduce_channel(const Tensor<S>& x, Reduce kind) {
    detail::check_4d(x.shape(), "reduce_channel input");
    const std::int64_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    check_dim(C >= 1, "reduce_channel needs at least one channel");
    Tensor<S> out = Tensor<S>::uninit({B, 1, x.dim(2), x.dim(3)});
    std::vector<std::int32_t> argmax;  // channel per (b, pixel)
    const S* in = x.data();
    S* y = out.data();
    if (kind == Reduce::Avg) {
        for (std::int64_t b = 0; b < B; ++b) {
            Eigen::Map<ArrayX<S>> acc(y + b * HW, HW);
            acc.setZero();
            for (std::int64_t c = 0; c < C; ++c) {
                Eigen::Map<const ArrayX<S>> blk(in + (b * C + c) * HW, HW);
                acc += blk;
            }
            acc /= static_cast<S>(C);
        }
    } else {
        argmax.assign(static_cast<std::size_t>(B * HW), 0);
        for (std::int64_t b = 0; b < B; ++b) {
            S* acc = y + b * HW;
            std::memcpy(acc, in + b * C * HW, static_cast<std::size_t>(HW) * sizeof(S));
            for (std::int64_t c = 1; c < C; ++c) {
                const S* blk = in + (b * C + c) * HW;
                for (std::int64_t i = 0; i < HW; ++i)
                    if (blk[i] > acc[i]) {
                        acc[i] = blk[i];
                        argmax[static_cast<std::size_t>(b * HW + i)] = static_cast<std::int32_t>(c);
                    }
            }
        }
    }
    auto xs = x.storage();
    auto ys = out.storage();
    detail::record_op(out, {&x}, [xs, ys, kind, B, C, HW, argmax = std::move(argmax)] {
        if (!ys->has_grad() || !xs->requires_grad) return;
        xs->ensure_grad();
        if (kind == Reduce::Avg) {
            for (std::int64_t b = 0; b < B; ++b) {
                Eigen::Map<const ArrayX<S>> d(ys->grad.data() + b * HW, HW);
                for (std::int64_t c = 0; c < C; ++c) {
                    Eigen::Map<ArrayX<S>> blk(xs->grad.data() + (b * C + c) * HW, HW);
                    blk += d / static_cast<S>(C);
                }
            }
        } else {
            for (std::int64_t b = 0; b < B; ++b)
                for (std::int64_t i = 0; i < HW; ++i) {
                    const std::int64_t c = argmax[static_cast<std::size_t>(b * HW + i)];
                    xs->grad((b * C + c) * HW + i) += ys->grad(b * HW + i);
                }
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// linear: y = x W^T + b with x (B,N), W (M,N), b (M)
// ---------------------------------------------------------------------------
template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& weight, const Tensor<S>* bias) {
    check_dim(x.ndim() == 2, "linear input must be 2-D, got " + x.shape().str());
    check_dim(weight.ndim() == 2, "linear weight must be 2-D, got " + weight.shape().str());
    const std::int64_t B = x.dim(0), N = x.dim(1), M = weight.dim(0);
    check_dim(weight.dim(1) == N, "linear inner axes disagree: input " + x.shape().str() +
                                      " vs weight " + weight.shape().str());
    if (bias)
        check_dim(bias->ndim() == 1 && bias->dim(0) == M, "linear bias must be (" +
                                                              std::to_string(M) + ")");
    Tensor<S> out = Tensor<S>::uninit({B, M});
    CMapRM<S> xm(x.data(), B, N);
    CMapRM<S> wm(weight.data(), M, N);
    MapRM<S> ym(out.data(), B, M);
    ym.noalias() = xm * wm.transpose();
    if (bias) {
        Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> bv(bias->data(), M);
        ym.rowwise() += bv.transpose();
    }

    auto xs = x.storage();
    auto ws = weight.storage();
    auto bs = bias ? bias->storage() : nullptr;
    auto ys = out.storage();
    detail::record_op(out, {&x, &weight, bias}, [xs, ws, bs, ys, B, N, M] {
        if (!ys->has_grad()) return;
        CMapRM<S> dy(ys->grad.data(), B, M);
        if (xs->requires_grad) {
            xs->ensure_grad();
            MapRM<S> dx(xs->grad.data(), B, N);
            CMapRM<S> wm(ws->values.data(), M, N);
            dx.noalias() += dy * wm;
        }
        if (ws->requires_grad) {
            ws->ensure_grad();
            MapRM<S> dw(ws->grad.data(), M, N);
            CMapRM<S> xm(xs->values.data(), B, N);
            dw.noalias() += dy.transpose() * xm;
        }
        if (bs && bs->requires_grad) {
            bs->ensure_grad();
            Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>> db(bs->grad.data(), M);
            db.noalias() += dy.colwise().sum().transpose();
        }
    });
    return out;
}

template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& weight) {
    return linear(x, weight, static_cast<const Tensor<S>*>(nullptr));
}
template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& weight, const Tensor<S>& bias) {
    return linear(x, weight, &bias);
}

// ---------------------------------------------------------------------------
// concat_channels: a fills channels [0,Ca), b fills [Ca,Ca+Cb)
// ---------------------------------------------------------------------------
template <typename S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check_4d(a.shape(), "concat_channels a");
    detail::check_4d(b.shape(), "concat_channels b");
    check_dim(a.dim(0) == b.dim(0), "concat_channels batch axes differ: " + a.shape().str() +
                                        " vs " + b.shape().str());
    check_dim(a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
              "concat_channels spatial axes differ: " + a.shape().str() + " vs " + b.shape().str());
    const std::int64_t B = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), HW = a.dim(2) * a.dim(3);
    Tensor<S> out = Tensor<S>::uninit({B, Ca + Cb, a.dim(2), a.dim(3)});
    S* y = out.data();
    for (std::int64_t i = 0; i < B; ++i) {
        if (Ca > 0)
            std::memcpy(y + i * (Ca + Cb) * HW, a.data() + i * Ca * HW,
                        static_cast<std::size_t>(Ca * HW) * sizeof(S));
        if (Cb > 0)
            std::memcpy(y + (i * (Ca + Cb) + Ca) * HW, b.data() + i * Cb * HW,
                        static_cast<std::size_t>(Cb * HW) * sizeof(S));
    }
    auto as = a.storage();
    auto bs = b.storage();
    auto ys = out.storage();
    detail::record_op(out, {&a, &b}, [as, bs, ys, B, Ca, Cb, HW] {
        if (!ys->has_grad()) return;
        const S* dy = ys->grad.data();
        if (as->requires_grad && Ca > 0) {
            as->ensure_grad();
            for (std::int64_t i = 0; i < B; ++i) {
                Eigen::Map<ArrayX<S>> da(as->grad.data() + i * Ca * HW, Ca * HW);
                Eigen::Map<const ArrayX<S>> d(dy + i * (Ca + Cb) * HW, Ca * HW);
                da += d;
            }
        }
        if (bs->requires_grad && Cb > 0) {
            bs->ensure_grad();
            for (std::int64_t i = 0; i < B; ++i) {
                Eigen::Map<ArrayX<S>> db(bs->grad.data() + i * Cb * HW, Cb * HW);
                Eigen::Map<const ArrayX<S>> d(dy + (i * (Ca + Cb) + Ca) * HW, Cb * HW);
                db += d;
            }
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// elementwise add/mul; b may broadcast to a by singleton expansion.
// Gradients of a broadcast operand are summed over the expanded axes.
// ---------------------------------------------------------------------------
namespace detail {

struct BroadcastPlan {
    std::array<std::int64_t, 4> out_dims{1, 1, 1, 1};
    std::array<std::int64_t, 4> b_strides{0, 0, 0, 0};
    bool same_shape = false;
};

inline BroadcastPlan broadcast_plan(const Shape& a, const Shape& b) {
    check_dim(a.ndim() == b.ndim(),
              "elementwise operands must have equal rank: " + a.str() + " vs " + b.str());
    BroadcastPlan plan;
    plan.same_shape = (a == b);
    const int nd = a.ndim();
    const int off = 4 - nd;
    std::array<std::int64_t, 4> bdims{1, 1, 1, 1};
    for (int i = 0; i < nd; ++i) {
        plan.out_dims[static_cast<std::size_t>(off + i)] = a[i];
        bdims[static_cast<std::size_t>(off + i)] = b[i];
        check_dim(b[i] == a[i] || b[i] == 1,
                  "operand " + b.str() + " does not broadcast to " + a.str());
    }
    std::int64_t stride = 1;
    for (int i = 3; i >= 0; --i) {
        plan.b_strides[static_cast<std::size_t>(i)] =
            bdims[static_cast<std::size_t>(i)] == 1 ? 0 : stride;
        stride *= bdims[static_cast<std::size_t>(i)];
    }
    return plan;
}

}  // namespace detail

template <typename S>
Tensor<S> elementwise(const Tensor<S>& a, const Tensor<S>& b, Elementwise kind) {
    const auto plan = detail::broadcast_plan(a.shape(), b.shape());
    Tensor<S> out = Tensor<S>::uninit(a.shape());
    const auto& d = plan.out_dims;
    const auto& sb = plan.b_strides;
    const S* av = a.data();
    const S* bv = b.data();
    S* y = out.data();

    if (plan.same_shape) {
        if (kind == Elementwise::Add)
            out.values() = a.values() + b.values();
        else
            out.values() = a.values() * b.values();
    } else {
        std::int64_t i = 0;
        for (std::int64_t i0 = 0; i0 < d[0]; ++i0)
            for (std::int64_t i1 = 0; i1 < d[1]; ++i1)
                for (std::int64_t i2 = 0; i2 < d[2]; ++i2) {
                    const std::int64_t base = i0 * sb[0] + i1 * sb[1] + i2 * sb[2];
                    for (std::int64_t i3 = 0; i3 < d[3]; ++i3, ++i) {
                        const S rhs = bv[base + i3 * sb[3]];
                        y[i] = kind == Elementwise::Add ? av[i] + rhs : av[i] * rhs;
                    }
                }
    }

    auto as = a.storage();
    auto bs = b.storage();
    auto ys = out.storage();
    detail::record_op(out, {&a, &b}, [as, bs, ys, kind, plan] {
        if (!ys->has_grad()) return;
        const auto& d = plan.out_dims;
        const auto& sb = plan.b_strides;
        const S* dy = ys->grad.data();
        if (as->requires_grad) {
            as->ensure_grad();
            if (kind == Elementwise::Add) {
                as->grad += ys->grad;
            } else if (plan.same_shape) {
                as->grad += ys->grad * bs->values;
            } else {
                S* da = as->grad.data();
                const S* bv = bs->values.data();
                std::int64_t i = 0;
                for (std::int64_t i0 = 0; i0 < d[0]; ++i0)
                    for (std::int64_t i1 = 0; i1 < d[1]; ++i1)
                        for (std::int64_t i2 = 0; i2 < d[2]; ++i2) {
                            const std::int64_t base = i0 * sb[0] + i1 * sb[1] + i2 * sb[2];
                            for (std::int64_t i3 = 0; i3 < d[3]; ++i3, ++i)
                                da[i] += dy[i] * bv[base + i3 * sb[3]];
                        }
            }
        }
        if (bs->requires_grad) {
            bs->ensure_grad();
            if (plan.same_shape) {
                if (kind == Elementwise::Add)
                    bs->grad += ys->grad;
                else
                    bs->grad += ys->grad * as->values;
            } else {
                S* db = bs->grad.data();
                const S* av = as->values.data();
                std::int64_t i = 0;
                for (std::int64_t i0 = 0; i0 < d[0]; ++i0)
                    for (std::int64_t i1 = 0; i1 < d[1]; ++i1)
                        for (std::int64_t i2 = 0; i2 < d[2]; ++i2) {
                            const std::int64_t base = i0 * sb[0] + i1 * sb[1] + i2 * sb[2];
                            for (std::int64_t i3 = 0; i3 < d[3]; ++i3, ++i) {
                                const S g = kind == Elementwise::Add ? dy[i] : dy[i] * av[i];
                                db[base + i3 * sb[3]] += g;
                            }
                        }
            }
        }
    });
    return out;
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    return elementwise(a, b, Elementwise::Add);
}
template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
    return elementwise(a, b, Elementwise::Mul);
}

// ---------------------------------------------------------------------------
// losses and scalar reductions
// ---------------------------------------------------------------------------
template <typename S>
Tensor<S> mse_loss(const Tensor<S>& pred, const Tensor<S>& target) {
    check_dim(pred.shape() == target.shape(), "mse_loss shapes differ: " + pred.shape().str() +
                                                  " vs " + target.shape().str());
    const std::int64_t n = pred.numel();
    check_dim(n > 0, "mse_loss on empty tensor");
    Tensor<S> out = Tensor<S>::uninit({1});
    out.values()(0) = (pred.values() - target.values()).square().sum() / static_cast<S>(n);

    auto ps = pred.storage();
    auto ts = target.storage();
    auto ys = out.storage();
    detail::record_op(out, {&pred, &target}, [ps, ts, ys, n] {
        if (!ys->has_grad()) return;
        const S g = ys->grad(0) * S(2) / static_cast<S>(n);
        if (ps->requires_grad) {
            ps->ensure_grad();
            ps->grad += g * (ps->values - ts->values);
        }
        if (ts->requires_grad) {
            ts->ensure_grad();
            ts->grad -= g * (ps->values - ts->values);
        }
    });
    return out;
}

template <typename S>
Tensor<S> sum(const Tensor<S>& x) {
    Tensor<S> out = Tensor<S>::uninit({1});
    out.values()(0) = x.values().sum();
    auto xs = x.storage();
    auto ys = out.storage();
    detail::record_op(out, {&x}, [xs, ys] {
        if (!ys->has_grad() || !xs->requires_grad) return;
        xs->ensure_grad();
        xs->grad += ys->grad(0);
    });
    return out;
}

// ---------------------------------------------------------------------------
// reshape: same element count, new extents (copying view)
// ---------------------------------------------------------------------------
template <typename S>
Tensor<S> reshape(const Tensor<S>& x, const Shape& shape) {
    check_dim(shape.numel() == x.numel(), "reshape " + x.shape().str() + " -> " + shape.str() +
                                              " changes element count");
    Tensor<S> out = Tensor<S>::uninit(shape);
    out.values() = x.values();
    auto xs = x.storage();
    auto ys = out.storage();
    detail::record_op(out, {&x}, [xs, ys] {
        if (!ys->has_grad() || !xs->requires_grad) return;
        xs->ensure_grad();
        xs->grad += ys->grad;
    });
    return out;
}

}  // namespace nowcast
