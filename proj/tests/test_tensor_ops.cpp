#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nowcast/ops.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace nowcast;
using namespace nowcast::testing;

TEST_CASE("conv2d identity kernel") {
    auto x = TensorF::full({1, 1, 3, 3}, 2.0f);
    auto w = TensorF::from({1, 1, 1, 1}, {1.0f});
    auto y = conv2d(x, w);
    CHECK(y.shape() == Shape{1, 1, 3, 3});
    for (std::int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(2.0f));
}

TEST_CASE("conv2d full-window sum") {
    auto x = TensorF::from({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    auto w = TensorF::full({1, 1, 3, 3}, 1.0f);
    auto y = conv2d(x, w);
    CHECK(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y[0] == doctest::Approx(45.0f));
}

TEST_CASE("conv2d depthwise matches nested-loop oracle") {
    Rng rng(7);
    auto x = random_tensor<float>(rng, {1, 2, 4, 4});
    auto w = random_tensor<float>(rng, {2, 1, 3, 3});
    Conv2dOptions o;
    o.padding = 1;
    o.groups = 2;
    auto y = conv2d(x, w, o);
    std::vector<float> xv(x.data(), x.data() + x.numel());
    std::vector<float> wv(w.data(), w.data() + w.numel());
    auto ref = conv2d_ref<float>(xv, 1, 2, 4, 4, wv, 2, 3, 1, 1, 2, nullptr);
    CHECK(max_abs_diff(y, ref) < 1e-6);
}

TEST_CASE("conv2d matches oracle across strides, padding, groups, bias") {
    Rng rng(99);
    const struct {
        std::int64_t B, Cin, Cout;
        int k, stride, pad, groups;
        bool bias;
    } cases[] = {
        {2, 3, 4, 3, 1, 1, 1, true},  {1, 4, 4, 3, 2, 1, 4, false}, {2, 4, 6, 5, 1, 2, 2, true},
        {1, 1, 3, 1, 1, 0, 1, false}, {2, 6, 6, 3, 2, 0, 3, true},  {1, 2, 8, 3, 1, 1, 1, false},
    };
    for (const auto& c : cases) {
        CAPTURE(c.Cin);
        CAPTURE(c.groups);
        // weights at the scale real kernels carry (Kaiming fan-in bound)
        const double wb = std::sqrt(6.0 / (static_cast<double>(c.Cin / c.groups) * c.k * c.k));
        auto x = random_tensor<float>(rng, {c.B, c.Cin, 8, 8});
        auto w = random_tensor<float>(rng, {c.Cout, c.Cin / c.groups, c.k, c.k}, -wb, wb);
        auto b = random_tensor<float>(rng, {c.Cout});
        Conv2dOptions o{c.stride, c.pad, c.groups};
        auto y = c.bias ? conv2d(x, w, b, o) : conv2d(x, w, o);
        // reference accumulates in double; the diff is the f32 kernel's own
        // rounding
        std::vector<double> xv(x.data(), x.data() + x.numel());
        std::vector<double> wv(w.data(), w.data() + w.numel());
        std::vector<double> bv(b.data(), b.data() + b.numel());
        auto ref = conv2d_ref<double>(xv, c.B, c.Cin, 8, 8, wv, c.Cout, c.k, c.stride, c.pad,
                                      c.groups, c.bias ? &bv : nullptr);
        double m = 0;
        for (std::int64_t i = 0; i < y.numel(); ++i)
            m = std::max(m, std::abs(static_cast<double>(y[i]) - ref[static_cast<std::size_t>(i)]));
        CHECK(m < 1e-6);
    }
}

TEST_CASE("conv2d f64 matches oracle to 1e-12") {
    Rng rng(1234);
    auto x = random_tensor<double>(rng, {2, 4, 6, 6});
    auto w = random_tensor<double>(rng, {6, 2, 3, 3});
    Conv2dOptions o{1, 1, 2};
    auto y = conv2d(x, w, o);
    std::vector<double> xv(x.data(), x.data() + x.numel());
    std::vector<double> wv(w.data(), w.data() + w.numel());
    auto ref = conv2d_ref<double>(xv, 2, 4, 6, 6, wv, 6, 3, 1, 1, 2, nullptr);
    CHECK(max_abs_diff(y, ref) < 1e-12);
}

TEST_CASE("conv2d linearity for bias-free kernels") {
    Rng rng(5);
    auto x = random_tensor<float>(rng, {1, 2, 6, 6});
    auto y = random_tensor<float>(rng, {1, 2, 6, 6});
    auto w = random_tensor<float>(rng, {3, 2, 3, 3});
    const float a = 1.7f, b = -0.6f;
    auto mix = TensorF::uninit({1, 2, 6, 6});
    mix.values() = a * x.values() + b * y.values();
    Conv2dOptions o{1, 1, 1};
    auto lhs = conv2d(mix, w, o);
    auto cx = conv2d(x, w, o), cy = conv2d(y, w, o);
    auto rhs = TensorF::uninit(lhs.shape());
    rhs.values() = a * cx.values() + b * cy.values();
    CHECK(max_abs_diff(lhs, rhs) < 1e-5);
}

TEST_CASE("conv2d error contracts") {
    auto x = TensorF::zeros({1, 3, 4, 4});
    CHECK_THROWS_AS(conv2d(x, TensorF::zeros({2, 3, 2, 2})), ConfigError);   // even kernel
    CHECK_THROWS_AS(conv2d(x, TensorF::zeros({2, 2, 3, 3})), DimensionError);  // Cin mismatch
    Conv2dOptions bad;
    bad.groups = 2;  // does not divide Cin=3
    CHECK_THROWS_AS(conv2d(x, TensorF::zeros({2, 1, 3, 3}), bad), ConfigError);
}

TEST_CASE("maxpool2 single window and constants") {
    auto y = maxpool2(TensorF::from({1, 1, 2, 2}, {1, 2, 3, 4}));
    CHECK(y.numel() == 1);
    CHECK(y[0] == doctest::Approx(4.0f));

    auto c = maxpool2(TensorF::full({2, 3, 4, 4}, 7.5f));
    CHECK(c.shape() == Shape{2, 3, 2, 2});
    for (std::int64_t i = 0; i < c.numel(); ++i) CHECK(c[i] == doctest::Approx(7.5f));
}

TEST_CASE("maxpool2 matches oracle on seeded input") {
    Rng rng(21);
    auto x = random_tensor<float>(rng, {1, 3, 8, 8});
    auto y = maxpool2(x);
    std::vector<float> xv(x.data(), x.data() + x.numel());
    CHECK(max_abs_diff(y, maxpool2_ref(xv, 1, 3, 8, 8)) == 0.0);
}

TEST_CASE("maxpool2 rejects odd extents") {
    CHECK_THROWS_AS(maxpool2(TensorF::zeros({1, 1, 3, 4})), DimensionError);
    CHECK_THROWS_AS(maxpool2(TensorF::zeros({1, 1, 4, 5})), DimensionError);
}

TEST_CASE("upsample_bilinear2 preserves constants") {
    auto y = upsample_bilinear2(TensorF::full({1, 1, 2, 2}, 5.0f));
    CHECK(y.shape() == Shape{1, 1, 4, 4});
    for (std::int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(5.0f));

    auto single = upsample_bilinear2(TensorF::from({1, 1, 1, 1}, {3.0f}));
    CHECK(single.shape() == Shape{1, 1, 2, 2});
    for (std::int64_t i = 0; i < 4; ++i) CHECK(single[i] == doctest::Approx(3.0f));
}

TEST_CASE("upsample_bilinear2 matches formula oracle") {
    Rng rng(31);
    auto x = random_tensor<float>(rng, {1, 2, 3, 3});
    auto y = upsample_bilinear2(x);
    std::vector<float> xv(x.data(), x.data() + x.numel());
    CHECK(max_abs_diff(y, upsample_bilinear2_ref(xv, 1, 2, 3, 3)) < 1e-6);
}

TEST_CASE("batch_norm on already-normalized input is near identity") {
    // two channels with mean 0, variance 1 over the batch
    const std::int64_t B = 2, C = 2, H = 2, W = 2;
    auto x = TensorF::uninit({B, C, H, W});
    for (std::int64_t c = 0; c < C; ++c) {
        float v = 1.0f;
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t i = 0; i < H * W; ++i) {
                x.values()(x.offset(b, c, i / W, i % W)) = v;
                v = -v;
            }
    }
    auto gamma = TensorF::full({C}, 1.0f);
    auto beta = TensorF::zeros({C});
    auto rm = TensorF::zeros({C});
    auto rv = TensorF::full({C}, 1.0f);
    auto y = batch_norm(x, gamma, beta, rm, rv, true, 1e-5f, 0.1f);
    CHECK(max_abs_diff(y, x) < 1e-3);
}

TEST_CASE("batch_norm with gamma zero returns beta") {
    Rng rng(3);
    auto x = random_tensor<float>(rng, {2, 3, 4, 4});
    auto gamma = TensorF::zeros({3});
    auto beta = TensorF::from({3}, {1.0f, -2.0f, 0.5f});
    auto rm = TensorF::zeros({3});
    auto rv = TensorF::full({3}, 1.0f);
    auto y = batch_norm(x, gamma, beta, rm, rv, true);
    for (std::int64_t b = 0; b < 2; ++b)
        for (std::int64_t c = 0; c < 3; ++c)
            for (std::int64_t i = 0; i < 16; ++i)
                CHECK(y.at(b, c, i / 4, i % 4) == doctest::Approx(beta[c]));
}

TEST_CASE("batch_norm matches statistics oracle") {
    Rng rng(8);
    auto x = random_tensor<float>(rng, {2, 3, 4, 4});
    auto gamma = random_tensor<float>(rng, {3}, 0.5, 1.5);
    auto beta = random_tensor<float>(rng, {3});
    auto rm = TensorF::zeros({3});
    auto rv = TensorF::full({3}, 1.0f);
    auto y = batch_norm(x, gamma, beta, rm, rv, true);
    std::vector<float> xv(x.data(), x.data() + x.numel());
    std::vector<float> gv(gamma.data(), gamma.data() + 3);
    std::vector<float> bv(beta.data(), beta.data() + 3);
    CHECK(max_abs_diff(y, batch_norm_ref(xv, 2, 3, 4, 4, gv, bv, 1e-5)) < 1e-5);
}

TEST_CASE("batch_norm inference uses running stats") {
    auto x = TensorF::full({1, 1, 2, 2}, 3.0f);
    auto gamma = TensorF::full({1}, 2.0f);
    auto beta = TensorF::full({1}, 1.0f);
    auto rm = TensorF::full({1}, 1.0f);
    auto rv = TensorF::full({1}, 4.0f);
    auto y = batch_norm(x, gamma, beta, rm, rv, false);
    // (3-1)/sqrt(4+eps) * 2 + 1 ~= 3
    CHECK(y[0] == doctest::Approx(3.0f).epsilon(1e-4));
    CHECK(rm[0] == doctest::Approx(1.0f));  // untouched in inference
    CHECK_THROWS_AS(batch_norm(x, gamma, beta, rm, rv, false, 0.0f), ConfigError);
}

TEST_CASE("batch_norm rejects degenerate training statistics") {
    auto x = TensorF::zeros({1, 2, 1, 1});
    auto g = TensorF::full({2}, 1.0f);
    auto b = TensorF::zeros({2});
    auto rm = TensorF::zeros({2});
    auto rv = TensorF::full({2}, 1.0f);
    CHECK_THROWS_AS(batch_norm(x, g, b, rm, rv, true), DimensionError);
    CHECK_NOTHROW(batch_norm(x, g, b, rm, rv, false));
}

TEST_CASE("relu and sigmoid basics") {
    auto r = relu(TensorF::from({3}, {-1.0f, 0.0f, 2.0f}));
    CHECK(r[0] == 0.0f);
    CHECK(r[1] == 0.0f);
    CHECK(r[2] == 2.0f);

    auto s = sigmoid(TensorF::from({1}, {0.0f}));
    CHECK(s[0] == doctest::Approx(0.5f));

    // saturation: no overflow, stays inside [0,1]; at +-40 the true value is
    // within one ulp of the boundary, so strict interiority is checked at a
    // magnitude representable in the working precision
    auto big = sigmoid(TensorF::from({2}, {40.0f, -40.0f}));
    CHECK(big.all_finite());
    CHECK(big[0] >= 0.0f);
    CHECK(big[0] <= 1.0f);
    CHECK(big[1] >= 0.0f);
    CHECK(big[1] <= 1.0f);
    auto extreme = sigmoid(TensorF::from({2}, {200.0f, -200.0f}));
    CHECK(extreme.all_finite());

    auto strict = sigmoid(TensorD::from({2}, {30.0, -30.0}));
    CHECK(strict[0] > 0.0);
    CHECK(strict[0] < 1.0);
    CHECK(strict[1] > 0.0);
    CHECK(strict[1] < 1.0);
}

TEST_CASE("reduce_spatial basics and oracle") {
    auto x = TensorF::from({1, 1, 2, 2}, {1, 2, 3, 4});
    CHECK(reduce_spatial(x, Reduce::Avg)[0] == doctest::Approx(2.5f));
    CHECK(reduce_spatial(x, Reduce::Max)[0] == doctest::Approx(4.0f));

    Rng rng(17);
    auto r = random_tensor<float>(rng, {2, 5, 7, 7});
    std::vector<float> rv(r.data(), r.data() + r.numel());
    CHECK(max_abs_diff(reduce_spatial(r, Reduce::Max), reduce_spatial_ref(rv, 2, 5, 49, true)) == 0.0);
    CHECK(max_abs_diff(reduce_spatial(r, Reduce::Avg), reduce_spatial_ref(rv, 2, 5, 49, false)) < 1e-6);
}

TEST_CASE("reduce_channel basics and oracle") {
    // single channel: both kinds return the input map
    Rng rng(4);
    auto one = random_tensor<float>(rng, {1, 1, 3, 3});
    CHECK(max_abs_diff(reduce_channel(one, Reduce::Avg), one) == 0.0);
    CHECK(max_abs_diff(reduce_channel(one, Reduce::Max), one) == 0.0);

    // constant channels 2 and 4
    auto x = TensorF::uninit({1, 2, 2, 2});
    for (std::int64_t i = 0; i < 4; ++i) x.values()(i) = 2.0f;
    for (std::int64_t i = 4; i < 8; ++i) x.values()(i) = 4.0f;
    auto avg = reduce_channel(x, Reduce::Avg);
    auto mx = reduce_channel(x, Reduce::Max);
    for (std::int64_t i = 0; i < 4; ++i) {
        CHECK(avg[i] == doctest::Approx(3.0f));
        CHECK(mx[i] == doctest::Approx(4.0f));
    }

    auto r = random_tensor<float>(rng, {1, 6, 4, 4});
    std::vector<float> rv(r.data(), r.data() + r.numel());
    CHECK(max_abs_diff(reduce_channel(r, Reduce::Max), reduce_channel_ref(rv, 1, 6, 16, true)) == 0.0);
    CHECK(max_abs_diff(reduce_channel(r, Reduce::Avg), reduce_channel_ref(rv, 1, 6, 16, false)) < 1e-6);
}

TEST_CASE("linear identity, zero weight, oracle") {
    auto x = TensorF::from({1, 2}, {1, 2});
    auto eye = TensorF::from({2, 2}, {1, 0, 0, 1});
    auto y = linear(x, eye);
    CHECK(y[0] == 1.0f);
    CHECK(y[1] == 2.0f);

    auto w0 = TensorF::zeros({1, 2});
    auto b = TensorF::from({1}, {7.0f});
    CHECK(linear(x, w0, b)[0] == doctest::Approx(7.0f));

    Rng rng(11);
    auto xr = random_tensor<float>(rng, {3, 4});
    auto wr = random_tensor<float>(rng, {5, 4});
    auto yr = linear(xr, wr);
    std::vector<float> xv(xr.data(), xr.data() + xr.numel());
    std::vector<float> wv(wr.data(), wr.data() + wr.numel());
    CHECK(max_abs_diff(yr, linear_ref<float>(xv, 3, 4, wv, 5, nullptr)) < 1e-6);

    CHECK_THROWS_AS(linear(xr, TensorF::zeros({5, 3})), DimensionError);
}

TEST_CASE("concat_channels shape arithmetic and empty operand") {
    Rng rng(2);
    auto a = random_tensor<float>(rng, {1, 2, 4, 4});
    auto b = random_tensor<float>(rng, {1, 3, 4, 4});
    auto y = concat_channels(a, b);
    CHECK(y.shape() == Shape{1, 5, 4, 4});

    auto empty = TensorF::zeros({1, 0, 4, 4});
    auto same = concat_channels(a, empty);
    CHECK(same.shape() == a.shape());
    CHECK(max_abs_diff(same, a) == 0.0);

    CHECK_THROWS_AS(concat_channels(a, TensorF::zeros({1, 1, 2, 4})), DimensionError);
    CHECK_THROWS_AS(concat_channels(a, TensorF::zeros({2, 1, 4, 4})), DimensionError);
}

TEST_CASE("elementwise identities and broadcast") {
    Rng rng(13);
    auto x = random_tensor<float>(rng, {2, 3, 4, 4});
    auto ones = TensorF::full({2, 3, 4, 4}, 1.0f);
    auto zeros = TensorF::zeros({2, 3, 4, 4});
    CHECK(max_abs_diff(mul(x, ones), x) == 0.0);
    CHECK(max_abs_diff(add(x, zeros), x) == 0.0);

    auto scale = random_tensor<float>(rng, {2, 3, 1, 1});
    auto y = mul(x, scale);
    for (std::int64_t b = 0; b < 2; ++b)
        for (std::int64_t c = 0; c < 3; ++c)
            for (std::int64_t h = 0; h < 4; ++h)
                for (std::int64_t w = 0; w < 4; ++w)
                    CHECK(y.at(b, c, h, w) ==
                          doctest::Approx(x.at(b, c, h, w) * scale.at(b, c, 0, 0)));

    CHECK_THROWS_AS(add(x, TensorF::zeros({2, 2, 4, 4})), DimensionError);
}

TEST_CASE("mse_loss values") {
    auto a = TensorF::from({2}, {1, 3});
    CHECK(mse_loss(a, a)[0] == 0.0f);

    auto b = TensorF::from({2}, {2, 4});
    CHECK(mse_loss(b, a)[0] == doctest::Approx(1.0f));

    auto p = TensorF::from({2}, {0, 0});
    CHECK(mse_loss(p, a)[0] == doctest::Approx(5.0f));  // (1+9)/2

    CHECK_THROWS_AS(mse_loss(a, TensorF::zeros({3})), DimensionError);
}

TEST_CASE("maxpool then upsample restores spatial extents") {
    Rng rng(6);
    for (std::int64_t h : {2, 4, 8, 16}) {
        auto x = random_tensor<float>(rng, {1, 2, h, 2 * h});
        auto y = upsample_bilinear2(maxpool2(x));
        CHECK(y.shape() == x.shape());
    }
}

TEST_CASE("ops are deterministic across repeated runs") {
    Rng rng(77);
    auto x = random_tensor<float>(rng, {2, 4, 8, 8});
    auto w = random_tensor<float>(rng, {6, 2, 3, 3});
    Conv2dOptions o{1, 1, 2};
    auto y1 = conv2d(x, w, o);
    auto y2 = conv2d(x, w, o);
    CHECK(std::memcmp(y1.data(), y2.data(), sizeof(float) * static_cast<std::size_t>(y1.numel())) == 0);
}
