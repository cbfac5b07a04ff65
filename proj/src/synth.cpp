#include <cmath>

#include "nowcast/data.hpp"
#include "nowcast/rng.hpp"

namespace nowcast {

namespace {

struct Blob {
    double x0, y0;  // initial center
    double vx, vy;  // px/frame
    double sigma;
    double amp;
};

// shortest displacement on a ring of circumference n
double ring_dist(double a, double b, double n) {
    double d = std::fabs(a - b);
    d = std::fmod(d, n);
    return std::min(d, n - d);
}

}  // namespace

FrameDataset gen_synthetic(const SynthConfig& cfg) {
    check_config(cfg.height >= 16 && cfg.width >= 16, "synthetic grids must be at least 16x16");
    check_config(cfg.frames >= 1, "synthetic dataset needs at least one frame");
    check_config(cfg.blobs >= 1, "synthetic dataset needs at least one blob");
    check_config(cfg.velocity_range >= 0, "velocity_range must be >= 0");

    const std::int64_t H = cfg.height, W = cfg.width, T = cfg.frames;
    const double hw_min = static_cast<double>(std::min(H, W));
    Rng rng(cfg.seed);

    std::vector<Blob> blobs(static_cast<std::size_t>(cfg.blobs));
    for (auto& b : blobs) {
        b.x0 = rng.uniform(0.0, static_cast<double>(W));
        b.y0 = rng.uniform(0.0, static_cast<double>(H));
        b.vx = rng.uniform(-cfg.velocity_range, cfg.velocity_range);
        b.vy = rng.uniform(-cfg.velocity_range, cfg.velocity_range);
        // wide enough that the discrete blob mass is conserved under subpixel
        // translation
        b.sigma = rng.uniform(2.0, std::max(2.5, hw_min / 6.0));
        b.amp = rng.uniform(0.6, 1.4);
    }

    // elevation: a few smooth seeded cosine waves, min-max scaled later
    struct Wave {
        double fx, fy, phase, amp;
    };
    std::vector<Wave> waves(3);
    for (auto& w : waves) {
        w.fx = static_cast<double>(1 + rng.index(3));
        w.fy = static_cast<double>(1 + rng.index(3));
        w.phase = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        w.amp = rng.uniform(0.5, 1.0);
    }

    FrameDataset ds;
    ds.frames = T;
    ds.dyn_channels = 4;
    ds.static_channels = 3;
    ds.height = H;
    ds.width = W;
    ds.cadence_minutes = 15;
    ds.channel_names = {"intensity", "rain", "smooth", "mask", "lat", "lon", "elevation"};
    ds.dynamic.resize(static_cast<std::size_t>(T * 4 * H * W));
    ds.statics.resize(static_cast<std::size_t>(3 * H * W));

    constexpr double rain_threshold = 0.55;
    constexpr double mask_threshold = 0.35;

    for (std::int64_t t = 0; t < T; ++t) {
        float* intensity = ds.frame(t, 0);
        float* rain = ds.frame(t, 1);
        float* smooth = ds.frame(t, 2);
        float* mask = ds.frame(t, 3);
        for (std::int64_t y = 0; y < H; ++y)
            for (std::int64_t x = 0; x < W; ++x) {
                double v = 0;
                for (const auto& b : blobs) {
                    const double cx = std::fmod(b.x0 + b.vx * static_cast<double>(t), static_cast<double>(W));
                    const double cy = std::fmod(b.y0 + b.vy * static_cast<double>(t), static_cast<double>(H));
                    const double dx = ring_dist(static_cast<double>(x), cx < 0 ? cx + W : cx,
                                                static_cast<double>(W));
                    const double dy = ring_dist(static_cast<double>(y), cy < 0 ? cy + H : cy,
                                                static_cast<double>(H));
                    v += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
                }
                const std::int64_t i = y * W + x;
                intensity[i] = static_cast<float>(v);
                rain[i] = static_cast<float>(v > rain_threshold ? v - rain_threshold : 0.0);
                smooth[i] = static_cast<float>(std::tanh(v));
                mask[i] = v > mask_threshold ? 1.0f : 0.0f;
            }
    }

    float* lat = ds.statics.data();
    float* lon = ds.statics.data() + H * W;
    float* elev = ds.statics.data() + 2 * H * W;
    double elo = 1e30, ehi = -1e30;
    for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < W; ++x) {
            const std::int64_t i = y * W + x;
            lat[i] = H > 1 ? static_cast<float>(y) / static_cast<float>(H - 1) : 0.0f;
            lon[i] = W > 1 ? static_cast<float>(x) / static_cast<float>(W - 1) : 0.0f;
            double e = 0;
            for (const auto& w : waves)
                e += w.amp * std::cos(2.0 * 3.14159265358979323846 *
                                          (w.fx * static_cast<double>(x) / static_cast<double>(W) +
                                           w.fy * static_cast<double>(y) / static_cast<double>(H)) +
                                      w.phase);
            elev[i] = static_cast<float>(e);
            elo = std::min(elo, e);
            ehi = std::max(ehi, e);
        }
    const double erange = ehi - elo;
    for (std::int64_t i = 0; i < H * W; ++i)
        elev[i] = erange > 0 ? static_cast<float>((elev[i] - elo) / erange) : 0.0f;

    refresh_stats(ds);
    return ds;
}

}  // namespace nowcast
