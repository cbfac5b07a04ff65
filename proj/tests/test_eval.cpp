#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nowcast/eval.hpp"
#include "nowcast/report.hpp"
#include "test_support.hpp"

using namespace nowcast;
using namespace nowcast::testing;

namespace {

struct EvalFixture {
    FrameDataset ds;
    SampleLayout layout;
    ModelSpec spec;

    explicit EvalFixture(double velocity = 1.0, std::int64_t frames = 14) {
        SynthConfig sc;
        sc.seed = 55;
        sc.frames = frames;
        sc.height = 16;
        sc.width = 16;
        sc.blobs = 2;
        sc.velocity_range = velocity;
        ds = gen_synthetic(sc);
        layout.t_in = 3;
        layout.t_out = 4;
        spec.variant = Variant::UnetDsc;
        spec.base_width = 8;
        spec.depth = 3;
        spec.in_channels = static_cast<int>(layout.in_channels(ds.dyn_channels, ds.static_channels));
        spec.out_channels = static_cast<int>(layout.out_channels(ds.dyn_channels));
    }
};

}  // namespace

TEST_CASE("persistence tiles the last input frame across all leads") {
    EvalFixture f;
    auto [x, y] = assemble_batch<float>(f.ds, {0, 1}, f.layout);
    auto pred = persistence_predict(x, f.layout, f.ds.dyn_channels, f.ds.static_channels);
    CHECK(pred.shape() == y.shape());
    const std::int64_t hw = f.ds.plane_size();
    const std::int64_t cin = x.dim(1);
    for (std::int64_t b = 0; b < 2; ++b)
        for (int lead = 0; lead < f.layout.t_out; ++lead)
            for (std::int64_t c = 0; c < f.ds.dyn_channels; ++c) {
                const float* last_frame =
                    x.data() + (b * cin + (f.layout.t_in - 1) * f.ds.dyn_channels + c) * hw;
                const float* block =
                    pred.data() +
                    (b * pred.dim(1) + lead * f.ds.dyn_channels + c) * hw;
                CHECK(std::memcmp(block, last_frame, sizeof(float) * static_cast<std::size_t>(hw)) == 0);
            }
}

TEST_CASE("persistence ignores all but the last input frame") {
    EvalFixture f;
    auto [x, y] = assemble_batch<float>(f.ds, {0}, f.layout);
    auto before = persistence_predict(x, f.layout, f.ds.dyn_channels, f.ds.static_channels);
    // scramble frames 0 .. t_in-2
    const std::int64_t hw = f.ds.plane_size();
    for (std::int64_t p = 0; p < (f.layout.t_in - 1) * f.ds.dyn_channels * hw; ++p)
        x.values()(p) += 17.0f;
    auto after = persistence_predict(x, f.layout, f.ds.dyn_channels, f.ds.static_channels);
    CHECK(std::memcmp(before.data(), after.data(),
                      sizeof(float) * static_cast<std::size_t>(before.numel())) == 0);
}

TEST_CASE("normalized score identities") {
    CHECK(normalized_score(0.42, 0.42) == doctest::Approx(1.0));
    CHECK(normalized_score(0.0, 0.42) == 0.0);
    CHECK_THROWS_AS(normalized_score(0.1, 0.0), ConfigError);
}

TEST_CASE("single-member ensemble is the member") {
    Rng rng(3);
    auto p = random_tensor<float>(rng, {1, 4, 8, 8});
    auto e = ensemble_predict<float>({p});
    CHECK(std::memcmp(e.data(), p.data(), sizeof(float) * static_cast<std::size_t>(p.numel())) == 0);
}

TEST_CASE("symmetric members cancel to the target") {
    Rng rng(4);
    auto t = random_tensor<float>(rng, {1, 2, 4, 4});
    auto p = random_tensor<float>(rng, {1, 2, 4, 4});
    auto mirror = TensorF::uninit(p.shape());
    mirror.values() = 2.0f * t.values() - p.values();
    auto e = ensemble_predict<float>({p, mirror});
    CHECK(mse_loss(e, t)[0] < 1e-10f);
}

TEST_CASE("ensemble mse never exceeds the mean member mse") {
    Rng rng(5);
    auto target = random_tensor<float>(rng, {2, 3, 6, 6});
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<TensorF> members;
        double mean_member_mse = 0;
        const int k = 2 + static_cast<int>(rng.index(4));
        for (int i = 0; i < k; ++i) {
            members.push_back(random_tensor<float>(rng, target.shape()));
            mean_member_mse += static_cast<double>(mse_loss(members.back(), target)[0]);
        }
        mean_member_mse /= k;
        const double ens = static_cast<double>(mse_loss(ensemble_predict(members), target)[0]);
        CHECK(ens <= mean_member_mse + 1e-6);
    }
}

TEST_CASE("evaluate produces a coherent report") {
    EvalFixture f;
    auto m1 = build_model<float>(f.spec, 101);
    auto m2 = build_model<float>(f.spec, 202);
    std::vector<std::pair<std::string, Model<float>*>> models = {{"m1", &m1}, {"m2", &m2}};
    std::vector<std::pair<std::string, std::vector<std::size_t>>> ensembles = {
        {"ensemble(m1,m2)", {0, 1}}};
    auto report = evaluate(models, ensembles, f.ds, f.layout, 4);

    REQUIRE(report.entries.size() == 4);
    CHECK(report.entries[0].kind == "persistence");
    CHECK(report.entries[0].normalized_valid);
    CHECK(report.entries[0].normalized == 1.0);
    CHECK(report.lead_count == f.layout.t_out);
    CHECK(report.sample_count == window_count(f.ds, f.layout));

    for (const auto& e : report.entries) {
        CAPTURE(e.name);
        CHECK(e.raw_mse >= 0.0);
        REQUIRE(e.per_lead.size() == static_cast<std::size_t>(f.layout.t_out));
        double mean = 0;
        for (double v : e.per_lead) mean += v;
        mean /= static_cast<double>(e.per_lead.size());
        CHECK(mean == doctest::Approx(e.raw_mse).epsilon(1e-6));
    }

    // ensemble of two untrained models still obeys convexity
    const double mean_members =
        (report.entries[1].raw_mse + report.entries[2].raw_mse) / 2.0;
    CHECK(report.entries[3].raw_mse <= mean_members + 1e-6);

    // evaluation is read-only and deterministic
    auto report2 = evaluate(models, ensembles, f.ds, f.layout, 4);
    CHECK(report2.entries[1].raw_mse == report.entries[1].raw_mse);
}

TEST_CASE("zero-velocity data flags undefined normalization") {
    EvalFixture f(0.0);
    auto m = build_model<float>(f.spec, 7);
    std::vector<std::pair<std::string, Model<float>*>> models = {{"m", &m}};
    auto report = evaluate<float>(models, {}, f.ds, f.layout, 4);
    CHECK(report.persistence_undefined);
    CHECK(report.entries[0].raw_mse == 0.0);
    CHECK_FALSE(report.entries[0].normalized_valid);
    CHECK_FALSE(report.entries[1].normalized_valid);
    CHECK(report.entries[1].raw_mse >= 0.0);  // raw still reported
}

TEST_CASE("empty evaluation dataset is a configuration error") {
    EvalFixture f;
    auto short_ds = slice_time(f.ds, 0, 3);
    std::vector<std::pair<std::string, Model<float>*>> none;
    CHECK_THROWS_AS(evaluate<float>(none, {}, short_ds, f.layout, 4), ConfigError);
}

TEST_CASE("report renders both formats") {
    EvalFixture f;
    auto m = build_model<float>(f.spec, 9);
    std::vector<std::pair<std::string, Model<float>*>> models = {{"model_a", &m}};
    auto report = evaluate<float>(models, {}, f.ds, f.layout, 4);

    const std::string text = report_text(report);
    CHECK(text.find("persistence") != std::string::npos);
    CHECK(text.find("model_a") != std::string::npos);
    CHECK(text.find("raw_mse") != std::string::npos);

    const std::string csv = report_csv(report);
    // header + one row per entry
    std::size_t lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    CHECK(lines == 1 + report.entries.size());
    CHECK(csv.find("lead_4") != std::string::npos);
}
