// Command-line surface: train / predict / evaluate / params / synth / render.
// Every run resolves its configuration from built-in defaults, then an
// optional key=value config file, then explicit flags, and writes the fully
// resolved configuration next to its outputs.

#include <CLI11.hpp>
#include <filesystem>
#include <iomanip>
#include <iostream>

#include "nowcast/config.hpp"
#include "nowcast/eval.hpp"
#include "nowcast/model_io.hpp"
#include "nowcast/pgm.hpp"
#include "nowcast/report.hpp"
#include "nowcast/threading.hpp"
#include "nowcast/train.hpp"

namespace fs = std::filesystem;
using namespace nowcast;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct GlobalOpts {
    std::string config_path;
    std::string dtype = "f32";
    int threads = 1;
    bool seed_given = false;
    std::uint64_t seed = 0;
};

KvConfig base_config(const GlobalOpts& g) {
    KvConfig cfg;
    if (!g.config_path.empty()) cfg = KvConfig::from_file(g.config_path);
    return cfg;
}

void apply_global(KvConfig& cfg, const GlobalOpts& g) {
    if (g.seed_given) cfg.set("seed", std::to_string(g.seed));
    cfg.set("dtype", g.dtype);
    cfg.set("threads", std::to_string(g.threads));
}

void finish_global(const KvConfig& cfg) {
    const std::string dtype = cfg.get_str("dtype", "f32");
    check_config(dtype == "f32" || dtype == "f64", "dtype must be f32 or f64");
    set_max_threads(static_cast<int>(cfg.get_int("threads", 1)));
}

std::string join_ints(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

ModelSpec spec_from_config(const KvConfig& cfg) {
    ModelSpec spec;
    spec.variant = variant_from_name(cfg.get_str("variant", "smaat_unet"));
    spec.base_width = static_cast<int>(cfg.get_int("base_width", 64));
    spec.depth = static_cast<int>(cfg.get_int("depth", 5));
    spec.cbam_reduction = static_cast<int>(cfg.get_int("cbam_reduction", 16));
    spec.spatial_kernel = static_cast<int>(cfg.get_int("spatial_kernel", 7));
    spec.bilinear = cfg.get_bool("bilinear", true);
    spec.dsc_multiplier = static_cast<int>(cfg.get_int("dsc_multiplier", 2));
    return spec;
}

void spec_into_config(const ModelSpec& spec, KvConfig& cfg) {
    cfg.set("variant", variant_name(spec.variant));
    cfg.set("base_width", std::to_string(spec.base_width));
    cfg.set("depth", std::to_string(spec.depth));
    cfg.set("cbam_reduction", std::to_string(spec.cbam_reduction));
    cfg.set("spatial_kernel", std::to_string(spec.spatial_kernel));
    cfg.set("bilinear", spec.bilinear ? "1" : "0");
    cfg.set("dsc_multiplier", std::to_string(spec.dsc_multiplier));
}

SampleLayout layout_from_config(const KvConfig& cfg, int default_t_in = 4,
                                int default_t_out = 32) {
    SampleLayout layout;
    layout.t_in = static_cast<int>(cfg.get_int("t_in", default_t_in));
    layout.t_out = static_cast<int>(cfg.get_int("t_out", default_t_out));
    layout.target_channels = cfg.get_int_list("target_channels", {});
    layout.statics_per_frame = cfg.get_bool("statics_per_frame", false);
    return layout;
}

void layout_into_config(const SampleLayout& layout, KvConfig& cfg) {
    cfg.set("t_in", std::to_string(layout.t_in));
    cfg.set("t_out", std::to_string(layout.t_out));
    cfg.set("target_channels", join_ints(layout.target_channels));
    cfg.set("statics_per_frame", layout.statics_per_frame ? "1" : "0");
}

FrameDataset load_dataset(const KvConfig& cfg) {
    const std::string path = cfg.get_str("data", "");
    check_config(!path.empty(), "missing required key 'data' (dataset path)");
    return read_stwf(path);
}

FrameDataset select_split(const FrameDataset& ds, const KvConfig& cfg) {
    const std::string which = cfg.get_str("split", "test");
    if (which == "all") return ds;
    SplitFractions f;
    f.train = cfg.get_double("split_train", 0.7);
    f.valid = cfg.get_double("split_valid", 0.15);
    auto splits = split_dataset(ds, f);
    if (which == "train") return splits.train;
    if (which == "valid") return splits.valid;
    if (which == "test") return splits.test;
    throw ConfigError("split must be one of train, valid, test, all; got '" + which + "'");
}

const std::set<std::string> kGlobalKeys = {"seed", "dtype", "threads"};

std::set<std::string> with_global(std::set<std::string> keys) {
    keys.insert(kGlobalKeys.begin(), kGlobalKeys.end());
    return keys;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------
int cmd_synth(KvConfig cfg) {
    cfg.require_known(with_global({"out", "frames", "height", "width", "blobs",
                                   "velocity_range"}));
    SynthConfig sc;
    sc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 42));
    sc.frames = cfg.get_int("frames", 400);
    sc.height = cfg.get_int("height", 32);
    sc.width = cfg.get_int("width", 32);
    sc.blobs = static_cast<int>(cfg.get_int("blobs", 3));
    sc.velocity_range = cfg.get_double("velocity_range", 1.0);
    const std::string out = cfg.get_str("out", "");
    check_config(!out.empty(), "missing required key 'out'");

    auto ds = gen_synthetic(sc);
    write_stwf(ds, out);

    cfg.set("seed", std::to_string(sc.seed));
    cfg.set("frames", std::to_string(sc.frames));
    cfg.set("height", std::to_string(sc.height));
    cfg.set("width", std::to_string(sc.width));
    cfg.set("blobs", std::to_string(sc.blobs));
    cfg.set("velocity_range", std::to_string(sc.velocity_range));
    cfg.write(out + ".run.cfg");
    std::cout << "wrote " << out << " (" << ds.frames << " frames, " << ds.dyn_channels
              << "+" << ds.static_channels << " channels, " << ds.height << "x" << ds.width
              << ")\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// params
// ---------------------------------------------------------------------------
void print_params_for(const ModelSpec& spec, bool per_layer) {
    auto model = build_model<float>(spec, 0);
    if (per_layer) {
        for (const auto& [layer, n] : model.layer_param_counts())
            std::cout << "  " << std::left << std::setw(10) << layer << std::right
                      << std::setw(12) << n << "\n";
    }
    std::cout << std::left << std::setw(12) << variant_name(spec.variant) << std::right
              << std::setw(12) << model.param_count() << "  (" << std::fixed
              << std::setprecision(2) << static_cast<double>(model.param_count()) / 1e6 << "M)\n"
              << std::defaultfloat << std::setprecision(6);
}

int cmd_params(KvConfig cfg, bool all_variants) {
    cfg.require_known(with_global({"variant", "in_channels", "out_channels", "base_width",
                                   "depth", "cbam_reduction", "spatial_kernel", "bilinear",
                                   "dsc_multiplier", "all"}));
    ModelSpec spec = spec_from_config(cfg);
    spec.in_channels = static_cast<int>(cfg.get_int("in_channels", 19));
    spec.out_channels = static_cast<int>(cfg.get_int("out_channels", 128));
    all_variants = all_variants || cfg.get_bool("all", false);

    if (all_variants) {
        std::vector<std::pair<std::int64_t, Variant>> rows;
        for (Variant v : {Variant::Unet, Variant::UnetDsc, Variant::UnetCbam,
                          Variant::SmaatUnet}) {
            ModelSpec s = spec;
            s.variant = v;
            rows.emplace_back(build_model<float>(s, 0).param_count(), v);
        }
        std::sort(rows.begin(), rows.end());
        for (const auto& [count, v] : rows) {
            ModelSpec s = spec;
            s.variant = v;
            print_params_for(s, false);
        }
    } else {
        print_params_for(spec, true);
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------
template <typename S>
int run_train(KvConfig& cfg) {
    FrameDataset full = load_dataset(cfg);

    SampleLayout layout = layout_from_config(cfg);
    layout.validate(full);

    SplitFractions fractions;
    fractions.train = cfg.get_double("split_train", 0.7);
    fractions.valid = cfg.get_double("split_valid", 0.15);
    auto splits = split_dataset(full, fractions);

    ModelSpec spec = spec_from_config(cfg);
    spec.in_channels = static_cast<int>(layout.in_channels(full.dyn_channels, full.static_channels));
    spec.out_channels = static_cast<int>(layout.out_channels(full.dyn_channels));

    TrainConfig tc;
    tc.epochs = static_cast<int>(cfg.get_int("epochs", 10));
    tc.lr_max = cfg.get_double("lr_max", 1e-3);
    tc.lr_min = cfg.get_double("lr_min", 0.0);
    tc.beta1 = cfg.get_double("beta1", 0.9);
    tc.beta2 = cfg.get_double("beta2", 0.999);
    tc.adam_eps = cfg.get_double("adam_eps", 1e-8);
    tc.cawrs_t0 = cfg.get_int("cawrs_t0", 0);
    tc.cawrs_t_mult = static_cast<int>(cfg.get_int("cawrs_t_mult", 2));
    const std::string schedule = cfg.get_str("schedule", "cawrs");
    check_config(schedule == "cawrs" || schedule == "constant",
                 "schedule must be cawrs or constant");
    tc.cosine_schedule = (schedule == "cawrs");
    tc.batch_size = static_cast<int>(cfg.get_int("batch_size", 16));
    tc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
    tc.checkpoint_every = static_cast<int>(cfg.get_int("checkpoint_every", 0));
    tc.out_dir = cfg.get_str("out_dir", "");
    check_config(!tc.out_dir.empty(), "missing required key 'out_dir'");
    tc.validate();

    auto model = build_model<S>(spec, tc.seed);
    std::cout << "training " << variant_name(spec.variant) << " ("
              << model.param_count() << " parameters) on " << window_count(splits.train, layout)
              << " train / " << window_count(splits.valid, layout) << " valid windows\n";

    auto result = fit(model, splits.train, splits.valid, layout, tc);

    spec_into_config(spec, cfg);
    layout_into_config(layout, cfg);
    cfg.set("split_train", std::to_string(fractions.train));
    cfg.set("split_valid", std::to_string(fractions.valid));
    cfg.set("epochs", std::to_string(tc.epochs));
    cfg.set("lr_max", std::to_string(tc.lr_max));
    cfg.set("lr_min", std::to_string(tc.lr_min));
    cfg.set("beta1", std::to_string(tc.beta1));
    cfg.set("beta2", std::to_string(tc.beta2));
    cfg.set("adam_eps", std::to_string(tc.adam_eps));
    cfg.set("cawrs_t0", std::to_string(tc.cawrs_t0));
    cfg.set("cawrs_t_mult", std::to_string(tc.cawrs_t_mult));
    cfg.set("schedule", schedule);
    cfg.set("batch_size", std::to_string(tc.batch_size));
    cfg.set("seed", std::to_string(tc.seed));
    cfg.set("checkpoint_every", std::to_string(tc.checkpoint_every));
    cfg.write(tc.out_dir + "/resolved.cfg");

    for (const auto& e : result.epochs)
        std::cout << "epoch " << e.epoch << "  train " << e.train_loss << "  valid "
                  << e.valid_loss << "  lr " << e.final_lr << "\n";
    std::cout << "checkpoints: " << result.checkpoint_paths.size() << " under " << tc.out_dir
              << "\n";
    return kExitOk;
}

int cmd_train(KvConfig cfg) {
    cfg.require_known(with_global({
        "data", "out_dir", "variant", "base_width", "depth", "cbam_reduction", "spatial_kernel",
        "bilinear", "dsc_multiplier", "t_in", "t_out", "target_channels", "statics_per_frame",
        "epochs", "lr_max", "lr_min", "beta1", "beta2", "adam_eps", "cawrs_t0", "cawrs_t_mult",
        "schedule", "batch_size", "checkpoint_every", "split_train", "split_valid",
    }));
    finish_global(cfg);
    return cfg.get_str("dtype", "f32") == "f64" ? run_train<double>(cfg) : run_train<float>(cfg);
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------
template <typename S>
int run_predict(KvConfig& cfg) {
    const std::string ckpt_path = cfg.get_str("checkpoint", "");
    check_config(!ckpt_path.empty(), "missing required key 'checkpoint'");
    const std::string out = cfg.get_str("out", "");
    check_config(!out.empty(), "missing required key 'out'");

    auto model = load_model<S>(ckpt_path);
    FrameDataset ds = load_dataset(cfg);
    SampleLayout layout = layout_from_config(cfg);
    layout.validate(ds);

    const std::int64_t expect_in = layout.in_channels(ds.dyn_channels, ds.static_channels);
    const std::int64_t expect_out = layout.out_channels(ds.dyn_channels);
    if (expect_in != model.spec.in_channels || expect_out != model.spec.out_channels)
        throw ConfigError("checkpoint expects " + std::to_string(model.spec.in_channels) + "->" +
                          std::to_string(model.spec.out_channels) +
                          " channels, dataset+layout gives " + std::to_string(expect_in) + "->" +
                          std::to_string(expect_out));

    const std::int64_t window = cfg.get_int("window", 0);
    check_config(window >= 0 && window < window_count(ds, layout),
                 "window " + std::to_string(window) + " out of range [0, " +
                     std::to_string(window_count(ds, layout)) + ")");

    auto [x, y] = assemble_batch<S>(ds, {window}, layout);
    Tensor<S> pred = model.forward(x, false);

    // de-normalize back to physical scale and emit an STWF fragment:
    // frame t = lead t+1, channels = the target channels
    const auto targets = layout.targets(ds.dyn_channels);
    FrameDataset frag;
    frag.frames = layout.t_out;
    frag.dyn_channels = static_cast<std::int64_t>(targets.size());
    frag.static_channels = 0;
    frag.height = ds.height;
    frag.width = ds.width;
    frag.cadence_minutes = ds.cadence_minutes;
    for (int c : targets) {
        frag.channel_names.push_back(ds.channel_names[static_cast<std::size_t>(c)]);
        frag.mean.push_back(ds.mean[static_cast<std::size_t>(c)]);
        frag.stddev.push_back(ds.stddev[static_cast<std::size_t>(c)]);
    }
    frag.dynamic.resize(static_cast<std::size_t>(pred.numel()));
    const std::int64_t hw = ds.plane_size();
    for (std::int64_t p = 0; p < pred.dim(1); ++p) {
        const std::size_t tc = static_cast<std::size_t>(p % static_cast<std::int64_t>(targets.size()));
        for (std::int64_t i = 0; i < hw; ++i)
            frag.dynamic[static_cast<std::size_t>(p * hw + i)] =
                static_cast<float>(pred.data()[p * hw + i]) * frag.stddev[tc] + frag.mean[tc];
    }
    write_stwf(frag, out);

    layout_into_config(layout, cfg);
    cfg.set("window", std::to_string(window));
    cfg.write(out + ".run.cfg");
    std::cout << "wrote " << out << " (" << frag.frames << " predicted frames)\n";
    return kExitOk;
}

int cmd_predict(KvConfig cfg) {
    cfg.require_known(with_global({"checkpoint", "data", "window", "out", "t_in", "t_out",
                                   "target_channels", "statics_per_frame"}));
    finish_global(cfg);
    return cfg.get_str("dtype", "f32") == "f64" ? run_predict<double>(cfg)
                                                : run_predict<float>(cfg);
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------
template <typename S>
int run_evaluate(KvConfig& cfg, const std::vector<std::string>& ckpt_flags) {
    std::vector<std::string> ckpts = ckpt_flags;
    if (ckpts.empty()) ckpts = cfg.get_str_list("checkpoints");
    check_config(!ckpts.empty(), "no checkpoints given (key 'checkpoints' or positional args)");
    const std::string out_prefix = cfg.get_str("out", "");
    check_config(!out_prefix.empty(), "missing required key 'out' (report path prefix)");

    FrameDataset full = load_dataset(cfg);
    FrameDataset ds = select_split(full, cfg);
    SampleLayout layout = layout_from_config(cfg);
    layout.validate(ds);

    std::vector<Model<S>> models;
    models.reserve(ckpts.size());
    std::vector<std::pair<std::string, Model<S>*>> named;
    for (const auto& path : ckpts) models.push_back(load_model<S>(path));
    for (std::size_t i = 0; i < models.size(); ++i) {
        const std::int64_t expect_in = layout.in_channels(ds.dyn_channels, ds.static_channels);
        const std::int64_t expect_out = layout.out_channels(ds.dyn_channels);
        if (expect_in != models[i].spec.in_channels || expect_out != models[i].spec.out_channels)
            throw ConfigError("checkpoint '" + ckpts[i] + "' expects " +
                              std::to_string(models[i].spec.in_channels) + "->" +
                              std::to_string(models[i].spec.out_channels) +
                              " channels, dataset+layout gives " + std::to_string(expect_in) +
                              "->" + std::to_string(expect_out));
        named.emplace_back(fs::path(ckpts[i]).stem().string(), &models[i]);
    }

    std::vector<std::pair<std::string, std::vector<std::size_t>>> ensembles;
    if (models.size() >= 2) {
        std::vector<std::size_t> all(models.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        ensembles.emplace_back("ensemble(" + std::to_string(models.size()) + ")", all);
    }

    const int batch = static_cast<int>(cfg.get_int("batch_size", 16));
    auto report = evaluate(named, ensembles, ds, layout, batch);
    write_report(report, out_prefix);

    cfg.set("checkpoints", [&] {
        std::string s;
        for (std::size_t i = 0; i < ckpts.size(); ++i) s += (i ? "," : "") + ckpts[i];
        return s;
    }());
    layout_into_config(layout, cfg);
    cfg.set("split", cfg.get_str("split", "test"));
    cfg.set("batch_size", std::to_string(batch));
    cfg.write(out_prefix + ".run.cfg");

    std::cout << report_text(report);
    return kExitOk;
}

int cmd_evaluate(KvConfig cfg, const std::vector<std::string>& ckpt_flags) {
    cfg.require_known(with_global({"checkpoints", "data", "split", "split_train", "split_valid",
                                   "out", "batch_size", "t_in", "t_out", "target_channels",
                                   "statics_per_frame"}));
    finish_global(cfg);
    return cfg.get_str("dtype", "f32") == "f64" ? run_evaluate<double>(cfg, ckpt_flags)
                                                : run_evaluate<float>(cfg, ckpt_flags);
}

// ---------------------------------------------------------------------------
// render
// ---------------------------------------------------------------------------
int cmd_render(KvConfig cfg) {
    cfg.require_known(with_global({"data", "frames", "channels", "out_dir"}));
    FrameDataset ds = load_dataset(cfg);
    const std::string out_dir = cfg.get_str("out_dir", "");
    check_config(!out_dir.empty(), "missing required key 'out_dir'");
    std::vector<int> frames = cfg.get_int_list("frames", {0});
    std::vector<int> channels = cfg.get_int_list("channels", {0});
    for (int f : frames)
        check_config(f >= 0 && f < ds.frames, "frame index " + std::to_string(f) +
                                                  " out of range [0, " +
                                                  std::to_string(ds.frames) + ")");
    for (int c : channels)
        check_config(c >= 0 && c < ds.dyn_channels, "channel index " + std::to_string(c) +
                                                        " out of range [0, " +
                                                        std::to_string(ds.dyn_channels) + ")");
    fs::create_directories(out_dir);
    for (int f : frames)
        for (int c : channels) {
            char name[48];
            std::snprintf(name, sizeof(name), "frame%04d_ch%d.pgm", f, c);
            write_pgm(out_dir + "/" + name, ds.height, ds.width, ds.frame(f, c));
        }
    cfg.set("frames", join_ints(frames));
    cfg.set("channels", join_ints(channels));
    cfg.write(out_dir + "/resolved.cfg");
    std::cout << "wrote " << frames.size() * channels.size() << " panel(s) under " << out_dir
              << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spatio-temporal frame forecasting: U-Net family trainer and evaluator"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "key=value config file");
    auto* seed_opt = app.add_option("--seed", g.seed, "RNG seed override");
    app.add_option("--threads", g.threads, "worker threads (1 = bit-exact runs)");
    app.add_option("--dtype", g.dtype, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));

    auto add_kv_flags = [](CLI::App* sub, std::vector<std::pair<std::string, std::string>>* kv,
                           const std::vector<std::string>& names) {
        for (const auto& name : names) {
            sub->add_option_function<std::string>(
                "--" + name, [kv, name](const std::string& v) { kv->emplace_back(name, v); });
        }
    };

    std::vector<std::pair<std::string, std::string>> kv;
    auto* synth = app.add_subcommand("synth", "generate a synthetic STWF dataset");
    synth->fallthrough();
    add_kv_flags(synth, &kv, {"out", "frames", "height", "width", "blobs", "velocity_range"});

    auto* params = app.add_subcommand("params", "print per-layer and total parameter counts");
    params->fallthrough();
    bool params_all = false;
    params->add_flag("--all", params_all, "print all four variants, ascending");
    add_kv_flags(params, &kv,
                 {"variant", "in_channels", "out_channels", "base_width", "depth",
                  "cbam_reduction", "spatial_kernel", "bilinear", "dsc_multiplier"});

    auto* train = app.add_subcommand("train", "train a model and write checkpoints");
    train->fallthrough();
    add_kv_flags(train, &kv, {"data", "out_dir", "variant", "base_width", "depth",
                              "cbam_reduction", "spatial_kernel", "bilinear", "dsc_multiplier",
                              "t_in", "t_out", "target_channels", "statics_per_frame", "epochs",
                              "lr_max", "lr_min", "beta1", "beta2", "adam_eps", "cawrs_t0",
                              "cawrs_t_mult", "schedule", "batch_size", "checkpoint_every",
                              "split_train", "split_valid"});

    auto* predict = app.add_subcommand("predict", "predict one window and write an STWF fragment");
    predict->fallthrough();
    add_kv_flags(predict, &kv, {"checkpoint", "data", "window", "out", "t_in", "t_out",
                                "target_channels", "statics_per_frame"});

    auto* evaluate = app.add_subcommand("evaluate", "score checkpoints against persistence");
    evaluate->fallthrough();
    std::vector<std::string> eval_ckpts;
    evaluate->add_option("checkpoints", eval_ckpts, "checkpoint files");
    add_kv_flags(evaluate, &kv, {"data", "split", "split_train", "split_valid", "out",
                                 "batch_size", "t_in", "t_out", "target_channels",
                                 "statics_per_frame"});

    auto* render = app.add_subcommand("render", "write grayscale PGM panels of dataset frames");
    render->fallthrough();
    add_kv_flags(render, &kv, {"data", "frames", "channels", "out_dir"});

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }
    g.seed_given = seed_opt->count() > 0;

    try {
        KvConfig cfg = base_config(g);
        apply_global(cfg, g);
        for (const auto& [k, v] : kv) cfg.set(k, v);
        finish_global(cfg);

        if (synth->parsed()) return cmd_synth(std::move(cfg));
        if (params->parsed()) return cmd_params(std::move(cfg), params_all);
        if (train->parsed()) return cmd_train(std::move(cfg));
        if (predict->parsed()) return cmd_predict(std::move(cfg));
        if (evaluate->parsed()) return cmd_evaluate(std::move(cfg), eval_ckpts);
        if (render->parsed()) return cmd_render(std::move(cfg));
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DimensionError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numeric abort: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
