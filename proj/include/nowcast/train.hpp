#pragma once

#include <cstdio>
#include <filesystem>
#include <limits>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "nowcast/data.hpp"
#include "nowcast/graph.hpp"
#include "nowcast/model_io.hpp"
#include "nowcast/nn.hpp"
#include "nowcast/optim.hpp"

namespace nowcast {

struct EpochStats {
    int epoch = 0;           // 1-based
    double train_loss = 0;   // mean of per-step losses
    double valid_loss = 0;
    double final_lr = 0;     // lr used by the last step of the epoch
};

struct FitResult {
    std::vector<EpochStats> epochs;
    std::vector<std::string> checkpoint_paths;  // empty when out_dir is unset
};

// one line per epoch: epoch, mean train loss, valid loss, final lr
inline std::string manifest_text(const FitResult& r) {
    std::ostringstream os;
    os << "# epoch train_loss valid_loss final_lr\n";
    for (const auto& e : r.epochs) {
        os << e.epoch << ' ' << std::setprecision(17) << e.train_loss << ' ' << e.valid_loss
           << ' ' << e.final_lr << '\n';
    }
    return os.str();
}

template <typename S>
double mean_mse(Model<S>& model, const FrameDataset& ds, const SampleLayout& layout,
                int batch_size) {
    const auto starts = window_starts(ds, layout);
    if (starts.empty()) return std::numeric_limits<double>::quiet_NaN();
    double total = 0;
    std::int64_t count = 0;
    for (std::size_t i = 0; i < starts.size(); i += static_cast<std::size_t>(batch_size)) {
        const std::size_t hi = std::min(starts.size(), i + static_cast<std::size_t>(batch_size));
        std::vector<std::int64_t> chunk(starts.begin() + static_cast<std::ptrdiff_t>(i),
                                        starts.begin() + static_cast<std::ptrdiff_t>(hi));
        auto [x, y] = assemble_batch<S>(ds, chunk, layout);
        Tensor<S> pred = model.forward(x, false);
        total += static_cast<double>((pred.values() - y.values()).square().sum());
        count += pred.numel();
    }
    return total / static_cast<double>(count);
}

// The training recipe: shuffled mini-batches, MSE loss, backward, cosine
// schedule (optionally constant), Adam step, gradient reset. Deterministic
// for a fixed seed.
template <typename S>
FitResult fit(Model<S>& model, const FrameDataset& train, const FrameDataset& valid,
              const SampleLayout& layout, const TrainConfig& cfg) {
    cfg.validate();
    layout.validate(train);
    check_config(layout.in_channels(train.dyn_channels, train.static_channels) ==
                     model.spec.in_channels,
                 "layout produces " +
                     std::to_string(layout.in_channels(train.dyn_channels,
                                                       train.static_channels)) +
                     " input planes, model expects " + std::to_string(model.spec.in_channels));
    check_config(layout.out_channels(train.dyn_channels) == model.spec.out_channels,
                 "layout produces " + std::to_string(layout.out_channels(train.dyn_channels)) +
                     " target planes, model expects " + std::to_string(model.spec.out_channels));

    std::vector<std::int64_t> starts = window_starts(train, layout);
    if (starts.empty())
        throw ConfigError("training dataset yields no windows (T=" +
                          std::to_string(train.frames) + ", t_in+t_out=" +
                          std::to_string(layout.t_in + layout.t_out) + ")");

    const std::int64_t steps_per_epoch =
        (static_cast<std::int64_t>(starts.size()) + cfg.batch_size - 1) / cfg.batch_size;
    CawrsState sched;
    sched.t_i = cfg.cawrs_t0 > 0 ? cfg.cawrs_t0 : steps_per_epoch;
    sched.t_mult = cfg.cawrs_t_mult;

    Adam<S> opt(model.store.params, cfg.beta1, cfg.beta2, cfg.adam_eps);
    Rng shuffle_rng(cfg.seed);
    FitResult result;
    std::vector<double> recent_losses;

    const bool writing = !cfg.out_dir.empty();
    if (writing) std::filesystem::create_directories(cfg.out_dir);
    auto checkpoint = [&](int epoch) {
        char name[32];
        std::snprintf(name, sizeof(name), "ckpt_epoch%03d.smck", epoch);
        const std::string path = cfg.out_dir + "/" + name;
        save_model(model, path);
        result.checkpoint_paths.push_back(path);
    };

    std::int64_t step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(starts.begin(), starts.end());
        double loss_sum = 0;
        double lr = cfg.lr_max;
        std::int64_t n_steps = 0;
        for (std::size_t i = 0; i < starts.size(); i += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t hi =
                std::min(starts.size(), i + static_cast<std::size_t>(cfg.batch_size));
            std::vector<std::int64_t> chunk(starts.begin() + static_cast<std::ptrdiff_t>(i),
                                            starts.begin() + static_cast<std::ptrdiff_t>(hi));
            auto [x, y] = assemble_batch<S>(train, chunk, layout);
            double loss_value;
            {
                Graph<S> tape;
                Tensor<S> pred = model.forward(x, true);
                Tensor<S> loss = mse_loss(pred, y);
                loss_value = static_cast<double>(loss[0]);
                if (!std::isfinite(loss_value)) {
                    std::ostringstream os;
                    os << "non-finite loss " << loss_value << " at step " << step << " (epoch "
                       << epoch << "), lr " << lr << "; last losses:";
                    for (double v : recent_losses) os << ' ' << v;
                    throw NumericError(os.str());
                }
                tape.backward(loss);
            }
            lr = cfg.cosine_schedule ? cawrs_lr(sched, cfg.lr_max, cfg.lr_min) : cfg.lr_max;
            opt.step(lr);
            opt.zero_grad();
            cawrs_advance(sched);
            ++step;
            ++n_steps;
            loss_sum += loss_value;
            recent_losses.push_back(loss_value);
            if (recent_losses.size() > 8) recent_losses.erase(recent_losses.begin());
        }
        EpochStats es;
        es.epoch = epoch;
        es.train_loss = loss_sum / static_cast<double>(n_steps);
        es.valid_loss = mean_mse(model, valid, layout, cfg.batch_size);
        es.final_lr = lr;
        result.epochs.push_back(es);
        if (writing && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 &&
            epoch != cfg.epochs)
            checkpoint(epoch);
    }
    if (writing) {
        checkpoint(cfg.epochs);
        std::ofstream mf(cfg.out_dir + "/manifest.txt");
        mf << manifest_text(result);
    }
    return result;
}

}  // namespace nowcast
