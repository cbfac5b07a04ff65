#pragma once

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "nowcast/data.hpp"
#include "nowcast/nn.hpp"

namespace nowcast {

struct EvalEntry {
    std::string name;
    std::string kind;  // "persistence" | "model" | "ensemble"
    double raw_mse = 0;
    bool normalized_valid = false;
    double normalized = 0;
    std::vector<double> per_lead;          // t_out values; mean equals raw_mse
    std::vector<std::string> members;      // ensemble member names
};

struct EvalReport {
    std::vector<EvalEntry> entries;  // persistence row first
    std::int64_t sample_count = 0;
    int lead_count = 0;
    bool persistence_undefined = false;  // persistence raw MSE is zero
};

// Repeats the last observed frame's target channels for every lead time.
// input is an assembled (B,C_in,H,W) batch; output matches the target layout.
template <typename S>
Tensor<S> persistence_predict(const Tensor<S>& input, const SampleLayout& layout,
                              std::int64_t c_dyn, std::int64_t c_static) {
    detail::check_4d(input.shape(), "persistence input");
    const std::int64_t expect = layout.in_channels(c_dyn, c_static);
    check_dim(input.dim(1) == expect, "persistence input has " + std::to_string(input.dim(1)) +
                                          " planes, layout expects " + std::to_string(expect));
    const std::int64_t B = input.dim(0), H = input.dim(2), W = input.dim(3);
    const auto targets = layout.targets(c_dyn);
    const std::int64_t ct = static_cast<std::int64_t>(targets.size());
    const std::int64_t frame_block = layout.statics_per_frame ? c_dyn + c_static : c_dyn;
    const std::int64_t last = static_cast<std::int64_t>(layout.t_in - 1) * frame_block;

    Tensor<S> out = Tensor<S>::uninit({B, layout.t_out * ct, H, W});
    const std::int64_t hw = H * W;
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t i = 0; i < ct; ++i) {
            const S* src = input.data() + (b * input.dim(1) + last + targets[static_cast<std::size_t>(i)]) * hw;
            for (int lead = 0; lead < layout.t_out; ++lead) {
                S* dst = out.data() + (b * layout.t_out * ct + lead * ct + i) * hw;
                std::memcpy(dst, src, static_cast<std::size_t>(hw) * sizeof(S));
            }
        }
    return out;
}

inline double normalized_score(double raw, double persistence_raw) {
    check_config(persistence_raw > 0, "normalization undefined: persistence raw MSE is zero");
    return raw / persistence_raw;
}

// Unweighted elementwise mean of member predictions.
template <typename S>
Tensor<S> ensemble_predict(const std::vector<Tensor<S>>& members) {
    check_config(!members.empty(), "ensemble needs at least one member");
    Tensor<S> out = members[0].clone();
    for (std::size_t i = 1; i < members.size(); ++i) {
        check_dim(members[i].shape() == out.shape(),
                  "ensemble member shapes differ: " + members[i].shape().str() + " vs " +
                      out.shape().str());
        out.values() += members[i].values();
    }
    out.values() /= static_cast<S>(members.size());
    return out;
}

namespace detail {

// per-lead sum of squared errors, accumulated in deterministic batch order
template <typename S>
void accumulate_sse(const Tensor<S>& pred, const Tensor<S>& target, std::int64_t lead_count,
                    std::vector<double>& sse) {
    const std::int64_t B = pred.dim(0), C = pred.dim(1), hw = pred.dim(2) * pred.dim(3);
    const std::int64_t per_lead = C / lead_count;
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t c = 0; c < C; ++c) {
            Eigen::Map<const ArrayX<S>> p(pred.data() + (b * C + c) * hw, hw);
            Eigen::Map<const ArrayX<S>> t(target.data() + (b * C + c) * hw, hw);
            sse[static_cast<std::size_t>(c / per_lead)] +=
                static_cast<double>((p - t).square().sum());
        }
}

}  // namespace detail

// Scores persistence, each model and each ensemble over every window of the
// dataset. Errors are computed on normalized target channels.
template <typename S>
EvalReport evaluate(std::vector<std::pair<std::string, Model<S>*>> models,
                    const std::vector<std::pair<std::string, std::vector<std::size_t>>>& ensembles,
                    const FrameDataset& ds, const SampleLayout& layout, int batch_size = 16) {
    layout.validate(ds);
    for (auto& [name, ens] : ensembles)
        for (std::size_t m : ens)
            check_config(m < models.size(), "ensemble '" + name + "' references model #" +
                                                std::to_string(m) + " of " +
                                                std::to_string(models.size()));
    const auto starts = window_starts(ds, layout);
    if (starts.empty())
        throw ConfigError("evaluation dataset yields no windows (T=" +
                          std::to_string(ds.frames) + ")");

    const int leads = layout.t_out;
    const std::size_t n_entries = 1 + models.size() + ensembles.size();
    std::vector<std::vector<double>> sse(n_entries, std::vector<double>(static_cast<std::size_t>(leads), 0.0));
    std::int64_t per_lead_count = 0;

    for (std::size_t i = 0; i < starts.size(); i += static_cast<std::size_t>(batch_size)) {
        const std::size_t hi = std::min(starts.size(), i + static_cast<std::size_t>(batch_size));
        std::vector<std::int64_t> chunk(starts.begin() + static_cast<std::ptrdiff_t>(i),
                                        starts.begin() + static_cast<std::ptrdiff_t>(hi));
        auto [x, y] = assemble_batch<S>(ds, chunk, layout);
        per_lead_count += y.numel() / leads;

        Tensor<S> pers = persistence_predict(x, layout, ds.dyn_channels, ds.static_channels);
        detail::accumulate_sse(pers, y, leads, sse[0]);

        std::vector<Tensor<S>> preds(models.size());
        for (std::size_t m = 0; m < models.size(); ++m) {
            preds[m] = models[m].second->forward(x, false);
            detail::accumulate_sse(preds[m], y, leads, sse[1 + m]);
        }
        for (std::size_t e = 0; e < ensembles.size(); ++e) {
            std::vector<Tensor<S>> members;
            for (std::size_t m : ensembles[e].second) members.push_back(preds[m]);
            Tensor<S> ens = ensemble_predict(members);
            detail::accumulate_sse(ens, y, leads, sse[1 + models.size() + e]);
        }
    }

    EvalReport report;
    report.sample_count = static_cast<std::int64_t>(starts.size());
    report.lead_count = leads;

    auto finish = [&](const std::string& name, const std::string& kind, std::size_t idx) {
        EvalEntry e;
        e.name = name;
        e.kind = kind;
        e.per_lead.resize(static_cast<std::size_t>(leads));
        double total = 0;
        for (int l = 0; l < leads; ++l) {
            e.per_lead[static_cast<std::size_t>(l)] =
                sse[idx][static_cast<std::size_t>(l)] / static_cast<double>(per_lead_count);
            total += sse[idx][static_cast<std::size_t>(l)];
        }
        e.raw_mse = total / static_cast<double>(per_lead_count * leads);
        return e;
    };

    EvalEntry pers = finish("persistence", "persistence", 0);
    report.persistence_undefined = !(pers.raw_mse > 0);
    if (!report.persistence_undefined) {
        pers.normalized_valid = true;
        pers.normalized = 1.0;  // by construction
    }
    report.entries.push_back(pers);

    for (std::size_t m = 0; m < models.size(); ++m) {
        EvalEntry e = finish(models[m].first, "model", 1 + m);
        if (!report.persistence_undefined) {
            e.normalized_valid = true;
            e.normalized = e.raw_mse / report.entries[0].raw_mse;
        }
        report.entries.push_back(e);
    }
    for (std::size_t en = 0; en < ensembles.size(); ++en) {
        EvalEntry e = finish(ensembles[en].first, "ensemble", 1 + models.size() + en);
        for (std::size_t m : ensembles[en].second) e.members.push_back(models[m].first);
        if (!report.persistence_undefined) {
            e.normalized_valid = true;
            e.normalized = e.raw_mse / report.entries[0].raw_mse;
        }
        report.entries.push_back(e);
    }
    return report;
}

}  // namespace nowcast
