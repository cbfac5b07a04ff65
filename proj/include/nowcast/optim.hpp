#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "nowcast/tensor.hpp"

namespace nowcast {

// Training recipe. Schedule stepping is per optimizer step; cawrs_t0 == 0
// means "one epoch's worth of steps", resolved when the dataset is known.
struct TrainConfig {
    int epochs = 10;
    double lr_max = 1e-3;
    double lr_min = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    std::int64_t cawrs_t0 = 0;
    int cawrs_t_mult = 2;
    bool cosine_schedule = true;  // false trains at constant lr_max
    int batch_size = 16;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;  // epochs between checkpoints; 0 = final only
    std::string out_dir;       // empty = keep everything in memory

    void validate() const {
        check_config(epochs >= 1, "epochs must be >= 1");
        check_config(lr_min <= lr_max, "lr_min must not exceed lr_max");
        check_config(batch_size >= 1, "batch_size must be >= 1");
        check_config(cawrs_t_mult >= 1, "cawrs_t_mult must be >= 1");
        check_config(cawrs_t0 >= 0, "cawrs_t0 must be >= 0 (0 = one epoch)");
        check_config(checkpoint_every >= 0, "checkpoint_every must be >= 0");
    }
};

// Cosine annealing with warm restarts: eta ranges over [lr_min, lr_max]
// within a cycle of t_i steps, then restarts with t_i *= t_mult.
struct CawrsState {
    std::int64_t t_cur = 0;
    std::int64_t t_i = 1;
    int t_mult = 2;
};

inline double cawrs_lr(const CawrsState& s, double lr_max, double lr_min) {
    constexpr double pi = 3.14159265358979323846;
    const double phase = static_cast<double>(s.t_cur) / static_cast<double>(s.t_i);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(pi * phase));
}

inline void cawrs_advance(CawrsState& s) {
    if (++s.t_cur >= s.t_i) {
        s.t_cur = 0;
        s.t_i *= s.t_mult;
    }
}

// Adam with bias correction. step() leaves gradients untouched; the caller
// resets them between steps.
template <typename S>
class Adam {
public:
    Adam(std::vector<std::pair<std::string, Tensor<S>>>& params, double beta1 = 0.9,
         double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (auto& [name, t] : params) {
            Slot s;
            s.name = name;
            s.param = t;
            s.m = ArrayX<S>::Zero(t.numel());
            s.v = ArrayX<S>::Zero(t.numel());
            slots_.push_back(std::move(s));
        }
    }

    void step(double lr) {
        ++t_;
        const S b1 = static_cast<S>(beta1_), b2 = static_cast<S>(beta2_);
        const S bc1 = S(1) - static_cast<S>(std::pow(beta1_, static_cast<double>(t_)));
        const S bc2 = S(1) - static_cast<S>(std::pow(beta2_, static_cast<double>(t_)));
        for (auto& s : slots_) {
            check_contract(s.param.has_grad(),
                           "adam_step: parameter '" + s.name + "' has no gradient");
            const ArrayX<S>& g = s.param.grad();
            s.m = b1 * s.m + (S(1) - b1) * g;
            s.v = b2 * s.v + (S(1) - b2) * g * g;
            s.param.values() -=
                static_cast<S>(lr) * (s.m / bc1) / ((s.v / bc2).sqrt() + static_cast<S>(eps_));
        }
    }

    void zero_grad() {
        for (auto& s : slots_) s.param.zero_grad();
    }

    std::int64_t step_count() const { return t_; }

private:
    struct Slot {
        std::string name;
        Tensor<S> param;
        ArrayX<S> m, v;
    };
    std::vector<Slot> slots_;
    std::int64_t t_ = 0;
    double beta1_, beta2_, eps_;
};

}  // namespace nowcast
