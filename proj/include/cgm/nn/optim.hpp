#pragma once

#include <cmath>
#include <numbers>

#include "cgm/core/error.hpp"
#include "cgm/nn/layers.hpp"

namespace cgm::nn {

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One bias-corrected Adam update of every parameter that has a gradient.
/// Missing gradients count as zero. A non-finite gradient aborts before any
/// parameter is touched.
template <class T>
void adam_step(ParameterSet<T> &params, double lr, const AdamOptions &opt = {}) {
    for (const auto &p : params.items()) {
        if (p.var.grad().size() != 0 && !p.var.grad().allFinite()) {
            throw NumericalError("non-finite gradient in parameter " + p.name);
        }
    }
    const T b1 = static_cast<T>(opt.beta1);
    const T b2 = static_cast<T>(opt.beta2);
    for (auto &p : params.items()) {
        ++p.step;
        const T c1 = T(1) - static_cast<T>(std::pow(opt.beta1, static_cast<double>(p.step)));
        const T c2 = T(1) - static_cast<T>(std::pow(opt.beta2, static_cast<double>(p.step)));
        if (p.var.grad().size() == 0) {
            p.m *= b1;
            p.v *= b2;
        } else {
            const auto &g = p.var.grad();
            p.m = b1 * p.m + (T(1) - b1) * g;
            p.v = b2 * p.v + (T(1) - b2) * g.cwiseProduct(g);
        }
        auto &w = p.var.mutable_value();
        w.array() -= static_cast<T>(lr) * (p.m.array() / c1) /
                     ((p.v.array() / c2).sqrt() + static_cast<T>(opt.eps));
    }
}

/// Linear warmup from 0 to `peak`, then cosine decay to `floor` at `total`.
inline double lr_schedule(long step, long total, long warmup, double peak, double floor) {
    if (warmup > total) {
        throw ConfigError("warmup steps (" + std::to_string(warmup) + ") exceed total steps (" +
                          std::to_string(total) + ")");
    }
    CGM_REQUIRE(step >= 0 && step <= total, InvalidArgument,
                "lr_schedule: step " + std::to_string(step) + " outside [0, " +
                    std::to_string(total) + "]");
    if (step < warmup) {
        return peak * static_cast<double>(step) / static_cast<double>(warmup);
    }
    if (total == warmup) {
        return peak;
    }
    const double progress =
        static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
    return floor + 0.5 * (peak - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

} // namespace cgm::nn
