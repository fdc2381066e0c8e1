#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "cgm/core/random.hpp"
#include "cgm/nn/layers.hpp"

namespace cgm::nn {

struct GradCheckOptions {
    double step = 1e-5;
    double tolerance = 1e-6;
    /// Denominator floor so entries with near-zero gradient are judged on
    /// absolute error instead of blowing up the ratio.
    double floor = 1e-6;
    /// Entries checked per parameter (all when 0); picked with `seed`.
    std::size_t max_entries = 0;
    std::uint64_t seed = 0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_parameter;
    std::size_t checked = 0;
    bool passed = false;
};

/**
 * Compares backward() gradients of a scalar loss against central finite
 * differences for every parameter in `params` (64-bit).
 */
inline GradCheckReport grad_check(ParameterSet<double> &params,
                                  const std::function<Var<double>()> &loss_fn,
                                  const GradCheckOptions &opt = {}) {
    params.zero_grad();
    {
        const Var<double> loss = loss_fn();
        backward(loss);
    }
    GradCheckReport rep;
    Rng rng(opt.seed);
    for (auto &p : params.items()) {
        auto &w = p.var.mutable_value();
        const Mat<double> analytic =
            p.var.grad().size() == 0 ? Mat<double>::Zero(w.rows(), w.cols()) : p.var.grad();
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(w.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            idx[i] = static_cast<Eigen::Index>(i);
        }
        if (opt.max_entries > 0 && idx.size() > opt.max_entries) {
            shuffle(idx.begin(), idx.end(), rng);
            idx.resize(opt.max_entries);
        }
        NoGradGuard guard;
        for (Eigen::Index k : idx) {
            const double orig = w.data()[k];
            w.data()[k] = orig + opt.step;
            const double up = loss_fn().item();
            w.data()[k] = orig - opt.step;
            const double down = loss_fn().item();
            w.data()[k] = orig;
            const double numeric = (up - down) / (2.0 * opt.step);
            const double a = analytic.data()[k];
            const double denom = std::max({std::abs(a), std::abs(numeric), opt.floor});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > rep.max_rel_error || rep.worst_parameter.empty()) {
                rep.max_rel_error = std::max(rel, rep.max_rel_error);
                rep.worst_parameter = p.name;
            }
            ++rep.checked;
        }
    }
    rep.passed = rep.max_rel_error <= opt.tolerance;
    params.zero_grad();
    return rep;
}

} // namespace cgm::nn
