#pragma once

#include <cmath>
#include <vector>

#include "cgm/core/error.hpp"
#include "cgm/phase/order.hpp"

namespace cgm::baselines {

/// Baseline[T=T0]: the ground truth measured at T0 is reported for every
/// later evolution time at the same (R0/a, delta/omega, lattice).
inline phase::PhasePoint baseline_frozen_T(const std::vector<phase::PhasePoint> &truth, double t0,
                                           const phase::PhasePoint &query, double tol = 1e-9) {
    CGM_REQUIRE(query.T + tol >= t0, InvalidArgument,
                "frozen-T baseline only predicts T >= T0");
    for (const auto &p : truth) {
        if (std::abs(p.T - t0) <= tol && std::abs(p.r0_over_a - query.r0_over_a) <= tol &&
            std::abs(p.delta_over_omega - query.delta_over_omega) <= tol &&
            p.n_rows == query.n_rows && p.n_cols == query.n_cols) {
            phase::PhasePoint out = p;
            out.T = query.T;
            out.source = "baseline_T0";
            return out;
        }
    }
    throw NoDataError("no ground truth at T0 for the requested grid point");
}

} // namespace cgm::baselines
