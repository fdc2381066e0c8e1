#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cgm/core/error.hpp"
#include "cgm/quantum/hamiltonian.hpp"
#include "cgm/quantum/state.hpp"

namespace cgm::quantum {

struct Breakpoint {
    double time = 0.0;
    double omega = 0.0;
    double delta = 0.0;
};

/// Piecewise-linear (Omega, Delta) protocol over [0, T].
class Schedule {
  public:
    Schedule() = default;
    explicit Schedule(std::vector<Breakpoint> points) : points_(std::move(points)) {
        CGM_REQUIRE(points_.size() >= 2, InvalidArgument, "schedule needs >= 2 breakpoints");
        CGM_REQUIRE(points_.front().time == 0.0, InvalidArgument, "schedule must start at t=0");
        for (std::size_t i = 1; i < points_.size(); ++i) {
            CGM_REQUIRE(points_[i].time > points_[i - 1].time, InvalidArgument,
                        "schedule times must be strictly increasing");
        }
    }

    [[nodiscard]] double total_time() const { return points_.back().time; }
    [[nodiscard]] const std::vector<Breakpoint> &breakpoints() const { return points_; }

    [[nodiscard]] Breakpoint at(double t) const {
        if (t <= points_.front().time) {
            return {t, points_.front().omega, points_.front().delta};
        }
        for (std::size_t i = 1; i < points_.size(); ++i) {
            if (t <= points_[i].time) {
                const auto &a = points_[i - 1];
                const auto &b = points_[i];
                const double f = (t - a.time) / (b.time - a.time);
                return {t, a.omega + f * (b.omega - a.omega), a.delta + f * (b.delta - a.delta)};
            }
        }
        return {t, points_.back().omega, points_.back().delta};
    }

    /// Same shape stretched to a new total time.
    [[nodiscard]] Schedule scaled_to(double total) const {
        std::vector<Breakpoint> p = points_;
        const double f = total / total_time();
        for (auto &b : p) {
            b.time *= f;
        }
        return Schedule(std::move(p));
    }

  private:
    std::vector<Breakpoint> points_;
};

/// Fraction of the protocol spent ramping Omega up at fixed negative detuning.
inline constexpr double kRabiRampFraction = 0.1;

/**
 * Default preparation protocol: Omega ramps 0 -> omega_final over the first
 * 10% of T at detuning delta_initial, then Delta sweeps linearly to
 * delta_final while Omega is held. Shorter or longer T rescale the shape.
 */
inline Schedule default_schedule(double total_time, double omega_final, double delta_final,
                                 double delta_initial) {
    CGM_REQUIRE(total_time > 0.0, InvalidArgument, "evolution time must be positive");
    return Schedule({{0.0, 0.0, delta_initial},
                     {kRabiRampFraction * total_time, omega_final, delta_initial},
                     {total_time, omega_final, delta_final}});
}

/// delta_initial used by the presets: -2 Omega.
inline Schedule default_schedule(double total_time, double omega_final, double delta_final) {
    return default_schedule(total_time, omega_final, delta_final, -2.0 * omega_final);
}

struct EvolutionOptions {
    double dt = 1e-3;
    double max_norm_drift = 1e-6;
    /// Times (us) at which `observer` receives the current state.
    std::vector<double> observe_times;
    std::function<void(double, const StateVector &)> observer;
};

/**
 * Integrates i d|psi>/dt = H(t)|psi> from |g...g> with fixed-step RK4.
 *
 * Positions and V0 come from `system`; Omega and Delta follow `schedule`.
 * Each step shifts H by the diagonal energy expectation (a global phase only)
 * to keep the integrator well inside its stability region, then renormalises.
 * The returned state has its global phase fixed.
 */
inline StateVector evolve_adiabatic(const RydbergSystem &system, const Schedule &schedule,
                                    const EvolutionOptions &opt = {}) {
    const int n = system.sites();
    CGM_REQUIRE(n >= 1 && n <= kDefaultMaxQubits, ConfigError,
                "evolve_adiabatic: qubit count out of range");
    CGM_REQUIRE(opt.dt > 0.0, InvalidArgument, "dt must be positive");
    const double total = schedule.total_time();
    const auto steps = static_cast<long>(std::ceil(total / opt.dt - 1e-9));
    const double h = total / static_cast<double>(steps);

    const auto vint = rydberg_interaction_diagonal(system);
    const auto counts = occupation_count(n);
    const std::size_t d = vint.size();

    StateVector psi = StateVector::basis(n, 0);
    std::vector<Complex> k1(d), k2(d), k3(d), k4(d), tmp(d);
    const Complex minus_i(0.0, -1.0);

    auto rhs = [&](double t, double shift, const std::vector<Complex> &in,
                   std::vector<Complex> &out) {
        const auto bp = schedule.at(t);
        for (std::size_t s = 0; s < d; ++s) {
            out[s] = (vint[s] - bp.delta * counts[s] - shift) * in[s];
        }
        if (bp.omega != 0.0) {
            const double half = 0.5 * bp.omega;
            for (int i = 0; i < n; ++i) {
                const std::uint64_t mask = site_mask(i, n);
                for (std::size_t s = 0; s < d; ++s) {
                    out[s] += half * in[s ^ mask];
                }
            }
        }
        for (auto &v : out) {
            v *= minus_i;
        }
    };

    std::size_t next_obs = 0;
    auto observe = [&](double t) {
        while (opt.observer && next_obs < opt.observe_times.size() &&
               opt.observe_times[next_obs] <= t + 0.5 * h) {
            StateVector snap = psi;
            snap.fix_global_phase();
            opt.observer(t, snap);
            ++next_obs;
        }
    };
    observe(0.0);

    std::vector<Complex> cur(psi.amplitudes().begin(), psi.amplitudes().end());
    for (long step = 0; step < steps; ++step) {
        const double t = h * static_cast<double>(step);
        const auto bp = schedule.at(t);
        double shift = 0.0;
        for (std::size_t s = 0; s < d; ++s) {
            shift += std::norm(cur[s]) * (vint[s] - bp.delta * counts[s]);
        }
        rhs(t, shift, cur, k1);
        for (std::size_t s = 0; s < d; ++s) {
            tmp[s] = cur[s] + 0.5 * h * k1[s];
        }
        rhs(t + 0.5 * h, shift, tmp, k2);
        for (std::size_t s = 0; s < d; ++s) {
            tmp[s] = cur[s] + 0.5 * h * k2[s];
        }
        rhs(t + 0.5 * h, shift, tmp, k3);
        for (std::size_t s = 0; s < d; ++s) {
            tmp[s] = cur[s] + h * k3[s];
        }
        rhs(t + h, shift, tmp, k4);
        double norm2 = 0.0;
        for (std::size_t s = 0; s < d; ++s) {
            cur[s] += (h / 6.0) * (k1[s] + 2.0 * k2[s] + 2.0 * k3[s] + k4[s]);
            norm2 += std::norm(cur[s]);
        }
        const double drift = std::abs(std::sqrt(norm2) - 1.0);
        if (drift > opt.max_norm_drift) {
            throw NumericalError("evolve_adiabatic: norm drift " + std::to_string(drift) +
                                 " at t=" + std::to_string(t) + " exceeds tolerance; reduce dt");
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (auto &v : cur) {
            v *= inv;
        }
        std::copy(cur.begin(), cur.end(), psi.amplitudes().begin());
        observe(t + h);
    }
    psi.fix_global_phase();
    return psi;
}

/// Overload with an explicit step size, the common call shape.
inline StateVector evolve_adiabatic(const RydbergSystem &system, const Schedule &schedule,
                                    double dt) {
    EvolutionOptions opt;
    opt.dt = dt;
    return evolve_adiabatic(system, schedule, opt);
}

} // namespace cgm::quantum
