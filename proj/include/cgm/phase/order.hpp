#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "cgm/core/error.hpp"
#include "cgm/measurement/dataset.hpp"
#include "cgm/quantum/lattice.hpp"
#include "cgm/quantum/state.hpp"

namespace cgm::phase {

using measurement::Outcome;
using quantum::GridDims;

/// Bitstrings with optional probabilities. Without weights every shot
/// counts equally; with weights the average is exact over a distribution.
struct Shots {
    std::vector<Outcome> outcomes;
    std::vector<double> weights;

    Shots() = default;
    Shots(std::vector<Outcome> o) : outcomes(std::move(o)) {} // NOLINT(implicit)
    Shots(std::vector<Outcome> o, std::vector<double> w)
        : outcomes(std::move(o)), weights(std::move(w)) {
        CGM_REQUIRE(weights.size() == outcomes.size(), InvalidArgument,
                    "one weight per outcome required");
    }

    template <class F> [[nodiscard]] double average(F &&f) const {
        CGM_REQUIRE(!outcomes.empty(), NoDataError, "order parameter of an empty shot set");
        double s = 0.0;
        double wsum = 0.0;
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            const double w = weights.empty() ? 1.0 : weights[i];
            s += w * f(outcomes[i]);
            wsum += w;
        }
        return s / wsum;
    }
};

/// Every basis state with its Born probability (entries below `cutoff`
/// dropped); averages over it are exact expectations.
inline Shots exact_shots(const quantum::StateVector &psi, double cutoff = 1e-14) {
    const int n = psi.qubits();
    const auto p = psi.probabilities();
    Shots s;
    for (std::size_t idx = 0; idx < p.size(); ++idx) {
        if (p[idx] <= cutoff) {
            continue;
        }
        Outcome o(static_cast<std::size_t>(n));
        for (int site = 0; site < n; ++site) {
            o[static_cast<std::size_t>(site)] =
                static_cast<std::uint8_t>(quantum::site_bit(idx, site, n));
        }
        s.outcomes.push_back(std::move(o));
        s.weights.push_back(p[idx]);
    }
    return s;
}

namespace detail {

inline double sublattice_order(const Shots &shots, int period, bool normalized) {
    return shots.average([&](const Outcome &o) {
        const auto n = static_cast<int>(o.size());
        CGM_REQUIRE(n >= 1, InvalidArgument, "empty bitstring");
        double count = 0.0;
        int m = 0;
        for (int i = 0; i < n; i += period) {
            count += o[static_cast<std::size_t>(i)];
            ++m;
        }
        return count / (normalized ? m : n);
    });
}

} // namespace detail

/// Mean excitation on sites 0, 2, 4, ... divided by the sublattice size
/// (`normalized`) or by the chain length.
inline double order_z2(const Shots &shots, bool normalized = true) {
    return detail::sublattice_order(shots, 2, normalized);
}

/// As order_z2 on sites 0, 3, 6, ...
inline double order_z3(const Shots &shots, bool normalized = true) {
    return detail::sublattice_order(shots, 3, normalized);
}

/// |sum_j exp(i (k1 col_j + k2 row_j)) N_j| / sqrt(n) for one shot.
inline double fourier_single(const Outcome &o, GridDims dims, double k1, double k2) {
    CGM_REQUIRE(static_cast<int>(o.size()) == dims.sites(), InvalidArgument,
                "bitstring length does not match lattice");
    std::complex<double> s = 0.0;
    for (int j = 0; j < dims.sites(); ++j) {
        if (o[static_cast<std::size_t>(j)] != 0) {
            s += std::polar(1.0, k1 * dims.col_of(j) + k2 * dims.row_of(j));
        }
    }
    return std::abs(s) / std::sqrt(static_cast<double>(dims.sites()));
}

inline double fourier_amplitude(const Shots &shots, GridDims dims, double k1, double k2) {
    return shots.average([&](const Outcome &o) { return fourier_single(o, dims, k1, k2); });
}

inline double symmetric_fourier(const Shots &shots, GridDims dims, double k1, double k2) {
    return 0.5 * (fourier_amplitude(shots, dims, k1, k2) + fourier_amplitude(shots, dims, k2, k1));
}

enum class Order2d { checkboard, striated, star, staggered };

inline double order_2d(const Shots &shots, GridDims dims, Order2d which) {
    constexpr double pi = std::numbers::pi;
    switch (which) {
    case Order2d::checkboard:
        return fourier_amplitude(shots, dims, pi, pi) - symmetric_fourier(shots, dims, pi, 0.0);
    case Order2d::striated:
        return symmetric_fourier(shots, dims, pi, 0.0) -
               symmetric_fourier(shots, dims, pi / 2, pi);
    case Order2d::star:
        return symmetric_fourier(shots, dims, pi, pi / 2);
    case Order2d::staggered:
        return 0.25 * (fourier_amplitude(shots, dims, pi / 2, pi / 2) +
                       fourier_amplitude(shots, dims, pi / 2, -pi / 2) +
                       fourier_amplitude(shots, dims, -pi / 2, pi / 2) +
                       fourier_amplitude(shots, dims, -pi / 2, -pi / 2));
    }
    throw InvalidArgument("unknown 2D order parameter");
}

// ---- classification --------------------------------------------------------

inline constexpr double kZ2Threshold = 0.7;
inline constexpr double kZ3Threshold = 0.6;
inline constexpr double k2dThreshold = 0.65;
inline constexpr double kCheckboardScale = 1.6;
inline constexpr double kStriatedScale = 0.8;
/// Margins closer than this count as a tie.
inline constexpr double kTieTolerance = 1e-9;

/// Z2 above 0.7, Z3 above 0.6; both above: larger margin, ties to Z2.
inline std::string classify_1d(double o_z2, double o_z3) {
    const double m2 = o_z2 - kZ2Threshold;
    const double m3 = o_z3 - kZ3Threshold;
    const bool z2 = m2 > 0.0;
    const bool z3 = m3 > 0.0;
    if (z2 && z3) {
        return m3 > m2 + kTieTolerance ? "Z3" : "Z2";
    }
    if (z2) {
        return "Z2";
    }
    if (z3) {
        return "Z3";
    }
    return "disordered";
}

/// Rescaled checkboard/1.6, striated/0.8 and staggered compared against
/// 0.65; the largest wins, ties go to the earlier of (checkboard, striated,
/// staggered).
inline std::string classify_2d(double checkboard, double striated, double staggered) {
    const std::pair<const char *, double> cand[] = {{"checkboard", checkboard / kCheckboardScale},
                                                    {"striated", striated / kStriatedScale},
                                                    {"staggered", staggered}};
    const char *best = "disordered";
    double best_v = k2dThreshold;
    bool found = false;
    for (const auto &[name, v] : cand) {
        if (v > k2dThreshold && (!found || v > best_v + kTieTolerance)) {
            best = name;
            best_v = v;
            found = true;
        }
    }
    return best;
}

// ---- phase diagrams --------------------------------------------------------

struct PhasePoint {
    double r0_over_a = 0.0;
    double delta_over_omega = 0.0;
    double T = 0.0;
    int n_rows = 1;
    int n_cols = 1;
    double o_z2 = 0.0;
    double o_z3 = 0.0;
    double o_checkboard = 0.0;
    double o_striated = 0.0;
    double o_star = 0.0;
    double o_staggered = 0.0;
    std::string label;
    std::string source;
};

/// All order parameters of one grid point plus its label (1D rule for
/// single-row lattices, 2D rule otherwise).
inline PhasePoint phase_point(const measurement::RydbergParams &p, const Shots &shots,
                              const std::string &source, bool normalized_1d = true) {
    const GridDims dims{p.n_rows, p.n_cols};
    PhasePoint pt;
    pt.r0_over_a = p.r0_over_a;
    pt.delta_over_omega = p.delta_over_omega();
    pt.T = p.T;
    pt.n_rows = p.n_rows;
    pt.n_cols = p.n_cols;
    pt.o_z2 = order_z2(shots, normalized_1d);
    pt.o_z3 = order_z3(shots, normalized_1d);
    pt.o_checkboard = order_2d(shots, dims, Order2d::checkboard);
    pt.o_striated = order_2d(shots, dims, Order2d::striated);
    pt.o_star = order_2d(shots, dims, Order2d::star);
    pt.o_staggered = order_2d(shots, dims, Order2d::staggered);
    pt.label = p.n_rows == 1 ? classify_1d(pt.o_z2, pt.o_z3)
                             : classify_2d(pt.o_checkboard, pt.o_striated, pt.o_staggered);
    pt.source = source;
    return pt;
}

inline const char *kPhaseHeader = "R0_over_a,delta_over_omega,T,n_rows,n_cols,O_z2,O_z3,"
                                  "O_checkboard,O_striated,O_star,O_staggered,label,source";

inline void write_phase_csv(const std::vector<PhasePoint> &pts, std::ostream &os) {
    using measurement::format_real;
    os << kPhaseHeader << '\n';
    for (const auto &p : pts) {
        os << format_real(p.r0_over_a) << ',' << format_real(p.delta_over_omega) << ','
           << format_real(p.T) << ',' << p.n_rows << ',' << p.n_cols << ','
           << format_real(p.o_z2) << ',' << format_real(p.o_z3) << ','
           << format_real(p.o_checkboard) << ',' << format_real(p.o_striated) << ','
           << format_real(p.o_star) << ',' << format_real(p.o_staggered) << ',' << p.label
           << ',' << p.source << '\n';
    }
}

} // namespace cgm::phase
