#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cgm/core/error.hpp"
#include "cgm/quantum/lattice.hpp"
#include "cgm/quantum/state.hpp"

namespace cgm::quantum {

/// Off-diagonal term that maps |s> to |s ^ mask>. When `antiparallel_only`
/// is set the term only acts if the two flipped bits differ (XX + YY).
struct FlipTerm {
    std::uint64_t mask = 0;
    double coeff = 0.0;
    bool antiparallel_only = false;
};

/**
 * Real symmetric Hamiltonian in computational-basis form: a diagonal plus a
 * list of bit-flip terms. Both model families in this library fit this shape,
 * and it applies in O(2^n * terms) without storing a matrix.
 */
class HamiltonianOperator {
  public:
    HamiltonianOperator() = default;
    HamiltonianOperator(int n, std::vector<double> diag, std::vector<FlipTerm> flips)
        : n_(n), diag_(std::move(diag)), flips_(std::move(flips)) {
        CGM_REQUIRE(diag_.size() == (std::size_t{1} << static_cast<unsigned>(n)),
                    InvalidArgument, "diagonal length must be 2^n");
    }

    [[nodiscard]] int qubits() const { return n_; }
    [[nodiscard]] std::size_t dim() const { return diag_.size(); }
    [[nodiscard]] const std::vector<double> &diagonal() const { return diag_; }
    [[nodiscard]] const std::vector<FlipTerm> &flips() const { return flips_; }

    /// out = H * in.
    template <class Scalar>
    void apply(std::span<const Scalar> in, std::span<Scalar> out) const {
        const std::size_t d = dim();
        for (std::size_t s = 0; s < d; ++s) {
            out[s] = diag_[s] * in[s];
        }
        for (const auto &t : flips_) {
            if (t.antiparallel_only) {
                for (std::size_t s = 0; s < d; ++s) {
                    const std::uint64_t m = s & t.mask;
                    if (m != 0 && m != t.mask) {
                        out[s ^ t.mask] += t.coeff * in[s];
                    }
                }
            } else {
                for (std::size_t s = 0; s < d; ++s) {
                    out[s ^ t.mask] += t.coeff * in[s];
                }
            }
        }
    }

    [[nodiscard]] Eigen::MatrixXd to_dense() const {
        const auto d = static_cast<Eigen::Index>(dim());
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
        for (Eigen::Index s = 0; s < d; ++s) {
            h(s, s) = diag_[static_cast<std::size_t>(s)];
        }
        for (const auto &t : flips_) {
            for (Eigen::Index s = 0; s < d; ++s) {
                const auto us = static_cast<std::uint64_t>(s);
                const std::uint64_t m = us & t.mask;
                if (t.antiparallel_only && (m == 0 || m == t.mask)) {
                    continue;
                }
                h(static_cast<Eigen::Index>(us ^ t.mask), s) += t.coeff;
            }
        }
        return h;
    }

    /// Crude spectral-radius bound (diagonal max + sum of flip magnitudes).
    [[nodiscard]] double norm_bound() const {
        double m = 0.0;
        for (double v : diag_) {
            m = std::max(m, std::abs(v));
        }
        for (const auto &t : flips_) {
            m += std::abs(t.coeff);
        }
        return m;
    }

  private:
    int n_ = 0;
    std::vector<double> diag_;
    std::vector<FlipTerm> flips_;
};

/// Sum over edges of w_ij (X_i X_j + Y_i Y_j + Z_i Z_j) for an arbitrary edge
/// list; no lattice check. build_heisenberg() validates and calls this.
inline HamiltonianOperator
heisenberg_from_edges(int n, const std::vector<std::pair<std::pair<int, int>, double>> &edges) {
    CGM_REQUIRE(n >= 1 && n <= 30, InvalidArgument, "qubit count out of range");
    const std::size_t d = std::size_t{1} << static_cast<unsigned>(n);
    std::vector<double> diag(d, 0.0);
    std::vector<FlipTerm> flips;
    for (const auto &[e, w] : edges) {
        const auto [i, j] = e;
        CGM_REQUIRE(i >= 0 && j >= 0 && i < n && j < n && i != j, InvalidArgument,
                    "invalid graph: bad edge");
        if (w == 0.0) {
            continue;
        }
        for (std::size_t s = 0; s < d; ++s) {
            diag[s] += site_bit(s, i, n) == site_bit(s, j, n) ? w : -w;
        }
        // <01|XX+YY|10> = 2
        flips.push_back({site_mask(i, n) | site_mask(j, n), 2.0 * w, true});
    }
    return {n, std::move(diag), std::move(flips)};
}

inline HamiltonianOperator build_heisenberg(const CouplingGraph &graph) {
    std::vector<std::pair<std::pair<int, int>, double>> edges;
    for (const auto &[e, w] : graph.couplings()) {
        CGM_REQUIRE(graph.dims().adjacent(e.first, e.second), InvalidArgument,
                    "invalid graph: edge is not nearest-neighbour");
        edges.emplace_back(e, w);
    }
    return heisenberg_from_edges(graph.sites(), edges);
}

/// 862690 x 2 pi  rad/us um^6 (87Rb, 70S_1/2).
inline constexpr double kDefaultV0 = 862690.0 * 2.0 * std::numbers::pi;

struct Position {
    double x = 0.0;
    double y = 0.0;
};

/**
 * Rydberg atom array. Frequencies are angular (rad/us), lengths in um.
 * Basis bit 1 on a site means the atom is in |r>, so N_i is the bit value.
 */
struct RydbergSystem {
    std::vector<Position> positions;
    double omega = 0.0;
    double delta = 0.0;
    double v0 = kDefaultV0;
    double separation = 1.0;
    double evolution_time = 0.0;
    int n_rows = 1;
    int n_cols = 1;

    [[nodiscard]] int sites() const { return static_cast<int>(positions.size()); }

    /// Blockade radius R0 = (V0 / Omega)^(1/6).
    [[nodiscard]] double blockade_radius() const {
        CGM_REQUIRE(omega > 0.0, InvalidArgument, "R0 requires Omega > 0");
        return std::pow(v0 / omega, 1.0 / 6.0);
    }
    [[nodiscard]] double r0_over_a() const { return blockade_radius() / separation; }
    [[nodiscard]] double delta_over_omega() const { return omega > 0.0 ? delta / omega : 0.0; }
};

/// Square lattice (rows x cols) with spacing a; a chain is rows = 1.
inline RydbergSystem rydberg_lattice(int rows, int cols, double a, double omega, double delta,
                                     double v0 = kDefaultV0) {
    CGM_REQUIRE(rows >= 1 && cols >= 1, InvalidArgument, "lattice dims must be positive");
    CGM_REQUIRE(a > 0.0, InvalidArgument, "separation must be positive");
    RydbergSystem sys;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            sys.positions.push_back({c * a, r * a});
        }
    }
    sys.omega = omega;
    sys.delta = delta;
    sys.v0 = v0;
    sys.separation = a;
    sys.n_rows = rows;
    sys.n_cols = cols;
    return sys;
}

/// Lattice parametrised by R0/a and Delta/Omega at fixed Omega.
inline RydbergSystem rydberg_from_ratios(int rows, int cols, double r0_over_a,
                                         double delta_over_omega, double omega,
                                         double v0 = kDefaultV0) {
    CGM_REQUIRE(omega > 0.0 && r0_over_a > 0.0, InvalidArgument,
                "ratios require Omega > 0 and R0/a > 0");
    const double r0 = std::pow(v0 / omega, 1.0 / 6.0);
    return rydberg_lattice(rows, cols, r0 / r0_over_a, omega, delta_over_omega * omega, v0);
}

/// Per-basis-state interaction energy sum_{i<j} V0/|x_i-x_j|^6 n_i n_j.
inline std::vector<double> rydberg_interaction_diagonal(const RydbergSystem &sys) {
    const int n = sys.sites();
    CGM_REQUIRE(n >= 1 && n <= 30, InvalidArgument, "qubit count out of range");
    std::vector<double> vij(static_cast<std::size_t>(n * n), 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double dx = sys.positions[static_cast<std::size_t>(i)].x -
                              sys.positions[static_cast<std::size_t>(j)].x;
            const double dy = sys.positions[static_cast<std::size_t>(i)].y -
                              sys.positions[static_cast<std::size_t>(j)].y;
            const double r2 = dx * dx + dy * dy;
            CGM_REQUIRE(r2 > 0.0, InvalidArgument,
                        "singular distance: atoms " + std::to_string(i) + " and " +
                            std::to_string(j) + " coincide");
            vij[static_cast<std::size_t>(i * n + j)] = sys.v0 / (r2 * r2 * r2);
        }
    }
    const std::size_t d = std::size_t{1} << static_cast<unsigned>(n);
    std::vector<double> out(d, 0.0);
    for (std::size_t s = 0; s < d; ++s) {
        double e = 0.0;
        for (int i = 0; i < n; ++i) {
            if (site_bit(s, i, n) == 0) {
                continue;
            }
            for (int j = i + 1; j < n; ++j) {
                if (site_bit(s, j, n) != 0) {
                    e += vij[static_cast<std::size_t>(i * n + j)];
                }
            }
        }
        out[s] = e;
    }
    return out;
}

/// Number of excited atoms per basis state.
inline std::vector<double> occupation_count(int n) {
    const std::size_t d = std::size_t{1} << static_cast<unsigned>(n);
    std::vector<double> out(d);
    for (std::size_t s = 0; s < d; ++s) {
        out[s] = static_cast<double>(std::popcount(s));
    }
    return out;
}

/// (Omega/2) sum X_i - Delta sum N_i + sum_{i<j} V0/r_ij^6 N_i N_j.
inline HamiltonianOperator build_rydberg(const RydbergSystem &sys) {
    CGM_REQUIRE(sys.omega >= 0.0, InvalidArgument, "Omega must be non-negative");
    const int n = sys.sites();
    auto diag = rydberg_interaction_diagonal(sys);
    const auto counts = occupation_count(n);
    for (std::size_t s = 0; s < diag.size(); ++s) {
        diag[s] -= sys.delta * counts[s];
    }
    std::vector<FlipTerm> flips;
    if (sys.omega != 0.0) {
        for (int i = 0; i < n; ++i) {
            flips.push_back({site_mask(i, n), 0.5 * sys.omega, false});
        }
    }
    return {n, std::move(diag), std::move(flips)};
}

} // namespace cgm::quantum
