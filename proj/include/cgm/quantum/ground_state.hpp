#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cgm/core/error.hpp"
#include "cgm/quantum/hamiltonian.hpp"
#include "cgm/quantum/state.hpp"

namespace cgm::quantum {

struct GroundStateOptions {
    int dense_max_qubits = 12;
    int max_qubits = kDefaultMaxQubits;
    double residual_tol = 1e-8;
    /// Relative gap under which two eigenvalues count as degenerate.
    double degeneracy_tol = 1e-9;
    int krylov_dim = 120;
    int max_restarts = 60;
};

struct GroundState {
    StateVector state;
    double energy = 0.0;
    double residual = 0.0;
};

namespace detail {

inline double residual_norm(const HamiltonianOperator &h, const Eigen::VectorXd &v, double e) {
    Eigen::VectorXd hv(v.size());
    h.apply<double>(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())),
                    std::span<double>(hv.data(), static_cast<std::size_t>(hv.size())));
    return (hv - e * v).norm();
}

/// Picks one vector from an orthonormal degenerate eigenspace: the projection
/// of the basis state with the largest weight in the space, lowest index on
/// ties. For a diagonal H this returns the lowest-index degenerate basis state.
inline Eigen::VectorXd pick_in_eigenspace(const Eigen::MatrixXd &space) {
    const Eigen::VectorXd weights = space.rowwise().squaredNorm();
    const double wmax = weights.maxCoeff();
    Eigen::Index chosen = 0;
    for (Eigen::Index s = 0; s < weights.size(); ++s) {
        if (weights(s) >= wmax - 1e-9) {
            chosen = s;
            break;
        }
    }
    Eigen::VectorXd v = space * space.row(chosen).transpose();
    return v / v.norm();
}

inline StateVector to_state(int n, const Eigen::VectorXd &v) {
    std::vector<Complex> amps(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        amps[static_cast<std::size_t>(i)] = v(i);
    }
    StateVector s(n, std::move(amps));
    s.normalize();
    s.fix_global_phase();
    return s;
}

inline GroundState dense_ground_state(const HamiltonianOperator &h, const GroundStateOptions &opt) {
    const Eigen::MatrixXd m = h.to_dense();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    CGM_REQUIRE(es.info() == Eigen::Success, NumericalError, "dense eigensolver failed");
    const Eigen::VectorXd &evals = es.eigenvalues();
    const double e0 = evals(0);
    const double tol = opt.degeneracy_tol * std::max(1.0, std::abs(e0));
    Eigen::Index deg = 1;
    while (deg < evals.size() && evals(deg) - e0 <= tol) {
        ++deg;
    }
    Eigen::VectorXd v = deg == 1 ? Eigen::VectorXd(es.eigenvectors().col(0))
                                 : pick_in_eigenspace(es.eigenvectors().leftCols(deg));
    GroundState gs{to_state(h.qubits(), v), e0, 0.0};
    Eigen::VectorXd re(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        re(i) = gs.state[static_cast<std::size_t>(i)].real();
    }
    gs.energy = re.dot(m * re);
    gs.residual = residual_norm(h, re, gs.energy);
    return gs;
}

/// Restarted Lanczos with full reorthogonalisation for the lowest eigenpair.
inline GroundState lanczos_ground_state(const HamiltonianOperator &h,
                                        const GroundStateOptions &opt) {
    const auto d = static_cast<Eigen::Index>(h.dim());
    const Eigen::Index m = std::min<Eigen::Index>(opt.krylov_dim, d);
    // Deterministic start vector with overlap on every basis state.
    Eigen::VectorXd start(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        start(i) = 1.0 + 0.1 * std::sin(0.7 * static_cast<double>(i) + 0.3);
    }
    start.normalize();

    Eigen::MatrixXd basis(d, m);
    Eigen::VectorXd w(d);
    double last_residual = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart <= opt.max_restarts; ++restart) {
        basis.col(0) = start;
        std::vector<double> alpha;
        std::vector<double> beta;
        Eigen::Index k = 0;
        for (; k < m; ++k) {
            h.apply<double>(
                std::span<const double>(basis.col(k).data(), static_cast<std::size_t>(d)),
                std::span<double>(w.data(), static_cast<std::size_t>(d)));
            alpha.push_back(basis.col(k).dot(w));
            // Full reorthogonalisation, applied twice.
            for (int pass = 0; pass < 2; ++pass) {
                const Eigen::VectorXd coeffs = basis.leftCols(k + 1).transpose() * w;
                w -= basis.leftCols(k + 1) * coeffs;
            }
            const double b = w.norm();
            if (k + 1 == m || b < 1e-12) {
                ++k;
                break;
            }
            beta.push_back(b);
            basis.col(k + 1) = w / b;
        }
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
        for (Eigen::Index i = 0; i < k; ++i) {
            t(i, i) = alpha[static_cast<std::size_t>(i)];
            if (i + 1 < k) {
                t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
        Eigen::VectorXd ritz = basis.leftCols(k) * es.eigenvectors().col(0);
        ritz.normalize();
        const double theta = es.eigenvalues()(0);
        last_residual = residual_norm(h, ritz, theta);
        if (last_residual <= opt.residual_tol) {
            GroundState gs{to_state(h.qubits(), ritz), theta, 0.0};
            Eigen::VectorXd re(d);
            for (Eigen::Index i = 0; i < d; ++i) {
                re(i) = gs.state[static_cast<std::size_t>(i)].real();
            }
            gs.residual = residual_norm(h, re, theta);
            return gs;
        }
        start = ritz;
    }
    throw NumericalError("Lanczos did not converge, residual " +
                         std::to_string(last_residual));
}

} // namespace detail

/**
 * Lowest eigenpair of a Hamiltonian.
 *
 * Dense diagonalisation up to `dense_max_qubits`, restarted Lanczos above
 * that, refused beyond `max_qubits`. The returned state is normalised with
 * its largest amplitude real positive. Degenerate ground spaces resolve to
 * the projection of the dominant (then lowest-index) basis state; the
 * Lanczos path returns whichever ground vector it converges to.
 */
inline GroundState ground_state(const HamiltonianOperator &h, const GroundStateOptions &opt = {}) {
    const int n = h.qubits();
    CGM_REQUIRE(n <= opt.max_qubits, ConfigError,
                "ground_state: " + std::to_string(n) + " qubits exceeds the cap of " +
                    std::to_string(opt.max_qubits));
    if (n <= opt.dense_max_qubits) {
        return detail::dense_ground_state(h, opt);
    }
    return detail::lanczos_ground_state(h, opt);
}

} // namespace cgm::quantum
