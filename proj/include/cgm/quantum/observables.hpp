#pragma once

#include <bit>
#include <cmath>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "cgm/core/error.hpp"
#include "cgm/quantum/state.hpp"

namespace cgm::quantum {

enum class Pauli : char { I = 'I', X = 'X', Y = 'Y', Z = 'Z' };

/// Site -> Pauli factor; unlisted sites carry the identity.
using PauliString = std::map<int, Pauli>;

/// <psi|P|psi> for a Pauli string (Z|0> = +|0>).
inline double expectation(const StateVector &psi, const PauliString &p) {
    const int n = psi.qubits();
    std::uint64_t flip = 0;
    std::uint64_t zmask = 0;
    int ycount = 0;
    for (const auto &[site, op] : p) {
        CGM_REQUIRE(site >= 0 && site < n, InvalidArgument, "Pauli string site out of range");
        const auto m = site_mask(site, n);
        switch (op) {
        case Pauli::X: flip |= m; break;
        case Pauli::Y: flip |= m; zmask |= m; ++ycount; break;
        case Pauli::Z: zmask |= m; break;
        case Pauli::I: break;
        }
    }
    // P|s> = i^ycount (-1)^{popcount(s & zmask)} |s ^ flip>, using Y = i X Z.
    static const Complex kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    const Complex phase = kIPow[ycount % 4];
    Complex acc = 0.0;
    for (std::size_t s = 0; s < psi.dim(); ++s) {
        const double sign = (std::popcount(s & zmask) % 2 == 0) ? 1.0 : -1.0;
        acc += std::conj(psi[s ^ flip]) * sign * psi[s];
    }
    return (phase * acc).real();
}

/// (1/3)(<X_iX_j> + <Y_iY_j> + <Z_iZ_j>).
inline double exact_correlation(const StateVector &psi, int i, int j) {
    CGM_REQUIRE(i != j, InvalidArgument, "invalid pair: correlation needs two distinct sites");
    double s = 0.0;
    for (auto op : {Pauli::X, Pauli::Y, Pauli::Z}) {
        s += expectation(psi, {{i, op}, {j, op}});
    }
    return s / 3.0;
}

/// Reduced density matrix on `subsystem` (sites in the listed order).
inline Eigen::MatrixXcd reduced_density_matrix(const StateVector &psi,
                                               const std::vector<int> &subsystem) {
    const int n = psi.qubits();
    const int k = static_cast<int>(subsystem.size());
    CGM_REQUIRE(k >= 1 && k <= n, InvalidArgument, "subsystem size out of range");
    std::vector<bool> in_a(static_cast<std::size_t>(n), false);
    for (int s : subsystem) {
        CGM_REQUIRE(s >= 0 && s < n && !in_a[static_cast<std::size_t>(s)], InvalidArgument,
                    "subsystem sites must be distinct and in range");
        in_a[static_cast<std::size_t>(s)] = true;
    }
    const Eigen::Index da = Eigen::Index{1} << k;
    const Eigen::Index db = Eigen::Index{1} << (n - k);
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(da, db);
    for (std::size_t s = 0; s < psi.dim(); ++s) {
        Eigen::Index a = 0;
        Eigen::Index b = 0;
        for (int q = 0; q < k; ++q) {
            a = (a << 1) | site_bit(s, subsystem[static_cast<std::size_t>(q)], n);
        }
        for (int q = 0; q < n; ++q) {
            if (!in_a[static_cast<std::size_t>(q)]) {
                b = (b << 1) | site_bit(s, q, n);
            }
        }
        m(a, b) = psi[s];
    }
    return m * m.adjoint();
}

/// Second-order Renyi entropy -ln tr(rho_A^2).
inline double exact_renyi2(const StateVector &psi, const std::vector<int> &subsystem) {
    const Eigen::MatrixXcd rho = reduced_density_matrix(psi, subsystem);
    const double purity = rho.cwiseAbs2().sum();
    return -std::log(purity);
}

} // namespace cgm::quantum
