#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cgm/core/error.hpp"
#include "cgm/quantum/state.hpp"

namespace cgm::measurement {

using quantum::Complex;
using quantum::StateVector;

enum class BasisKind { pauli6, zbasis };

inline const char *to_string(BasisKind b) { return b == BasisKind::pauli6 ? "pauli6" : "zbasis"; }

inline BasisKind basis_from_string(const std::string &s) {
    if (s == "pauli6") {
        return BasisKind::pauli6;
    }
    if (s == "zbasis") {
        return BasisKind::zbasis;
    }
    throw ConfigError("unknown basis kind '" + s + "'");
}

inline int alphabet_size(BasisKind b) { return b == BasisKind::pauli6 ? 6 : 2; }

/// Pauli-6 tokens: X+, X-, Y+, Y-, Z+, Z- -> 0..5. Token = 2 * basis + outcome.
enum Pauli6Token : std::uint8_t { kXPlus = 0, kXMinus, kYPlus, kYMinus, kZPlus, kZMinus };

inline constexpr int token_basis(int token) { return token / 2; }   // 0 X, 1 Y, 2 Z
inline constexpr int token_outcome(int token) { return token % 2; } // 0 '+', 1 '-'

/// Eigenstate |b> for a Pauli-6 token.
inline Eigen::Vector2cd pauli6_eigenstate(int token) {
    const double r = 1.0 / std::sqrt(2.0);
    const Complex i(0.0, 1.0);
    switch (token) {
    case kXPlus: return {r, r};
    case kXMinus: return {r, -r};
    case kYPlus: return {r, r * i};
    case kYMinus: return {r, -r * i};
    case kZPlus: return {1.0, 0.0};
    case kZMinus: return {0.0, 1.0};
    default: throw InvalidArgument("Pauli-6 token out of range: " + std::to_string(token));
    }
}

/// Sub-normalised POVM element (1/3)|b><b|.
inline Eigen::Matrix2cd pauli6_element(int token) {
    const Eigen::Vector2cd b = pauli6_eigenstate(token);
    return (b * b.adjoint()) / 3.0;
}

/// Product POVM element: one 2x2 factor per qubit, site 0 first.
using ProductElement = std::vector<Eigen::Matrix2cd>;

inline ProductElement pauli6_product(const std::vector<std::uint8_t> &tokens) {
    ProductElement e;
    e.reserve(tokens.size());
    for (auto t : tokens) {
        e.push_back(pauli6_element(t));
    }
    return e;
}

/// Applies a 2x2 operator to one qubit of an amplitude vector in place.
inline void apply_single_qubit(std::vector<Complex> &amps, int n, int site,
                               const Eigen::Matrix2cd &op) {
    const std::uint64_t mask = quantum::site_mask(site, n);
    for (std::size_t s = 0; s < amps.size(); ++s) {
        if ((s & mask) != 0) {
            continue;
        }
        const Complex a0 = amps[s];
        const Complex a1 = amps[s | mask];
        amps[s] = op(0, 0) * a0 + op(0, 1) * a1;
        amps[s | mask] = op(1, 0) * a0 + op(1, 1) * a1;
    }
}

/// Born's rule tr(M rho) = <psi|M|psi> for a product element.
inline double born_probability(const StateVector &psi, const ProductElement &element) {
    const int n = psi.qubits();
    CGM_REQUIRE(static_cast<int>(element.size()) == n, InvalidArgument,
                "POVM element must have one factor per qubit");
    std::vector<Complex> m(psi.amplitudes().begin(), psi.amplitudes().end());
    for (int q = 0; q < n; ++q) {
        apply_single_qubit(m, n, q, element[static_cast<std::size_t>(q)]);
    }
    Complex acc = 0.0;
    for (std::size_t s = 0; s < m.size(); ++s) {
        acc += std::conj(psi[s]) * m[s];
    }
    return acc.real();
}

/// Probability of a full Pauli-6 token sequence.
inline double pauli6_probability(const StateVector &psi, const std::vector<std::uint8_t> &tokens) {
    return born_probability(psi, pauli6_product(tokens));
}

} // namespace cgm::measurement
