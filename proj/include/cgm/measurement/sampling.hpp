#pragma once

#include <algorithm>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "cgm/core/random.hpp"
#include "cgm/measurement/povm.hpp"

namespace cgm::measurement {

/// One measurement shot: a token per site.
using Outcome = std::vector<std::uint8_t>;

namespace detail {

inline std::vector<double> cumulative(const std::vector<double> &p) {
    std::vector<double> c(p.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        c[i] = acc;
    }
    return c;
}

/// Inverts a (possibly unnormalised) cumulative distribution. Never returns
/// a zero-probability entry.
inline std::size_t draw(const std::vector<double> &cdf, Rng &rng) {
    const double u = uniform01(rng) * cdf.back();
    auto idx = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    if (idx == cdf.size()) {
        idx = cdf.size() - 1;
        while (idx > 0 && cdf[idx] == cdf[idx - 1]) {
            --idx;
        }
    }
    return idx;
}

/// Rotation taking the +/- eigenstates of Pauli basis b (0 X, 1 Y, 2 Z) to |0>/|1>.
inline Eigen::Matrix2cd basis_rotation(int b) {
    Eigen::Matrix2cd u;
    const Eigen::Vector2cd plus = pauli6_eigenstate(2 * b);
    const Eigen::Vector2cd minus = pauli6_eigenstate(2 * b + 1);
    u.row(0) = plus.adjoint();
    u.row(1) = minus.adjoint();
    return u;
}

inline std::vector<double> rotated_probabilities(const StateVector &psi,
                                                 const std::vector<int> &bases) {
    const int n = psi.qubits();
    std::vector<Complex> amps(psi.amplitudes().begin(), psi.amplitudes().end());
    for (int q = 0; q < n; ++q) {
        if (bases[static_cast<std::size_t>(q)] != 2) {
            apply_single_qubit(amps, n, q, basis_rotation(bases[static_cast<std::size_t>(q)]));
        }
    }
    std::vector<double> p(amps.size());
    for (std::size_t s = 0; s < amps.size(); ++s) {
        p[s] = std::norm(amps[s]);
    }
    return p;
}

} // namespace detail

/// Seed of the stream used for shot `shot` of a call seeded with `seed`.
inline std::uint64_t shot_seed(std::uint64_t seed, std::uint64_t shot) {
    return derive_seed(seed, shot);
}

/**
 * Pauli-6 POVM sampling: per shot, each qubit picks X, Y or Z uniformly and
 * the joint outcome is drawn from the exact rotated state. Each shot uses its
 * own stream so results do not depend on evaluation order. Probability
 * vectors are cached per basis assignment while that stays affordable.
 */
inline std::vector<Outcome> sample_pauli6(const StateVector &psi, std::size_t shots,
                                          std::uint64_t seed) {
    CGM_REQUIRE(shots >= 1, InvalidArgument, "shots must be >= 1");
    const int n = psi.qubits();
    const std::size_t dim = psi.dim();
    // Cache up to ~64 MB of cumulative vectors.
    const std::size_t cache_limit = std::max<std::size_t>(1, (std::size_t{8} << 20U) / dim);
    std::unordered_map<std::uint64_t, std::vector<double>> cache;

    std::vector<Outcome> out;
    out.reserve(shots);
    std::vector<int> bases(static_cast<std::size_t>(n));
    for (std::size_t shot = 0; shot < shots; ++shot) {
        Rng rng(shot_seed(seed, shot));
        std::uint64_t key = 0;
        for (int q = 0; q < n; ++q) {
            bases[static_cast<std::size_t>(q)] = static_cast<int>(uniform_index(rng, 3));
            key = key * 3 + static_cast<std::uint64_t>(bases[static_cast<std::size_t>(q)]);
        }
        std::vector<double> local;
        const std::vector<double> *cdf = nullptr;
        if (auto it = cache.find(key); it != cache.end()) {
            cdf = &it->second;
        } else if (cache.size() < cache_limit) {
            cdf = &(cache[key] = detail::cumulative(detail::rotated_probabilities(psi, bases)));
        } else {
            local = detail::cumulative(detail::rotated_probabilities(psi, bases));
            cdf = &local;
        }
        const std::size_t s = detail::draw(*cdf, rng);
        Outcome o(static_cast<std::size_t>(n));
        for (int q = 0; q < n; ++q) {
            o[static_cast<std::size_t>(q)] = static_cast<std::uint8_t>(
                2 * bases[static_cast<std::size_t>(q)] + quantum::site_bit(s, q, n));
        }
        out.push_back(std::move(o));
    }
    return out;
}

/// Computational-basis sampling: bit 1 is the excited / |1> state.
inline std::vector<Outcome> sample_zbasis(const StateVector &psi, std::size_t shots,
                                          std::uint64_t seed) {
    CGM_REQUIRE(shots >= 1, InvalidArgument, "shots must be >= 1");
    const int n = psi.qubits();
    const auto cdf = detail::cumulative(psi.probabilities());
    std::vector<Outcome> out;
    out.reserve(shots);
    for (std::size_t shot = 0; shot < shots; ++shot) {
        Rng rng(shot_seed(seed, shot));
        const std::size_t s = detail::draw(cdf, rng);
        Outcome o(static_cast<std::size_t>(n));
        for (int q = 0; q < n; ++q) {
            o[static_cast<std::size_t>(q)] = static_cast<std::uint8_t>(quantum::site_bit(s, q, n));
        }
        out.push_back(std::move(o));
    }
    return out;
}

} // namespace cgm::measurement
