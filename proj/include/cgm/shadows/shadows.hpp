#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cgm/core/error.hpp"
#include "cgm/measurement/povm.hpp"
#include "cgm/measurement/sampling.hpp"
#include "cgm/quantum/observables.hpp"

namespace cgm::shadows {

using measurement::Outcome;
using quantum::Pauli;
using quantum::PauliString;

/// Single-shot reconstruction: one factor 3|b><b| - I per qubit.
struct ShadowSnapshot {
    std::vector<Eigen::Matrix2cd> factors;
};

inline Eigen::Matrix2cd snapshot_factor(int token) {
    const Eigen::Vector2cd b = measurement::pauli6_eigenstate(token);
    return 3.0 * (b * b.adjoint()) - Eigen::Matrix2cd::Identity();
}

inline std::vector<ShadowSnapshot>
snapshots_from_outcomes(const std::vector<Outcome> &outcomes,
                        measurement::BasisKind basis = measurement::BasisKind::pauli6) {
    CGM_REQUIRE(basis == measurement::BasisKind::pauli6, InvalidArgument,
                "unsupported basis: classical shadows need Pauli-6 outcomes");
    std::vector<ShadowSnapshot> out;
    out.reserve(outcomes.size());
    for (const auto &o : outcomes) {
        ShadowSnapshot s;
        s.factors.reserve(o.size());
        for (auto t : o) {
            s.factors.push_back(snapshot_factor(t));
        }
        out.push_back(std::move(s));
    }
    return out;
}

/// tr(P * (3|b><b| - I)) for a single-site Pauli and token: +-3 on a basis
/// match, 0 otherwise; 1 for the identity.
inline double site_pauli_value(Pauli p, int token) {
    if (p == Pauli::I) {
        return 1.0;
    }
    const int basis = p == Pauli::X ? 0 : (p == Pauli::Y ? 1 : 2);
    if (measurement::token_basis(token) != basis) {
        return 0.0;
    }
    return measurement::token_outcome(token) == 0 ? 3.0 : -3.0;
}

/// Single-snapshot estimate of <P>.
inline double snapshot_pauli_value(const Outcome &tokens, const PauliString &p) {
    double v = 1.0;
    for (const auto &[site, op] : p) {
        v *= site_pauli_value(op, tokens[static_cast<std::size_t>(site)]);
        if (v == 0.0) {
            break;
        }
    }
    return v;
}

/// tr(f_a f_b) for two single-qubit snapshot factors: 9 |<a|b>|^2 - 4.
inline double site_overlap_kernel(int a, int b) {
    if (a == b) {
        return 5.0;
    }
    if (measurement::token_basis(a) == measurement::token_basis(b)) {
        return -4.0;
    }
    return 0.5;
}

struct Estimate {
    double value = 0.0;
    double raw = 0.0;
    double std_err = 0.0;
    std::size_t samples = 0;
};

/// Median of k contiguous batch means; k = 1 is the plain mean.
inline double median_of_means(const std::vector<double> &values, std::size_t k) {
    CGM_REQUIRE(k >= 1, InvalidArgument, "median_of_means needs k >= 1");
    CGM_REQUIRE(values.size() >= k, NoDataError, "median_of_means: fewer values than batches");
    std::vector<double> means(k, 0.0);
    const std::size_t n = values.size();
    for (std::size_t b = 0; b < k; ++b) {
        const std::size_t lo = b * n / k;
        const std::size_t hi = (b + 1) * n / k;
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            s += values[i];
        }
        means[b] = s / static_cast<double>(hi - lo);
    }
    std::sort(means.begin(), means.end());
    if (k % 2 == 1) {
        return means[k / 2];
    }
    return 0.5 * (means[k / 2 - 1] + means[k / 2]);
}

namespace detail {

inline Estimate mean_estimate(const std::vector<double> &v, std::size_t mom_batches) {
    const double n = static_cast<double>(v.size());
    double sum = 0.0;
    for (double x : v) {
        sum += x;
    }
    const double mean = sum / n;
    double ss = 0.0;
    for (double x : v) {
        ss += (x - mean) * (x - mean);
    }
    const double sd = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    const double value = mom_batches > 1 ? median_of_means(v, mom_batches) : mean;
    return {value, value, sd / std::sqrt(n), v.size()};
}

inline void check_tokens(const std::vector<Outcome> &shadow) {
    CGM_REQUIRE(!shadow.empty(), NoDataError, "no snapshots");
    for (const auto &o : shadow) {
        for (auto t : o) {
            CGM_REQUIRE(t < 6, InvalidArgument, "unsupported basis: token is not Pauli-6");
        }
    }
}

} // namespace detail

/// Mean over snapshots of prod_j tr(P_j f_j); unbiased for <P>.
inline Estimate estimate_pauli(const std::vector<Outcome> &shadow, const PauliString &p,
                               std::size_t mom_batches = 1) {
    detail::check_tokens(shadow);
    for (const auto &[site, op] : p) {
        CGM_REQUIRE(site >= 0 && static_cast<std::size_t>(site) < shadow.front().size(),
                    InvalidArgument, "Pauli string site out of range");
    }
    std::vector<double> v(shadow.size());
    for (std::size_t i = 0; i < shadow.size(); ++i) {
        v[i] = snapshot_pauli_value(shadow[i], p);
    }
    return detail::mean_estimate(v, mom_batches);
}

/// Two-point correlation (1/3)(XX + YY + ZZ). `value` is clipped to [-1, 1],
/// `raw` is the unclipped mean.
inline Estimate estimate_correlation(const std::vector<Outcome> &shadow, int i, int j,
                                     std::size_t mom_batches = 1) {
    CGM_REQUIRE(i != j, InvalidArgument, "invalid pair: correlation needs two distinct sites");
    detail::check_tokens(shadow);
    const auto n = static_cast<int>(shadow.front().size());
    CGM_REQUIRE(i >= 0 && j >= 0 && i < n && j < n, InvalidArgument, "site out of range");
    std::vector<double> v(shadow.size());
    for (std::size_t k = 0; k < shadow.size(); ++k) {
        const int a = shadow[k][static_cast<std::size_t>(i)];
        const int b = shadow[k][static_cast<std::size_t>(j)];
        // Only matching bases contribute: (+-3)(+-3)/3.
        if (measurement::token_basis(a) == measurement::token_basis(b)) {
            v[k] = measurement::token_outcome(a) == measurement::token_outcome(b) ? 3.0 : -3.0;
        } else {
            v[k] = 0.0;
        }
    }
    Estimate e = detail::mean_estimate(v, mom_batches);
    e.raw = e.value;
    e.value = std::clamp(e.value, -1.0, 1.0);
    return e;
}

/**
 * Purity tr(rho_A^2) as the U-statistic over snapshot pairs,
 *   2/(N(N-1)) sum_{i<j} prod_{q in A} tr(f_{i,q} f_{j,q}).
 * The kernel only depends on the tokens on A, so the sum is taken over
 * token-pattern counts; the result does not depend on snapshot order.
 */
inline Estimate estimate_purity(const std::vector<Outcome> &shadow, const std::vector<int> &subsystem) {
    CGM_REQUIRE(shadow.size() >= 2, NoDataError, "purity estimate needs at least 2 snapshots");
    detail::check_tokens(shadow);
    const auto k = subsystem.size();
    CGM_REQUIRE(k >= 1 && k <= 4, InvalidArgument, "subsystem size must be 1..4");
    for (int s : subsystem) {
        CGM_REQUIRE(s >= 0 && static_cast<std::size_t>(s) < shadow.front().size(),
                    InvalidArgument, "subsystem site out of range");
    }
    std::size_t patterns = 1;
    for (std::size_t q = 0; q < k; ++q) {
        patterns *= 6;
    }
    std::vector<double> counts(patterns, 0.0);
    for (const auto &o : shadow) {
        std::size_t key = 0;
        for (int s : subsystem) {
            key = key * 6 + o[static_cast<std::size_t>(s)];
        }
        counts[key] += 1.0;
    }
    auto kernel = [&](std::size_t a, std::size_t b) {
        double v = 1.0;
        for (std::size_t q = 0; q < k; ++q) {
            v *= site_overlap_kernel(static_cast<int>(a % 6), static_cast<int>(b % 6));
            a /= 6;
            b /= 6;
        }
        return v;
    };
    const double n = static_cast<double>(shadow.size());
    // h[a] = sum_b counts[b] k(a, b), so each snapshot's projection is
    // (h[a] - k(a, a)) / (N - 1).
    std::vector<double> h(patterns, 0.0);
    for (std::size_t a = 0; a < patterns; ++a) {
        if (counts[a] == 0.0) {
            continue;
        }
        for (std::size_t b = 0; b < patterns; ++b) {
            if (counts[b] != 0.0) {
                h[a] += counts[b] * kernel(a, b);
            }
        }
    }
    double total = 0.0;
    for (std::size_t a = 0; a < patterns; ++a) {
        if (counts[a] != 0.0) {
            total += counts[a] * (h[a] - kernel(a, a));
        }
    }
    const double purity = total / (n * (n - 1.0));
    double var = 0.0;
    for (std::size_t a = 0; a < patterns; ++a) {
        if (counts[a] != 0.0) {
            const double proj = (h[a] - kernel(a, a)) / (n - 1.0);
            var += counts[a] * (proj - purity) * (proj - purity);
        }
    }
    var /= n;
    return {purity, purity, 2.0 * std::sqrt(var / n), shadow.size()};
}

/// Lower clamp applied to the purity before taking the log: 2^-|A| * 1e-3.
inline double purity_floor(std::size_t subsystem_size) {
    return std::ldexp(1e-3, -static_cast<int>(subsystem_size));
}

/// -ln(clamp(purity, floor, 1)). `raw` carries the unclamped purity so
/// clamped outputs can be recognised downstream.
inline Estimate estimate_renyi2(const std::vector<Outcome> &shadow, const std::vector<int> &subsystem) {
    const Estimate p = estimate_purity(shadow, subsystem);
    const double clamped = std::clamp(p.value, purity_floor(subsystem.size()), 1.0);
    const double se = p.std_err / std::max(clamped, purity_floor(subsystem.size()));
    return {-std::log(clamped), p.value, se, p.samples};
}

/// Row of the estimates CSV.
struct EstimateRow {
    std::string system_id;
    std::string property; // correlation | renyi2 | pauli
    std::string sites;    // e.g. "0-3"
    double estimate = 0.0;
    double raw = 0.0;
    std::size_t samples = 0;
    double std_err = 0.0;
};

inline std::string site_set(const std::vector<int> &sites) {
    std::string s;
    for (std::size_t i = 0; i < sites.size(); ++i) {
        s += (i == 0 ? "" : "-") + std::to_string(sites[i]);
    }
    return s;
}

inline const char *kEstimatesHeader = "system_id,property,sites,estimate,raw,N,std_err";

} // namespace cgm::shadows
