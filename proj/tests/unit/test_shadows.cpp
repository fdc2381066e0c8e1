#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "cgm/measurement/sampling.hpp"
#include "cgm/quantum/observables.hpp"
#include "cgm/shadows/shadows.hpp"

using namespace cgm;
using namespace cgm::shadows;
using cgm::quantum::Pauli;
using Catch::Matchers::WithinAbs;

namespace {

quantum::StateVector random_state(int n, Rng &rng) {
    std::vector<quantum::Complex> a(std::size_t{1} << static_cast<unsigned>(n));
    for (auto &x : a) {
        x = {normal01(rng), normal01(rng)};
    }
    quantum::StateVector s(n, a);
    s.normalize();
    return s;
}

Outcome tokens(int n, int idx) {
    Outcome t(static_cast<std::size_t>(n));
    for (int q = n - 1; q >= 0; --q) {
        t[static_cast<std::size_t>(q)] = static_cast<std::uint8_t>(idx % 6);
        idx /= 6;
    }
    return t;
}

// Naive O(N^2) U-statistic with explicit matrix traces.
double naive_purity(const std::vector<Outcome> &shadow, const std::vector<int> &a) {
    const auto snaps = snapshots_from_outcomes(shadow);
    double s = 0.0;
    for (std::size_t i = 0; i < snaps.size(); ++i) {
        for (std::size_t j = i + 1; j < snaps.size(); ++j) {
            double v = 1.0;
            for (int q : a) {
                v *= (snaps[i].factors[static_cast<std::size_t>(q)] *
                      snaps[j].factors[static_cast<std::size_t>(q)])
                         .trace()
                         .real();
            }
            s += v;
        }
    }
    const double n = static_cast<double>(snaps.size());
    return 2.0 * s / (n * (n - 1.0));
}

} // namespace

TEST_CASE("snapshot factors", "[shadows]") {
    Eigen::Matrix2cd zplus;
    zplus << 2, 0, 0, -1;
    REQUIRE((snapshot_factor(4) - zplus).cwiseAbs().maxCoeff() < 1e-15);
    Eigen::Matrix2cd xplus;
    xplus << 0.5, 1.5, 1.5, 0.5;
    REQUIRE((snapshot_factor(0) - xplus).cwiseAbs().maxCoeff() < 1e-15);
    for (int t = 0; t < 6; ++t) {
        const Eigen::Matrix2cd f = snapshot_factor(t);
        REQUIRE_THAT(f.trace().real(), WithinAbs(1.0, 1e-15));
        const auto ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd>(f).eigenvalues();
        REQUIRE_THAT(ev(0), WithinAbs(-1.0, 1e-14));
        REQUIRE_THAT(ev(1), WithinAbs(2.0, 1e-14));
    }
    REQUIRE_THROWS_AS(snapshots_from_outcomes({{0, 1}}, measurement::BasisKind::zbasis), InvalidArgument);
}

TEST_CASE("snapshot average reconstructs |0><0|", "[shadows]") {
    const auto shots = measurement::sample_pauli6(quantum::StateVector::from_bits("0"), 50000, 3);
    Eigen::Matrix2cd avg = Eigen::Matrix2cd::Zero();
    for (const auto &s : snapshots_from_outcomes(shots)) {
        avg += s.factors[0];
    }
    avg /= static_cast<double>(shots.size());
    Eigen::Matrix2cd target;
    target << 1, 0, 0, 0;
    REQUIRE((avg - target).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("Pauli estimates on simple states", "[shadows]") {
    const auto zero = measurement::sample_pauli6(quantum::StateVector::from_bits("0"), 20000, 4);
    REQUIRE_THAT(estimate_pauli(zero, {{0, Pauli::Z}}).value, WithinAbs(1.0, 0.05));
    for (const auto &o : zero) {
        REQUIRE(snapshot_pauli_value(o, {}) == 1.0);
    }
    const auto sing = measurement::sample_pauli6(quantum::singlet(), 20000, 5);
    for (const auto &o : sing) {
        const double v = snapshot_pauli_value(o, {{0, Pauli::X}, {1, Pauli::X}});
        REQUIRE((v == 0.0 || std::abs(v) == 9.0));
    }
    REQUIRE_THAT(estimate_pauli(sing, {{0, Pauli::X}, {1, Pauli::X}}).value, WithinAbs(-1.0, 0.15));
    REQUIRE_THROWS_AS(estimate_pauli({}, {{0, Pauli::Z}}), NoDataError);
}

TEST_CASE("correlation estimates", "[shadows]") {
    const auto sing = measurement::sample_pauli6(quantum::singlet(), 20000, 6);
    REQUIRE_THAT(estimate_correlation(sing, 0, 1).value, WithinAbs(-1.0, 0.05));
    const auto prod = measurement::sample_pauli6(quantum::StateVector::from_bits("00"), 20000, 7);
    REQUIRE_THAT(estimate_correlation(prod, 0, 1).value, WithinAbs(1.0 / 3.0, 0.05));
    REQUIRE_THROWS_AS(estimate_correlation(sing, 1, 1), InvalidArgument);
}

TEST_CASE("correlation is clipped but raw is kept", "[shadows]") {
    // Two snapshots measured in the same basis with equal outcomes: raw = 3.
    const std::vector<Outcome> s{{4, 4}, {0, 0}};
    const auto e = estimate_correlation(s, 0, 1);
    REQUIRE(e.raw == 3.0);
    REQUIRE(e.value == 1.0);
}

TEST_CASE("shadow estimator is exactly unbiased", "[shadows][property]") {
    Rng rng(31);
    const char names[] = {'I', 'X', 'Y', 'Z'};
    for (int n : {1, 2, 3}) {
        const auto psi = random_state(n, rng);
        int outcomes = 1;
        for (int q = 0; q < n; ++q) {
            outcomes *= 6;
        }
        std::vector<double> prob(static_cast<std::size_t>(outcomes));
        for (int idx = 0; idx < outcomes; ++idx) {
            prob[static_cast<std::size_t>(idx)] = measurement::pauli6_probability(psi, tokens(n, idx));
        }
        int strings = 1;
        for (int q = 0; q < n; ++q) {
            strings *= 4;
        }
        for (int code = 0; code < strings; ++code) {
            quantum::PauliString p;
            for (int q = 0, c = code; q < n; ++q, c /= 4) {
                if (c % 4 != 0) {
                    p[q] = static_cast<Pauli>(names[c % 4]);
                }
            }
            double e = 0.0;
            for (int idx = 0; idx < outcomes; ++idx) {
                e += prob[static_cast<std::size_t>(idx)] * snapshot_pauli_value(tokens(n, idx), p);
            }
            REQUIRE_THAT(e, WithinAbs(quantum::expectation(psi, p), 1e-10));
        }
    }
}

TEST_CASE("singlet correlation spread matches the analytic error", "[shadows][property]") {
    // Per-snapshot value is -3 with probability 1/3, else 0: variance 2.
    const std::size_t n = 2000;
    std::vector<double> est;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        est.push_back(estimate_correlation(measurement::sample_pauli6(quantum::singlet(), n, 1000 + seed), 0, 1).raw);
    }
    const double mean = std::accumulate(est.begin(), est.end(), 0.0) / 100.0;
    double ss = 0.0;
    for (double e : est) {
        ss += (e - mean) * (e - mean);
    }
    const double sd = std::sqrt(ss / 99.0);
    const double analytic = std::sqrt(2.0 / static_cast<double>(n));
    REQUIRE(sd >= 0.5 * analytic);
    REQUIRE(sd <= 2.0 * analytic);
}

TEST_CASE("purity and Renyi-2 estimates", "[shadows]") {
    const auto prod = measurement::sample_pauli6(quantum::StateVector::from_bits("000"), 20000, 8);
    REQUIRE_THAT(estimate_purity(prod, {0}).value, WithinAbs(1.0, 0.05));
    REQUIRE_THAT(estimate_renyi2(prod, {0}).value, WithinAbs(0.0, 0.05));
    const auto sing = measurement::sample_pauli6(quantum::singlet(), 20000, 9);
    REQUIRE_THAT(estimate_renyi2(sing, {0}).value, WithinAbs(std::log(2.0), 0.1));
    REQUIRE_THROWS_AS(estimate_purity({{4}}, {0}), NoDataError);
}

TEST_CASE("degenerate identical snapshots", "[shadows]") {
    const std::vector<Outcome> s(50, Outcome{4});
    REQUIRE_THAT(estimate_purity(s, {0}).value, WithinAbs(5.0, 1e-12));
    const auto r = estimate_renyi2(s, {0});
    REQUIRE(r.value == 0.0);
    REQUIRE_THAT(r.raw, WithinAbs(5.0, 1e-12));
}

TEST_CASE("purity U-statistic matches the pairwise oracle", "[shadows][property]") {
    Rng rng(40);
    const auto psi = random_state(3, rng);
    auto shots = measurement::sample_pauli6(psi, 300, 41);
    for (const auto &a : std::vector<std::vector<int>>{{0}, {1, 2}, {0, 1, 2}}) {
        REQUIRE_THAT(estimate_purity(shots, a).value, WithinAbs(naive_purity(shots, a), 1e-10));
    }
    const double before = estimate_purity(shots, {0, 2}).value;
    shuffle(shots.begin(), shots.end(), rng);
    REQUIRE(estimate_purity(shots, {0, 2}).value == before);
}

TEST_CASE("Renyi-2 is non-negative after clamping", "[shadows][property]") {
    Rng rng(50);
    for (int trial = 0; trial < 5; ++trial) {
        const auto psi = random_state(3, rng);
        const auto shots = measurement::sample_pauli6(psi, 200, 60 + static_cast<std::uint64_t>(trial));
        for (const auto &a : std::vector<std::vector<int>>{{0}, {1}, {0, 1}, {1, 2}}) {
            const auto r = estimate_renyi2(shots, a);
            REQUIRE(r.value >= 0.0);
            REQUIRE(std::isfinite(r.value));
            REQUIRE(r.value <= -std::log(purity_floor(a.size())) + 1e-12);
        }
    }
}

TEST_CASE("median of means", "[shadows]") {
    const std::vector<double> v{1, 2, 3, 4, 5, 6};
    REQUIRE(median_of_means(v, 1) == 3.5);
    REQUIRE(median_of_means({1, 2, 3, 3, 4, 5}, 3) == 3.0);
    // One corrupted batch out of five barely moves the median.
    std::vector<double> w(50, 1.0);
    for (std::size_t i = 0; i < 10; ++i) {
        w[i] = 1000.0;
    }
    const double mean = std::accumulate(w.begin(), w.end(), 0.0) / 50.0;
    REQUIRE(median_of_means(w, 5) == 1.0);
    REQUIRE(mean > 100.0);
}
