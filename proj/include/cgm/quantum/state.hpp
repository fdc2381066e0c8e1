#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cgm/core/error.hpp"

namespace cgm::quantum {

using Complex = std::complex<double>;

inline constexpr int kDefaultMaxQubits = 16;

/// Bit position of `site` in a basis index; site 0 is the most significant bit
/// so the index reads as the bitstring a_0 a_1 ... a_{n-1}.
inline constexpr int bit_position(int site, int n) { return n - 1 - site; }

inline constexpr int site_bit(std::uint64_t index, int site, int n) {
    return static_cast<int>((index >> static_cast<unsigned>(bit_position(site, n))) & 1U);
}

inline constexpr std::uint64_t site_mask(int site, int n) {
    return std::uint64_t{1} << static_cast<unsigned>(bit_position(site, n));
}

/// Pure state of n qubits, amplitudes indexed per bit_position().
class StateVector {
  public:
    StateVector() = default;

    StateVector(int n, std::vector<Complex> amplitudes)
        : n_(n), amps_(std::move(amplitudes)) {
        CGM_REQUIRE(n >= 1 && n <= 30, InvalidArgument, "qubit count out of range");
        CGM_REQUIRE(amps_.size() == (std::size_t{1} << static_cast<unsigned>(n)),
                    InvalidArgument, "amplitude vector length must be 2^n");
    }

    /// Computational basis state |index>.
    static StateVector basis(int n, std::uint64_t index) {
        std::vector<Complex> a(std::size_t{1} << static_cast<unsigned>(n), 0.0);
        a.at(index) = 1.0;
        return {n, std::move(a)};
    }

    /// Basis state from a bitstring such as "0110" (site 0 first).
    static StateVector from_bits(const std::string &bits) {
        const int n = static_cast<int>(bits.size());
        std::uint64_t idx = 0;
        for (int s = 0; s < n; ++s) {
            CGM_REQUIRE(bits[static_cast<std::size_t>(s)] == '0' ||
                            bits[static_cast<std::size_t>(s)] == '1',
                        InvalidArgument, "bitstring must contain only 0/1");
            if (bits[static_cast<std::size_t>(s)] == '1') {
                idx |= site_mask(s, n);
            }
        }
        return basis(n, idx);
    }

    [[nodiscard]] int qubits() const { return n_; }
    [[nodiscard]] std::size_t dim() const { return amps_.size(); }
    [[nodiscard]] std::span<const Complex> amplitudes() const { return amps_; }
    [[nodiscard]] std::span<Complex> amplitudes() { return amps_; }
    [[nodiscard]] const Complex &operator[](std::size_t i) const { return amps_[i]; }
    Complex &operator[](std::size_t i) { return amps_[i]; }

    [[nodiscard]] double norm() const {
        double s = 0.0;
        for (const auto &a : amps_) {
            s += std::norm(a);
        }
        return std::sqrt(s);
    }

    void normalize() {
        const double nrm = norm();
        CGM_REQUIRE(nrm > 0.0, NumericalError, "cannot normalize a zero state");
        for (auto &a : amps_) {
            a /= nrm;
        }
    }

    /// Multiplies by a global phase so the largest-magnitude amplitude (first
    /// one on ties) is real and positive.
    void fix_global_phase() {
        std::size_t best = 0;
        double best_mag = -1.0;
        for (std::size_t i = 0; i < amps_.size(); ++i) {
            const double m = std::abs(amps_[i]);
            if (m > best_mag * (1.0 + 1e-12) + 1e-300) {
                best_mag = m;
                best = i;
            }
        }
        if (best_mag <= 0.0) {
            return;
        }
        const Complex phase = std::conj(amps_[best]) / best_mag;
        for (auto &a : amps_) {
            a *= phase;
        }
        amps_[best] = best_mag;
    }

    /// Born probabilities |amplitude|^2 of the computational basis.
    [[nodiscard]] std::vector<double> probabilities() const {
        std::vector<double> p(amps_.size());
        std::transform(amps_.begin(), amps_.end(), p.begin(),
                       [](const Complex &a) { return std::norm(a); });
        return p;
    }

  private:
    int n_ = 0;
    std::vector<Complex> amps_;
};

inline Complex inner(const StateVector &a, const StateVector &b) {
    CGM_REQUIRE(a.dim() == b.dim(), InvalidArgument, "state dimension mismatch");
    Complex s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        s += std::conj(a[i]) * b[i];
    }
    return s;
}

inline double fidelity(const StateVector &a, const StateVector &b) {
    return std::norm(inner(a, b));
}

/// (|01> - |10>)/sqrt(2).
inline StateVector singlet() {
    const double r = 1.0 / std::sqrt(2.0);
    return {2, {0.0, r, -r, 0.0}};
}

} // namespace cgm::quantum
