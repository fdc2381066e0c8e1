#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "cgm/core/error.hpp"

namespace cgm::baselines {

/// 1 / (2 * median pairwise squared distance); 1 when all points coincide.
inline double median_heuristic_gamma(const Eigen::MatrixXd &x) {
    std::vector<double> d2;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < x.rows(); ++j) {
            d2.push_back((x.row(i) - x.row(j)).squaredNorm());
        }
    }
    if (d2.empty()) {
        return 1.0;
    }
    const auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
    std::nth_element(d2.begin(), mid, d2.end());
    double med = *mid;
    if (d2.size() % 2 == 0) {
        med = 0.5 * (med + *std::max_element(d2.begin(), mid));
    }
    return med > 0.0 ? 1.0 / (2.0 * med) : 1.0;
}

inline double gaussian_kernel(const Eigen::RowVectorXd &a, const Eigen::RowVectorXd &b,
                              double gamma) {
    return std::exp(-gamma * (a - b).squaredNorm());
}

/// Gaussian kernel ridge regressor: alpha = (K + lambda I)^-1 y.
struct KernelRidge {
    Eigen::MatrixXd x;
    Eigen::VectorXd alpha;
    double gamma = 1.0;
    double lambda = 1e-3;

    [[nodiscard]] double predict(const Eigen::RowVectorXd &q) const {
        CGM_REQUIRE(q.size() == x.cols(), InvalidArgument, "kernel predict: wrong input dimension");
        double s = 0.0;
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            s += alpha(i) * gaussian_kernel(x.row(i), q, gamma);
        }
        return s;
    }
};

struct KernelOptions {
    double gamma = 0.0; // <= 0 selects the median heuristic
    double lambda = 1e-3;
};

/**
 * Fits the ridge solution. Training points are put in lexicographic order
 * first, so the fitted predictor does not depend on the order they were
 * given in.
 */
inline KernelRidge gaussian_kernel_fit(const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                                       const KernelOptions &opt = {}) {
    CGM_REQUIRE(x.rows() >= 1, NoDataError, "kernel fit needs at least one training point");
    CGM_REQUIRE(x.rows() == y.size(), InvalidArgument, "kernel fit: inputs and targets differ in length");
    CGM_REQUIRE(opt.lambda >= 0.0, ConfigError, "ridge lambda must be non-negative");
    const auto n = x.rows();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        for (Eigen::Index k = 0; k < x.cols(); ++k) {
            if (x(a, k) != x(b, k)) {
                return x(a, k) < x(b, k);
            }
        }
        return y(a) < y(b);
    });
    KernelRidge kr;
    kr.x.resize(n, x.cols());
    Eigen::VectorXd ys(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        kr.x.row(i) = x.row(order[static_cast<std::size_t>(i)]);
        ys(i) = y(order[static_cast<std::size_t>(i)]);
    }
    kr.gamma = opt.gamma > 0.0 ? opt.gamma : median_heuristic_gamma(kr.x);
    kr.lambda = opt.lambda;
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            k(i, j) = gaussian_kernel(kr.x.row(i), kr.x.row(j), kr.gamma);
        }
    }
    k.diagonal().array() += opt.lambda;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
    lu.setThreshold(1e-12);
    if (lu.rank() < n) {
        throw NumericalError("kernel matrix K + lambda I is singular (duplicate training points?); "
                             "use lambda > 0");
    }
    kr.alpha = lu.solve(ys);
    return kr;
}

} // namespace cgm::baselines
