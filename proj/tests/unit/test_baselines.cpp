#include <catch_amalgamated.hpp>

#include <cmath>

#include "cgm/baselines/kernel.hpp"
#include "cgm/baselines/mlp.hpp"
#include "cgm/nn/gradcheck.hpp"

using namespace cgm;
using namespace cgm::baselines;
using Catch::Matchers::WithinAbs;

namespace {

Eigen::MatrixXd col(std::initializer_list<double> v) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
    Eigen::Index i = 0;
    for (double x : v) {
        m(i++, 0) = x;
    }
    return m;
}

Eigen::RowVectorXd at(double x) { return Eigen::RowVectorXd::Constant(1, x); }

} // namespace

TEST_CASE("kernel ridge examples", "[baselines]") {
    SECTION("single point interpolates") {
        const auto kr = gaussian_kernel_fit(col({0.3}), Eigen::VectorXd::Constant(1, 2.5), {1.0, 0.0});
        REQUIRE_THAT(kr.predict(at(0.3)), WithinAbs(2.5, 1e-14));
    }
    SECTION("vanishing gamma gives a constant") {
        Eigen::VectorXd y(3);
        y << 1.0, 2.0, 4.0;
        const auto kr = gaussian_kernel_fit(col({0.0, 1.0, 2.0}), y, {1e-14, 0.1});
        const double s = kr.alpha.sum();
        for (double x : {-5.0, 0.5, 10.0}) {
            REQUIRE_THAT(kr.predict(at(x)), WithinAbs(s, 1e-9));
        }
        // All-ones kernel: sum(alpha) = 3 mean(y) / (3 + lambda).
        REQUIRE_THAT(s, WithinAbs(7.0 / 3.1, 1e-9));
    }
    SECTION("five-point toy matches a direct solve") {
        const Eigen::MatrixXd x = col({-1.0, -0.4, 0.1, 0.7, 1.5});
        Eigen::VectorXd y(5);
        y << 0.2, -0.3, 1.1, 0.4, -0.8;
        const double gamma = 0.8;
        const double lambda = 0.05;
        Eigen::MatrixXd k(5, 5);
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 5; ++j) {
                const double dx = x(i, 0) - x(j, 0);
                k(i, j) = std::exp(-gamma * dx * dx) + (i == j ? lambda : 0.0);
            }
        }
        const Eigen::VectorXd alpha = k.colPivHouseholderQr().solve(y);
        const auto kr = gaussian_kernel_fit(x, y, {gamma, lambda});
        for (double q : {-2.0, -0.4, 0.33, 1.0}) {
            double expect = 0.0;
            for (int i = 0; i < 5; ++i) {
                expect += alpha(i) * std::exp(-gamma * (x(i, 0) - q) * (x(i, 0) - q));
            }
            REQUIRE_THAT(kr.predict(at(q)), WithinAbs(expect, 1e-10));
        }
    }
    SECTION("duplicates without ridge") {
        REQUIRE_THROWS_AS(gaussian_kernel_fit(col({1.0, 1.0}), Eigen::VectorXd::Ones(2), {1.0, 0.0}),
                          NumericalError);
        REQUIRE_NOTHROW(gaussian_kernel_fit(col({1.0, 1.0}), Eigen::VectorXd::Ones(2), {1.0, 1e-3}));
    }
    SECTION("errors") {
        REQUIRE_THROWS_AS(gaussian_kernel_fit(Eigen::MatrixXd(0, 1), Eigen::VectorXd(0)), NoDataError);
        REQUIRE_THROWS_AS(gaussian_kernel_fit(col({1.0}), Eigen::VectorXd::Ones(2)), InvalidArgument);
        const auto kr = gaussian_kernel_fit(col({1.0}), Eigen::VectorXd::Ones(1));
        REQUIRE_THROWS_AS(kr.predict(Eigen::RowVectorXd::Zero(2)), InvalidArgument);
    }
}

TEST_CASE("median heuristic", "[baselines]") {
    // Squared distances 1, 9, 4: median 4.
    REQUIRE_THAT(median_heuristic_gamma(col({0.0, 1.0, 3.0})), WithinAbs(1.0 / 8.0, 1e-15));
    REQUIRE(median_heuristic_gamma(col({2.0, 2.0})) == 1.0);
}

TEST_CASE("kernel ridge ignores training order", "[baselines][property]") {
    Rng rng(3);
    Eigen::MatrixXd x(12, 3);
    Eigen::VectorXd y(12);
    for (int i = 0; i < 12; ++i) {
        for (int k = 0; k < 3; ++k) {
            x(i, k) = normal01(rng);
        }
        y(i) = normal01(rng);
    }
    const auto a = gaussian_kernel_fit(x, y);
    std::vector<int> perm{5, 3, 11, 0, 1, 7, 9, 2, 10, 4, 6, 8};
    Eigen::MatrixXd xp(12, 3);
    Eigen::VectorXd yp(12);
    for (int i = 0; i < 12; ++i) {
        xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
        yp(i) = y(perm[static_cast<std::size_t>(i)]);
    }
    const auto b = gaussian_kernel_fit(xp, yp);
    for (int t = 0; t < 10; ++t) {
        Eigen::RowVectorXd q(3);
        q << normal01(rng), normal01(rng), normal01(rng);
        REQUIRE(a.predict(q) == b.predict(q));
    }
}

TEST_CASE("ridge shrinkage", "[baselines][property]") {
    const Eigen::MatrixXd x = col({0.0, 0.5, 1.0, 1.5});
    Eigen::VectorXd y(4);
    y << 1.0, 2.0, 1.5, 3.0;
    double prev = INFINITY;
    for (double lambda : {1e-3, 1e-1, 1.0, 10.0, 1e3, 1e6}) {
        const double v = std::abs(gaussian_kernel_fit(x, y, {1.0, lambda}).predict(at(0.7)));
        REQUIRE(v < prev);
        prev = v;
    }
    REQUIRE(prev < 1e-4);
}

TEST_CASE("MLP regressor", "[baselines]") {
    Rng rng(4);
    Eigen::MatrixXd x(40, 2);
    Eigen::VectorXd lin(40);
    for (int i = 0; i < 40; ++i) {
        x(i, 0) = uniform(rng, -1.0, 1.0);
        x(i, 1) = uniform(rng, -1.0, 1.0);
        lin(i) = 0.7 * x(i, 0) - 0.3 * x(i, 1) + 0.2;
    }
    MlpOptions opt;
    opt.epochs = 1500;
    opt.seed = 5;
    auto mse = [&](const MlpRegressor &m, const Eigen::VectorXd &y) {
        double s = 0.0;
        for (int i = 0; i < 40; ++i) {
            const double e = m.predict(x.row(i)) - y(i);
            s += e * e / 40.0;
        }
        return s;
    };
    SECTION("linear target") {
        const auto m = mlp_fit(x, lin, opt);
        REQUIRE(mse(m, lin) < 1e-3);
    }
    SECTION("constant target") {
        const Eigen::VectorXd c = Eigen::VectorXd::Constant(40, -0.4);
        const auto m = mlp_fit(x, c, opt);
        REQUIRE(mse(m, c) < 1e-6);
    }
    SECTION("deterministic under seed") {
        opt.epochs = 50;
        const auto a = mlp_fit(x, lin, opt);
        const auto b = mlp_fit(x, lin, opt);
        REQUIRE(a.predict(x.row(3)) == b.predict(x.row(3)));
    }
    SECTION("configuration errors") {
        opt.widths = {};
        REQUIRE_THROWS_AS(mlp_fit(x, lin, opt), ConfigError);
        opt.widths = {64, 0};
        REQUIRE_THROWS_AS(mlp_fit(x, lin, opt), ConfigError);
    }
    SECTION("gradient check") {
        opt.widths = {5, 4};
        MlpRegressor m(2, opt);
        const nn::Mat<double> xs = x.topRows(6);
        const nn::Mat<double> ys = lin.head(6);
        nn::GradCheckOptions g;
        g.tolerance = 1e-6;
        const auto r = nn::grad_check(m.parameters(), [&] { return nn::mse(m.forward(xs), ys); }, g);
        REQUIRE(r.passed);
    }
}
