#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "cgm/core/error.hpp"
#include "cgm/core/random.hpp"
#include "cgm/nn/layers.hpp"
#include "cgm/nn/optim.hpp"

namespace cgm::baselines {

struct MlpOptions {
    std::vector<int> widths{64, 64};
    int epochs = 3000;
    double peak_lr = 1e-2;
    double floor_lr = 1e-5;
    int warmup = 50;
    std::uint64_t seed = 0;
};

/// ReLU regressor on standardised inputs, trained full-batch with Adam on
/// squared error.
class MlpRegressor {
  public:
    MlpRegressor(Eigen::Index in_dim, const MlpOptions &opt) {
        CGM_REQUIRE(!opt.widths.empty(), ConfigError, "mlp needs at least one hidden layer");
        Rng rng(derive_seed(opt.seed, 0x6d6c70ULL));
        Eigen::Index prev = in_dim;
        for (std::size_t l = 0; l < opt.widths.size(); ++l) {
            CGM_REQUIRE(opt.widths[l] > 0, ConfigError, "mlp hidden widths must be positive");
            layers_.emplace_back(params_, "mlp" + std::to_string(l), prev, opt.widths[l], rng);
            prev = opt.widths[l];
        }
        layers_.emplace_back(params_, "mlp.out", prev, 1, rng);
        mean_ = Eigen::RowVectorXd::Zero(in_dim);
        scale_ = Eigen::RowVectorXd::Ones(in_dim);
    }

    MlpRegressor(const MlpRegressor &) = delete;
    MlpRegressor &operator=(const MlpRegressor &) = delete;
    MlpRegressor(MlpRegressor &&) noexcept = default;
    MlpRegressor &operator=(MlpRegressor &&) noexcept = default;

    nn::ParameterSet<double> &parameters() { return params_; }

    [[nodiscard]] nn::Var<double> forward(const nn::Mat<double> &x) const {
        nn::Mat<double> z = x;
        for (Eigen::Index r = 0; r < z.rows(); ++r) {
            z.row(r) = (z.row(r) - mean_).cwiseQuotient(scale_);
        }
        nn::Var<double> h = nn::constant(std::move(z));
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            h = layers_[l](h);
            if (l + 1 < layers_.size()) {
                h = nn::relu(h);
            }
        }
        return h;
    }

    void set_standardization(const Eigen::RowVectorXd &mean, const Eigen::RowVectorXd &scale) {
        mean_ = mean;
        scale_ = scale;
    }

    [[nodiscard]] double predict(const Eigen::RowVectorXd &q) const {
        nn::NoGradGuard guard;
        return forward(nn::Mat<double>(q)).item();
    }

  private:
    nn::ParameterSet<double> params_;
    std::vector<nn::Linear<double>> layers_;
    Eigen::RowVectorXd mean_;
    Eigen::RowVectorXd scale_;
};

inline MlpRegressor mlp_fit(const Eigen::MatrixXd &x, const Eigen::VectorXd &y,
                            const MlpOptions &opt = {}) {
    CGM_REQUIRE(x.rows() >= 1, NoDataError, "mlp fit needs at least one training point");
    CGM_REQUIRE(x.rows() == y.size(), InvalidArgument, "mlp fit: inputs and targets differ in length");
    MlpRegressor m(x.cols(), opt);
    const Eigen::RowVectorXd mean = x.colwise().mean();
    Eigen::RowVectorXd scale(x.cols());
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
        const double sd = std::sqrt((x.col(k).array() - mean(k)).square().mean());
        scale(k) = sd > 1e-12 ? sd : 1.0;
    }
    m.set_standardization(mean, scale);
    const nn::Mat<double> xs = x;
    const nn::Mat<double> target = y;
    for (int step = 0; step < opt.epochs; ++step) {
        m.parameters().zero_grad();
        const auto loss = nn::mse(m.forward(xs), target);
        if (!std::isfinite(loss.item())) {
            throw NumericalError("mlp training diverged at step " + std::to_string(step));
        }
        nn::backward(loss);
        nn::adam_step(m.parameters(),
                      nn::lr_schedule(step + 1, opt.epochs, std::min(opt.warmup, opt.epochs),
                                      opt.peak_lr, opt.floor_lr));
    }
    m.parameters().zero_grad();
    return m;
}

} // namespace cgm::baselines
