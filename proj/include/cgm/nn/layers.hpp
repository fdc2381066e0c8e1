#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cgm/core/error.hpp"
#include "cgm/core/random.hpp"
#include "cgm/nn/ops.hpp"
#include "cgm/nn/tensor.hpp"

namespace cgm::nn {

/// Trainable tensor plus Adam state.
template <class T> struct Parameter {
    std::string name;
    Var<T> var;
    Mat<T> m;
    Mat<T> v;
    std::int64_t step = 0;
};

/// Owns every parameter of a model, in registration order.
template <class T> class ParameterSet {
  public:
    Var<T> add(const std::string &name, Mat<T> init) {
        for (const auto &p : params_) {
            CGM_REQUIRE(p.name != name, InvalidArgument, "duplicate parameter name " + name);
        }
        Parameter<T> p;
        p.name = name;
        p.m = Mat<T>::Zero(init.rows(), init.cols());
        p.v = Mat<T>::Zero(init.rows(), init.cols());
        p.var = Var<T>(std::move(init), true);
        params_.push_back(std::move(p));
        return params_.back().var;
    }

    void zero_grad() {
        for (auto &p : params_) {
            p.var.zero_grad();
        }
    }

    [[nodiscard]] std::size_t count() const {
        std::size_t n = 0;
        for (const auto &p : params_) {
            n += static_cast<std::size_t>(p.var.value().size());
        }
        return n;
    }

    Parameter<T> &find(const std::string &name) {
        for (auto &p : params_) {
            if (p.name == name) {
                return p;
            }
        }
        throw InvalidArgument("no parameter named " + name);
    }

    std::vector<Parameter<T>> &items() { return params_; }
    [[nodiscard]] const std::vector<Parameter<T>> &items() const { return params_; }

  private:
    std::vector<Parameter<T>> params_;
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
template <class T> Mat<T> xavier_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng &rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Mat<T> w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        w.data()[i] = static_cast<T>(uniform(rng, -bound, bound));
    }
    return w;
}

template <class T> Mat<T> normal_init(Eigen::Index rows, Eigen::Index cols, double sigma, Rng &rng) {
    Mat<T> w(rows, cols);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        w.data()[i] = static_cast<T>(sigma * normal01(rng));
    }
    return w;
}

/// y = x W + b, with W stored [in x out].
template <class T> struct Linear {
    Var<T> weight;
    Var<T> bias;

    Linear() = default;
    Linear(ParameterSet<T> &ps, const std::string &name, Eigen::Index in, Eigen::Index out,
           Rng &rng, bool with_bias = true) {
        CGM_REQUIRE(in > 0 && out > 0, ConfigError, name + ": layer widths must be positive");
        weight = ps.add(name + ".weight", xavier_uniform<T>(in, out, rng));
        if (with_bias) {
            bias = ps.add(name + ".bias", Mat<T>::Zero(1, out));
        }
    }

    [[nodiscard]] Var<T> operator()(const Var<T> &x) const {
        Var<T> y = matmul(x, weight);
        return bias.defined() ? add_row(y, bias) : y;
    }
};

template <class T> struct LayerNorm {
    Var<T> gain;
    Var<T> bias;

    LayerNorm() = default;
    LayerNorm(ParameterSet<T> &ps, const std::string &name, Eigen::Index dim) {
        gain = ps.add(name + ".gain", Mat<T>::Ones(1, dim));
        bias = ps.add(name + ".bias", Mat<T>::Zero(1, dim));
    }

    [[nodiscard]] Var<T> operator()(const Var<T> &x) const { return layer_norm(x, gain, bias); }
};

template <class T> struct Embedding {
    Var<T> table;

    Embedding() = default;
    Embedding(ParameterSet<T> &ps, const std::string &name, Eigen::Index vocab, Eigen::Index dim,
              Rng &rng) {
        table = ps.add(name + ".table", normal_init<T>(vocab, dim, 0.02, rng));
    }

    [[nodiscard]] Var<T> operator()(std::vector<int> ids) const {
        return embedding(table, std::move(ids));
    }
};

} // namespace cgm::nn
