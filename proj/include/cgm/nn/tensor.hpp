#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "cgm/core/error.hpp"

namespace cgm::nn {

template <class T> using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Gradient recording switch, per thread.
inline bool &grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

/// Disables graph recording for its lifetime (inference, finite differences).
class NoGradGuard {
  public:
    NoGradGuard() : prev_(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev_; }
    NoGradGuard(const NoGradGuard &) = delete;
    NoGradGuard &operator=(const NoGradGuard &) = delete;

  private:
    bool prev_;
};

template <class T> struct Node {
    Mat<T> value;
    Mat<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node &)> backward;

    Mat<T> &grad_ref() {
        if (grad.size() == 0) {
            grad = Mat<T>::Zero(value.rows(), value.cols());
        }
        return grad;
    }
};

inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
    return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

/**
 * A 2-D tensor node in a reverse-mode autodiff graph.
 *
 * Values are row-major matrices; sequences of a batch are stacked along
 * rows (batch * seq x features). Copies share the node.
 */
template <class T> class Var {
  public:
    Var() = default;
    explicit Var(Mat<T> value, bool requires_grad = false)
        : node_(std::make_shared<Node<T>>()) {
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }

    [[nodiscard]] const Mat<T> &value() const { return node_->value; }
    Mat<T> &mutable_value() { return node_->value; }
    [[nodiscard]] const Mat<T> &grad() const { return node_->grad; }
    Mat<T> &mutable_grad() { return node_->grad_ref(); }
    [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
    [[nodiscard]] Eigen::Index rows() const { return node_->value.rows(); }
    [[nodiscard]] Eigen::Index cols() const { return node_->value.cols(); }
    [[nodiscard]] std::string shape() const { return shape_str(rows(), cols()); }
    [[nodiscard]] T item() const {
        CGM_REQUIRE(node_->value.size() == 1, InvalidArgument, "item() needs a 1x1 tensor");
        return node_->value(0, 0);
    }
    void zero_grad() { node_->grad.resize(0, 0); }
    [[nodiscard]] bool defined() const { return static_cast<bool>(node_); }
    [[nodiscard]] const std::shared_ptr<Node<T>> &node() const { return node_; }

    /// Result node of an op. Parents and the backward closure are only kept
    /// when recording is on and some parent needs a gradient.
    static Var make_result(Mat<T> value, std::vector<Var> parents,
                           std::function<void(Node<T> &)> backward) {
        Var out(std::move(value));
        if (!grad_mode()) {
            return out;
        }
        bool needs = false;
        for (const auto &p : parents) {
            needs = needs || p.requires_grad();
        }
        if (!needs) {
            return out;
        }
        out.node_->requires_grad = true;
        for (auto &p : parents) {
            out.node_->parents.push_back(p.node_);
        }
        out.node_->backward = std::move(backward);
        return out;
    }

  private:
    std::shared_ptr<Node<T>> node_;
};

/// Runs reverse-mode accumulation from a scalar. Gradients add into the
/// existing buffers of leaf parameters, so callers zero them between steps.
template <class T> void backward(const Var<T> &loss) {
    CGM_REQUIRE(loss.value().size() == 1, InvalidArgument,
                "backward() needs a scalar loss, got " + loss.shape());
    if (!loss.requires_grad()) {
        return;
    }
    std::vector<Node<T> *> order;
    std::unordered_set<Node<T> *> seen;
    // Iterative post-order DFS.
    std::vector<std::pair<Node<T> *, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto &[node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node<T> *p = node->parents[idx].get();
            ++idx;
            if (p->requires_grad && seen.insert(p).second) {
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss.node()->grad_ref().setConstant(T(1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T> *n = *it;
        if (n->backward && n->grad.size() != 0) {
            n->backward(*n);
        }
    }
    // Free intermediate buffers; leaves keep theirs.
    for (Node<T> *n : order) {
        if (!n->parents.empty()) {
            n->grad.resize(0, 0);
        }
    }
}

} // namespace cgm::nn
