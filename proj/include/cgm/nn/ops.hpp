#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "cgm/core/error.hpp"
#include "cgm/core/random.hpp"
#include "cgm/nn/tensor.hpp"

namespace cgm::nn {

namespace detail {

inline void require_same(const std::string &op, Eigen::Index r1, Eigen::Index c1, Eigen::Index r2,
                         Eigen::Index c2) {
    if (r1 != r2 || c1 != c2) {
        throw InvalidArgument(op + ": dimension mismatch " + shape_str(r1, c1) + " vs " +
                              shape_str(r2, c2));
    }
}

template <class T> Mat<T> &pgrad(Node<T> &self, std::size_t i) {
    return self.parents[i]->grad_ref();
}

template <class T> bool pneeds(const Node<T> &self, std::size_t i) {
    return self.parents[i]->requires_grad;
}

} // namespace detail

template <class T> Var<T> constant(Mat<T> m) { return Var<T>(std::move(m), false); }

template <class T> Var<T> matmul(const Var<T> &a, const Var<T> &b) {
    if (a.cols() != b.rows()) {
        throw InvalidArgument("matmul: dimension mismatch " + a.shape() + " vs " + b.shape());
    }
    Mat<T> out = a.value() * b.value();
    return Var<T>::make_result(std::move(out), {a, b}, [](Node<T> &self) {
        const auto &pa = self.parents[0]->value;
        const auto &pb = self.parents[1]->value;
        if (detail::pneeds(self, 0)) {
            detail::pgrad(self, 0).noalias() += self.grad * pb.transpose();
        }
        if (detail::pneeds(self, 1)) {
            detail::pgrad(self, 1).noalias() += pa.transpose() * self.grad;
        }
    });
}

template <class T> Var<T> add(const Var<T> &a, const Var<T> &b) {
    detail::require_same("add", a.rows(), a.cols(), b.rows(), b.cols());
    return Var<T>::make_result(a.value() + b.value(), {a, b}, [](Node<T> &self) {
        for (std::size_t i = 0; i < 2; ++i) {
            if (detail::pneeds(self, i)) {
                detail::pgrad(self, i) += self.grad;
            }
        }
    });
}

/// a + row vector broadcast over rows (bias add).
template <class T> Var<T> add_row(const Var<T> &a, const Var<T> &row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw InvalidArgument("add_row: dimension mismatch " + a.shape() + " vs " + row.shape());
    }
    Mat<T> out = a.value().rowwise() + row.value().row(0);
    return Var<T>::make_result(std::move(out), {a, row}, [](Node<T> &self) {
        if (detail::pneeds(self, 0)) {
            detail::pgrad(self, 0) += self.grad;
        }
        if (detail::pneeds(self, 1)) {
            detail::pgrad(self, 1) += self.grad.colwise().sum();
        }
    });
}

template <class T> Var<T> scale(const Var<T> &a, T s) {
    return Var<T>::make_result(a.value() * s, {a}, [s](Node<T> &self) {
        detail::pgrad(self, 0) += self.grad * s;
    });
}

template <class T> Var<T> relu(const Var<T> &a) {
    Mat<T> out = a.value().cwiseMax(T(0));
    return Var<T>::make_result(std::move(out), {a}, [](Node<T> &self) {
        const auto &x = self.parents[0]->value;
        detail::pgrad(self, 0).array() +=
            self.grad.array() * (x.array() > T(0)).template cast<T>();
    });
}

/// Row-wise softmax over the last axis.
template <class T> Var<T> softmax(const Var<T> &a) {
    Mat<T> out(a.rows(), a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const T m = a.value().row(r).maxCoeff();
        out.row(r) = (a.value().row(r).array() - m).exp();
        out.row(r) /= out.row(r).sum();
    }
    Mat<T> saved = out;
    return Var<T>::make_result(std::move(out), {a}, [saved](Node<T> &self) {
        for (Eigen::Index r = 0; r < saved.rows(); ++r) {
            const T dot = self.grad.row(r).dot(saved.row(r));
            detail::pgrad(self, 0).row(r).array() +=
                saved.row(r).array() * (self.grad.row(r).array() - dot);
        }
    });
}

template <class T> Var<T> log(const Var<T> &a) {
    return Var<T>::make_result(a.value().array().log().matrix(), {a}, [](Node<T> &self) {
        detail::pgrad(self, 0).array() += self.grad.array() / self.parents[0]->value.array();
    });
}

/// Rows of `table` selected by `ids` (embedding lookup).
template <class T> Var<T> embedding(const Var<T> &table, std::vector<int> ids) {
    Mat<T> out(static_cast<Eigen::Index>(ids.size()), table.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= table.rows()) {
            throw InvalidArgument("embedding: id " + std::to_string(ids[i]) +
                                  " outside table " + table.shape());
        }
        out.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
    }
    return Var<T>::make_result(std::move(out), {table}, [ids = std::move(ids)](Node<T> &self) {
        auto &g = detail::pgrad(self, 0);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            g.row(ids[i]) += self.grad.row(static_cast<Eigen::Index>(i));
        }
    });
}

/// Same rows as embedding() but for an arbitrary source (gather).
template <class T> Var<T> gather_rows(const Var<T> &src, std::vector<int> ids) {
    return embedding(src, std::move(ids));
}

/// Each row of `a` repeated `times` consecutively: [B x d] -> [B*times x d].
template <class T> Var<T> repeat_rows(const Var<T> &a, Eigen::Index times) {
    Mat<T> out(a.rows() * times, a.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        out.middleRows(r * times, times).rowwise() = a.value().row(r);
    }
    return Var<T>::make_result(std::move(out), {a}, [times](Node<T> &self) {
        auto &g = detail::pgrad(self, 0);
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
            g.row(r) += self.grad.middleRows(r * times, times).colwise().sum();
        }
    });
}

/**
 * Layer normalisation over the last axis with trainable gain and bias:
 * y = gain * (x - mean) / sqrt(var + eps) + bias.
 */
template <class T>
Var<T> layer_norm(const Var<T> &x, const Var<T> &gain, const Var<T> &bias, T eps = T(1e-5)) {
    const Eigen::Index d = x.cols();
    if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
        throw InvalidArgument("layer_norm: dimension mismatch " + x.shape() + " vs gain " +
                              gain.shape() + " / bias " + bias.shape());
    }
    Mat<T> xhat(x.rows(), d);
    Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const T mean = x.value().row(r).mean();
        const auto centered = (x.value().row(r).array() - mean).eval();
        const T var = centered.square().mean();
        inv_std(r) = T(1) / std::sqrt(var + eps);
        xhat.row(r) = centered * inv_std(r);
    }
    Mat<T> out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
    out.rowwise() += bias.value().row(0);
    return Var<T>::make_result(
        std::move(out), {x, gain, bias}, [xhat, inv_std](Node<T> &self) {
            const auto &g = self.parents[1]->value;
            const auto dn = static_cast<T>(xhat.cols());
            if (detail::pneeds(self, 0)) {
                auto &gx = detail::pgrad(self, 0);
                for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
                    const auto dxhat = (self.grad.row(r).array() * g.row(0).array()).eval();
                    const T s1 = dxhat.sum();
                    const T s2 = (dxhat * xhat.row(r).array()).sum();
                    gx.row(r).array() +=
                        inv_std(r) / dn * (dn * dxhat - s1 - xhat.row(r).array() * s2);
                }
            }
            if (detail::pneeds(self, 1)) {
                detail::pgrad(self, 1) +=
                    (self.grad.array() * xhat.array()).matrix().colwise().sum();
            }
            if (detail::pneeds(self, 2)) {
                detail::pgrad(self, 2) += self.grad.colwise().sum();
            }
        });
}

/// Inverted dropout: zeroes entries with probability p and scales the rest
/// by 1/(1-p) while training; identity otherwise.
template <class T> Var<T> dropout(const Var<T> &x, double p, bool train, Rng &rng) {
    CGM_REQUIRE(p >= 0.0 && p < 1.0, InvalidArgument, "dropout rate must be in [0, 1)");
    if (!train || p == 0.0) {
        return x;
    }
    const T keep_scale = T(1) / static_cast<T>(1.0 - p);
    Mat<T> mask(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
        mask.data()[i] = uniform01(rng) < p ? T(0) : keep_scale;
    }
    Mat<T> out = x.value().cwiseProduct(mask);
    return Var<T>::make_result(std::move(out), {x}, [mask](Node<T> &self) {
        detail::pgrad(self, 0) += self.grad.cwiseProduct(mask);
    });
}

/// Row-major reinterpretation with a new shape.
template <class T> Var<T> reshape(const Var<T> &x, Eigen::Index rows, Eigen::Index cols) {
    if (rows * cols != x.value().size()) {
        throw InvalidArgument("reshape: cannot view " + x.shape() + " as " + shape_str(rows, cols));
    }
    Mat<T> out = Eigen::Map<const Mat<T>>(x.value().data(), rows, cols);
    return Var<T>::make_result(std::move(out), {x}, [](Node<T> &self) {
        auto &g = detail::pgrad(self, 0);
        g += Eigen::Map<const Mat<T>>(self.grad.data(), g.rows(), g.cols());
    });
}

template <class T> Var<T> transpose(const Var<T> &x) {
    Mat<T> out = x.value().transpose();
    return Var<T>::make_result(std::move(out), {x}, [](Node<T> &self) {
        detail::pgrad(self, 0) += self.grad.transpose();
    });
}

/// Entries where mask is true are replaced by `fill`; no gradient flows there.
template <class T>
Var<T> masked_fill(const Var<T> &x, const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic,
                                                     Eigen::RowMajor> &mask,
                   T fill) {
    detail::require_same("masked_fill", x.rows(), x.cols(), mask.rows(), mask.cols());
    Mat<T> out = mask.select(Mat<T>::Constant(x.rows(), x.cols(), fill), x.value());
    return Var<T>::make_result(std::move(out), {x}, [mask](Node<T> &self) {
        detail::pgrad(self, 0) += mask.select(Mat<T>::Zero(mask.rows(), mask.cols()), self.grad);
    });
}

template <class T> Var<T> sum(const Var<T> &x) {
    Mat<T> out(1, 1);
    out(0, 0) = x.value().sum();
    return Var<T>::make_result(std::move(out), {x}, [](Node<T> &self) {
        detail::pgrad(self, 0).array() += self.grad(0, 0);
    });
}

template <class T> Var<T> mean(const Var<T> &x) {
    return scale(sum(x), T(1) / static_cast<T>(x.value().size()));
}

/// Mean squared error against a constant target.
template <class T> Var<T> mse(const Var<T> &pred, const Mat<T> &target) {
    detail::require_same("mse", pred.rows(), pred.cols(), target.rows(), target.cols());
    const Mat<T> diff = pred.value() - target;
    Mat<T> out(1, 1);
    out(0, 0) = diff.squaredNorm() / static_cast<T>(diff.size());
    return Var<T>::make_result(std::move(out), {pred}, [diff](Node<T> &self) {
        detail::pgrad(self, 0) += diff * (T(2) * self.grad(0, 0) / static_cast<T>(diff.size()));
    });
}

/**
 * Weighted negative log-likelihood straight from logits:
 *   sum_r w_r * (logsumexp(logits_r) - logits_r[target_r]).
 * Rows with weight 0 (padding) contribute nothing. Uses log-sum-exp, so
 * vanishing probabilities never produce NaN.
 */
template <class T>
Var<T> nll_from_logits(const Var<T> &logits, std::vector<int> targets, std::vector<T> weights) {
    const auto rows = static_cast<std::size_t>(logits.rows());
    if (targets.size() != rows || weights.size() != rows) {
        throw InvalidArgument("nll_from_logits: " + std::to_string(targets.size()) +
                              " targets for logits " + logits.shape());
    }
    Mat<T> probs(logits.rows(), logits.cols());
    T total = 0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const auto t = targets[static_cast<std::size_t>(r)];
        if (t < 0 || t >= logits.cols()) {
            throw InvalidArgument("nll_from_logits: target " + std::to_string(t) +
                                  " outside vocabulary of " + std::to_string(logits.cols()));
        }
        const T m = logits.value().row(r).maxCoeff();
        probs.row(r) = (logits.value().row(r).array() - m).exp();
        const T z = probs.row(r).sum();
        probs.row(r) /= z;
        const T w = weights[static_cast<std::size_t>(r)];
        if (w != T(0)) {
            total += w * (m + std::log(z) - logits.value()(r, t));
        }
    }
    Mat<T> out(1, 1);
    out(0, 0) = total;
    return Var<T>::make_result(
        std::move(out), {logits},
        [probs, targets = std::move(targets), weights = std::move(weights)](Node<T> &self) {
            auto &g = detail::pgrad(self, 0);
            const T up = self.grad(0, 0);
            for (Eigen::Index r = 0; r < probs.rows(); ++r) {
                const T w = weights[static_cast<std::size_t>(r)] * up;
                if (w == T(0)) {
                    continue;
                }
                g.row(r) += w * probs.row(r);
                g(r, targets[static_cast<std::size_t>(r)]) -= w;
            }
        });
}

/**
 * Fused multi-head scaled dot-product attention with a causal mask.
 *
 * q, k, v are [batch*seq x heads*d_k]; head h uses columns h*d_k..(h+1)*d_k.
 * Position t attends to positions <= t of its own sequence:
 *   out = softmax(Q K^T / sqrt(d_k) + mask) V.
 * Output heads are concatenated in the same column layout.
 */
template <class T>
Var<T> causal_attention(const Var<T> &q, const Var<T> &k, const Var<T> &v, Eigen::Index seq,
                        Eigen::Index heads, bool causal = true) {
    detail::require_same("attention(q,k)", q.rows(), q.cols(), k.rows(), k.cols());
    detail::require_same("attention(q,v)", q.rows(), q.cols(), v.rows(), v.cols());
    if (seq <= 0 || q.rows() % seq != 0 || heads <= 0 || q.cols() % heads != 0) {
        throw InvalidArgument("attention: shape " + q.shape() + " incompatible with seq " +
                              std::to_string(seq) + ", heads " + std::to_string(heads));
    }
    const Eigen::Index batch = q.rows() / seq;
    const Eigen::Index dk = q.cols() / heads;
    const T scale_f = T(1) / std::sqrt(static_cast<T>(dk));
    // probs: for each (b, h) a seq x seq block, stacked along rows.
    Mat<T> probs(batch * heads * seq, seq);
    Mat<T> out(q.rows(), q.cols());
    Mat<T> scores(seq, seq);
    for (Eigen::Index b = 0; b < batch; ++b) {
        for (Eigen::Index h = 0; h < heads; ++h) {
            const auto qb = q.value().block(b * seq, h * dk, seq, dk);
            const auto kb = k.value().block(b * seq, h * dk, seq, dk);
            const auto vb = v.value().block(b * seq, h * dk, seq, dk);
            scores.noalias() = qb * kb.transpose();
            auto pb = probs.middleRows((b * heads + h) * seq, seq);
            for (Eigen::Index i = 0; i < seq; ++i) {
                const Eigen::Index visible = causal ? i + 1 : seq;
                T m = -std::numeric_limits<T>::infinity();
                for (Eigen::Index j = 0; j < visible; ++j) {
                    m = std::max(m, scores(i, j) * scale_f);
                }
                T z = 0;
                for (Eigen::Index j = 0; j < seq; ++j) {
                    const T e = j < visible ? std::exp(scores(i, j) * scale_f - m) : T(0);
                    pb(i, j) = e;
                    z += e;
                }
                pb.row(i) /= z;
            }
            out.block(b * seq, h * dk, seq, dk).noalias() = pb * vb;
        }
    }
    return Var<T>::make_result(
        std::move(out), {q, k, v}, [probs, seq, heads, dk, scale_f](Node<T> &self) {
            const auto &qv = self.parents[0]->value;
            const auto &kv = self.parents[1]->value;
            const auto &vv = self.parents[2]->value;
            const Eigen::Index batch = qv.rows() / seq;
            Mat<T> dp(seq, seq);
            Mat<T> ds(seq, seq);
            Mat<T> *gq = detail::pneeds(self, 0) ? &detail::pgrad(self, 0) : nullptr;
            Mat<T> *gk = detail::pneeds(self, 1) ? &detail::pgrad(self, 1) : nullptr;
            Mat<T> *gv = detail::pneeds(self, 2) ? &detail::pgrad(self, 2) : nullptr;
            for (Eigen::Index b = 0; b < batch; ++b) {
                for (Eigen::Index h = 0; h < heads; ++h) {
                    const auto pb = probs.middleRows((b * heads + h) * seq, seq);
                    const auto go = self.grad.block(b * seq, h * dk, seq, dk);
                    const auto vb = vv.block(b * seq, h * dk, seq, dk);
                    if (gv != nullptr) {
                        gv->block(b * seq, h * dk, seq, dk).noalias() += pb.transpose() * go;
                    }
                    dp.noalias() = go * vb.transpose();
                    for (Eigen::Index i = 0; i < seq; ++i) {
                        const T dot = dp.row(i).dot(pb.row(i));
                        ds.row(i) = pb.row(i).array() * (dp.row(i).array() - dot) * scale_f;
                    }
                    if (gq != nullptr) {
                        gq->block(b * seq, h * dk, seq, dk).noalias() +=
                            ds * kv.block(b * seq, h * dk, seq, dk);
                    }
                    if (gk != nullptr) {
                        gk->block(b * seq, h * dk, seq, dk).noalias() +=
                            ds.transpose() * qv.block(b * seq, h * dk, seq, dk);
                    }
                }
            }
        });
}

} // namespace cgm::nn
