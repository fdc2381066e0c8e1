#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cgm/core/random.hpp"
#include "cgm/model/transformer.hpp"

namespace cgm::model {

namespace detail {

template <class T>
Mat<T> dense(const Mat<T> &x, const nn::Linear<T> &l) {
    Mat<T> y = x * l.weight.value();
    if (l.bias.defined()) {
        y.rowwise() += l.bias.value().row(0);
    }
    return y;
}

template <class T> void layer_norm_inplace(Mat<T> &x, const nn::LayerNorm<T> &ln) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const T mean = x.row(r).mean();
        x.row(r).array() -= mean;
        const T var = x.row(r).squaredNorm() / static_cast<T>(x.cols());
        x.row(r) *= T(1) / std::sqrt(var + T(1e-5));
    }
    x.array().rowwise() *= ln.gain.value().row(0).array();
    x.rowwise() += ln.bias.value().row(0);
}

/// Counter-based uniform draw: independent of batch layout and chunking.
inline double sample_uniform(std::uint64_t seed, std::uint64_t sample, std::uint64_t site) {
    return static_cast<double>(derive_seed(seed, sample, site) >> 11U) * 0x1.0p-53;
}

} // namespace detail

/**
 * Ancestral sampling of `count` sequences of length `n`, token by token,
 * reusing cached keys and values of earlier positions. Sample i at site t
 * uses the uniform variate derive_seed(seed, i, t), so results do not
 * depend on `chunk`.
 */
template <class T>
std::vector<Outcome> sample(const ConditionalModel<T> &model, const Condition &cond, int n,
                            std::size_t count, std::uint64_t seed, std::size_t chunk = 2048) {
    const auto &cfg = model.config();
    CGM_REQUIRE(n >= 1 && n <= cfg.max_sites, InvalidArgument,
                "sample: length " + std::to_string(n) + " outside [1, max_sites]");
    CGM_REQUIRE(chunk >= 1, InvalidArgument, "sample: chunk must be positive");
    Mat<T> c;
    {
        nn::NoGradGuard guard;
        c = model.condition_embedding({cond}).value();
    }
    const int d = cfg.d_model;
    const int heads = cfg.n_heads;
    const int dk = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dk));
    const auto &table = model.token_embedding().table.value();
    const auto &pe = model.positional();
    const auto nblocks = model.blocks().size();

    std::vector<Outcome> out;
    out.reserve(count);
    for (std::size_t lo = 0; lo < count; lo += chunk) {
        const auto b = static_cast<Eigen::Index>(std::min(chunk, count - lo));
        std::vector<std::vector<Mat<T>>> kc(nblocks), vc(nblocks);
        std::vector<int> prev(static_cast<std::size_t>(b), cfg.bos());
        std::vector<Outcome> seqs(static_cast<std::size_t>(b), Outcome(static_cast<std::size_t>(n)));
        for (int t = 0; t < n; ++t) {
            Mat<T> x(b, d);
            for (Eigen::Index r = 0; r < b; ++r) {
                x.row(r) = table.row(prev[static_cast<std::size_t>(r)]) + pe.row(t) + c.row(0);
            }
            for (std::size_t bi = 0; bi < nblocks; ++bi) {
                const auto &blk = model.blocks()[bi];
                const Mat<T> q = detail::dense(x, blk.wq);
                kc[bi].push_back(detail::dense(x, blk.wk));
                vc[bi].push_back(detail::dense(x, blk.wv));
                Mat<T> att = Mat<T>::Zero(b, d);
                Mat<T> s(b, t + 1);
                for (int h = 0; h < heads; ++h) {
                    for (int j = 0; j <= t; ++j) {
                        s.col(j) = (q.middleCols(h * dk, dk).cwiseProduct(
                                        kc[bi][static_cast<std::size_t>(j)].middleCols(h * dk, dk)))
                                       .rowwise()
                                       .sum() *
                                   scale;
                    }
                    for (Eigen::Index r = 0; r < b; ++r) {
                        const T m = s.row(r).maxCoeff();
                        s.row(r) = (s.row(r).array() - m).exp();
                        s.row(r) /= s.row(r).sum();
                    }
                    for (int j = 0; j <= t; ++j) {
                        att.middleCols(h * dk, dk) +=
                            (vc[bi][static_cast<std::size_t>(j)].middleCols(h * dk, dk).array()
                                 .colwise() *
                             s.col(j).array())
                                .matrix();
                    }
                }
                x += detail::dense(att, blk.wo);
                detail::layer_norm_inplace(x, blk.ln1);
                Mat<T> f = detail::dense(x, blk.ff1).cwiseMax(T(0));
                x += detail::dense(f, blk.ff2);
                detail::layer_norm_inplace(x, blk.ln2);
            }
            const Mat<T> logits = detail::dense(x, model.output());
            for (Eigen::Index r = 0; r < b; ++r) {
                const T m = logits.row(r).maxCoeff();
                std::vector<double> p(static_cast<std::size_t>(cfg.vocab_size));
                double z = 0.0;
                for (int k = 0; k < cfg.vocab_size; ++k) {
                    p[k] = std::exp(static_cast<double>(logits(r, k) - m));
                    z += p[k];
                }
                const double u =
                    detail::sample_uniform(seed, lo + static_cast<std::size_t>(r),
                                           static_cast<std::uint64_t>(t)) *
                    z;
                int tok = 0;
                double acc = 0.0;
                int last_positive = 0;
                for (int k = 0; k < cfg.vocab_size; ++k) {
                    if (p[k] > 0.0) {
                        last_positive = k;
                    }
                    acc += p[k];
                    if (u < acc) {
                        tok = k;
                        break;
                    }
                    tok = last_positive;
                }
                seqs[static_cast<std::size_t>(r)][static_cast<std::size_t>(t)] =
                    static_cast<std::uint8_t>(tok);
                prev[static_cast<std::size_t>(r)] = tok;
            }
        }
        for (auto &s : seqs) {
            out.push_back(std::move(s));
        }
    }
    return out;
}

} // namespace cgm::model
