#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "cgm/core/error.hpp"
#include "cgm/core/random.hpp"
#include "cgm/measurement/dataset.hpp"
#include "cgm/model/config.hpp"
#include "cgm/nn/layers.hpp"
#include "cgm/nn/ops.hpp"

namespace cgm::model {

using measurement::Condition;
using measurement::Outcome;
using nn::Mat;
using nn::Var;

/// pe(k, 2i) = sin(k / 10000^(2i/d)), pe(k, 2i+1) = cos(same angle).
inline double positional_encoding(int k, int idx, int d_model) {
    const int even = idx - idx % 2;
    const double angle =
        static_cast<double>(k) / std::pow(10000.0, static_cast<double>(even) / d_model);
    return idx % 2 == 0 ? std::sin(angle) : std::cos(angle);
}

template <class T> Mat<T> positional_table(int len, int d_model) {
    Mat<T> pe(len, d_model);
    for (int k = 0; k < len; ++k) {
        for (int i = 0; i < d_model; ++i) {
            pe(k, i) = static_cast<T>(positional_encoding(k, i, d_model));
        }
    }
    return pe;
}

/// D^-1/2 (A + I) D^-1/2 with D the row sums of A + I.
inline Eigen::MatrixXd normalized_adjacency(const quantum::CouplingGraph &g) {
    const int n = g.sites();
    const auto adj = g.adjacency();
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            a(i, j) = adj[static_cast<std::size_t>(i * n + j)] + (i == j ? 1.0 : 0.0);
        }
    }
    const Eigen::VectorXd deg = a.rowwise().sum();
    for (int i = 0; i < n; ++i) {
        CGM_REQUIRE(deg(i) > 0.0, InvalidArgument, "gcn: non-positive degree at node " + std::to_string(i));
    }
    const Eigen::VectorXd s = deg.cwiseSqrt().cwiseInverse();
    return s.asDiagonal() * a * s.asDiagonal();
}

/// Weighted degree sum_j x_ij per node (GCN input features).
inline Eigen::VectorXd weighted_degree(const quantum::CouplingGraph &g) {
    const int n = g.sites();
    const auto adj = g.adjacency();
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            d(i) += adj[static_cast<std::size_t>(i * n + j)];
        }
    }
    return d;
}

template <class T> struct DecoderBlock {
    nn::Linear<T> wq, wk, wv, wo, ff1, ff2;
    nn::LayerNorm<T> ln1, ln2;
    int heads = 1;

    DecoderBlock() = default;
    DecoderBlock(nn::ParameterSet<T> &ps, const std::string &name, const TransformerConfig &c,
                 Rng &rng)
        : wq(ps, name + ".wq", c.d_model, c.d_model, rng),
          wk(ps, name + ".wk", c.d_model, c.d_model, rng),
          wv(ps, name + ".wv", c.d_model, c.d_model, rng),
          wo(ps, name + ".wo", c.d_model, c.d_model, rng),
          ff1(ps, name + ".ff1", c.d_model, c.ffn(), rng),
          ff2(ps, name + ".ff2", c.ffn(), c.d_model, rng), ln1(ps, name + ".ln1", c.d_model),
          ln2(ps, name + ".ln2", c.d_model), heads(c.n_heads) {}

    /// Post-LN block over x = [batch*seq x d_model].
    [[nodiscard]] Var<T> operator()(const Var<T> &x, Eigen::Index seq, double p, bool train,
                                    Rng *rng) const {
        auto drop = [&](const Var<T> &v) {
            return train && p > 0.0 ? nn::dropout(v, p, true, *rng) : v;
        };
        const Var<T> att = nn::causal_attention(wq(x), wk(x), wv(x), seq, heads);
        const Var<T> h = ln1(nn::add(x, drop(wo(att))));
        const Var<T> f = ff2(nn::relu(ff1(h)));
        return ln2(nn::add(h, drop(f)));
    }
};

/// Minibatch for the likelihood: distinct conditions plus, per record, the
/// index of its condition and its token sequence.
struct Batch {
    std::vector<Condition> conditions;
    std::vector<int> condition_of;
    std::vector<const Outcome *> sequences;
};

/**
 * Conditional autoregressive transformer
 *   p(a | x) = prod_i p(a_i | a_<i, g(x)).
 *
 * Input position i holds the token of site i-1 (BOS at position 0) and
 * predicts site i. The conditioner output is added to every position after
 * the positional encoding.
 */
template <class T = double> class ConditionalModel {
  public:
    FeatureNormalizer normalizer;

    ConditionalModel(TransformerConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
        cfg_.validate();
        Rng rng(seed);
        tok_ = nn::Embedding<T>(params_, "tok", cfg_.vocab_size + 1, cfg_.d_model, rng);
        for (int b = 0; b < cfg_.n_blocks; ++b) {
            blocks_.emplace_back(params_, "block" + std::to_string(b), cfg_, rng);
        }
        out_ = nn::Linear<T>(params_, "out", cfg_.d_model, cfg_.vocab_size, rng);
        if (cfg_.conditioner == ConditionerKind::gcn) {
            int in = 1;
            for (std::size_t l = 0; l < cfg_.gcn_hidden.size(); ++l) {
                gcn_.emplace_back(params_, "cond.gcn" + std::to_string(l), in,
                                  cfg_.gcn_hidden[l], rng);
                in = cfg_.gcn_hidden[l];
            }
            pool_ = nn::Linear<T>(params_, "cond.pool", cfg_.grid_rows * cfg_.grid_cols * in,
                                  cfg_.d_model, rng);
        } else {
            pool_ = nn::Linear<T>(params_, "cond.linear", kRydbergFeatures, cfg_.d_model, rng);
        }
        pe_ = positional_table<T>(cfg_.max_sites, cfg_.d_model);
    }

    // Layers share nodes with params_, so copies would alias.
    ConditionalModel(const ConditionalModel &) = delete;
    ConditionalModel &operator=(const ConditionalModel &) = delete;
    ConditionalModel(ConditionalModel &&) noexcept = default;
    ConditionalModel &operator=(ConditionalModel &&) noexcept = default;

    [[nodiscard]] const TransformerConfig &config() const { return cfg_; }
    nn::ParameterSet<T> &parameters() { return params_; }
    [[nodiscard]] const nn::ParameterSet<T> &parameters() const { return params_; }
    [[nodiscard]] const Mat<T> &positional() const { return pe_; }
    [[nodiscard]] const nn::Embedding<T> &token_embedding() const { return tok_; }
    [[nodiscard]] const std::vector<DecoderBlock<T>> &blocks() const { return blocks_; }
    [[nodiscard]] const nn::Linear<T> &output() const { return out_; }

    /// When set, the conditioner output is replaced by zeros.
    bool suppress_condition = false;

    /// g(x) for each condition: [conditions x d_model].
    [[nodiscard]] Var<T> condition_embedding(const std::vector<Condition> &conds) const {
        CGM_REQUIRE(!conds.empty(), InvalidArgument, "no conditions given");
        const auto u = static_cast<Eigen::Index>(conds.size());
        if (suppress_condition) {
            return nn::constant<T>(Mat<T>::Zero(u, cfg_.d_model));
        }
        if (cfg_.conditioner == ConditionerKind::linear) {
            Mat<T> x(u, kRydbergFeatures);
            for (Eigen::Index r = 0; r < u; ++r) {
                const auto *p = std::get_if<measurement::RydbergParams>(&conds[r]);
                CGM_REQUIRE(p != nullptr, ConfigError,
                            "linear conditioner needs Rydberg parameters");
                const auto f = normalizer.apply(rydberg_features(*p));
                for (int k = 0; k < kRydbergFeatures; ++k) {
                    x(r, k) = static_cast<T>(f[k]);
                }
            }
            return pool_(nn::constant(std::move(x)));
        }
        const int n = cfg_.grid_rows * cfg_.grid_cols;
        Mat<T> ablk = Mat<T>::Zero(u * n, u * n);
        Mat<T> h0(u * n, 1);
        for (Eigen::Index r = 0; r < u; ++r) {
            const auto *g = std::get_if<quantum::CouplingGraph>(&conds[r]);
            CGM_REQUIRE(g != nullptr, ConfigError, "gcn conditioner needs a coupling graph");
            CGM_REQUIRE(g->dims().rows == cfg_.grid_rows && g->dims().cols == cfg_.grid_cols,
                        InvalidArgument,
                        "coupling graph is " + std::to_string(g->dims().rows) + "x" +
                            std::to_string(g->dims().cols) + ", model expects " +
                            std::to_string(cfg_.grid_rows) + "x" + std::to_string(cfg_.grid_cols));
            ablk.block(r * n, r * n, n, n) = normalized_adjacency(*g).template cast<T>();
            h0.middleRows(r * n, n) = weighted_degree(*g).template cast<T>();
        }
        const Var<T> a = nn::constant(std::move(ablk));
        Var<T> h = nn::constant(std::move(h0));
        for (std::size_t l = 0; l < gcn_.size(); ++l) {
            // Bias after aggregation; without it a single positive input
            // feature keeps every layer rank one. No ReLU on the last layer.
            h = nn::add_row(nn::matmul(a, nn::matmul(h, gcn_[l].weight)), gcn_[l].bias);
            if (l + 1 < gcn_.size()) {
                h = nn::relu(h);
            }
        }
        return pool_(nn::reshape(h, u, n * h.cols()));
    }

    /**
     * Logits for every position of a padded batch.
     * inputs: B rows of equal length L, starting with BOS.
     * cond_rows: [B x d_model], one conditioning row per sequence.
     * Returns [B*L x vocab].
     */
    [[nodiscard]] Var<T> logits(const std::vector<std::vector<int>> &inputs,
                                const Var<T> &cond_rows, bool train, Rng *rng) const {
        CGM_REQUIRE(!inputs.empty(), InvalidArgument, "empty batch");
        const auto len = static_cast<Eigen::Index>(inputs.front().size());
        CGM_REQUIRE(len >= 1 && len <= cfg_.max_sites, InvalidArgument,
                    "sequence length " + std::to_string(len) + " outside [1, max_sites=" +
                        std::to_string(cfg_.max_sites) + "]");
        CGM_REQUIRE(cond_rows.rows() == static_cast<Eigen::Index>(inputs.size()),
                    InvalidArgument, "one condition row per sequence required");
        CGM_REQUIRE(!train || cfg_.dropout == 0.0 || rng != nullptr, InvalidArgument,
                    "training forward pass needs an rng for dropout");
        std::vector<int> ids;
        ids.reserve(inputs.size() * static_cast<std::size_t>(len));
        for (const auto &s : inputs) {
            CGM_REQUIRE(static_cast<Eigen::Index>(s.size()) == len, InvalidArgument,
                        "ragged batch: pad sequences to equal length");
            for (int t : s) {
                if (t < 0 || t > cfg_.vocab_size) {
                    throw InvalidArgument("token " + std::to_string(t) + " out of vocabulary");
                }
                ids.push_back(t);
            }
        }
        const auto b = static_cast<Eigen::Index>(inputs.size());
        Mat<T> pe(b * len, cfg_.d_model);
        for (Eigen::Index r = 0; r < b; ++r) {
            pe.middleRows(r * len, len) = pe_.topRows(len);
        }
        Var<T> x = nn::add(tok_(std::move(ids)), nn::constant(std::move(pe)));
        x = nn::add(x, nn::repeat_rows(cond_rows, len));
        for (const auto &blk : blocks_) {
            x = blk(x, len, cfg_.dropout, train, rng);
        }
        return out_(x);
    }

    /// Mean over records of -sum_i log p(a_i | a_<i, g(x)). Shorter records
    /// are padded at the end; causal masking keeps padding invisible to the
    /// real positions and padded targets carry zero weight.
    [[nodiscard]] Var<T> loss(const Batch &batch, bool train, Rng *rng) const {
        CGM_REQUIRE(!batch.sequences.empty(), NoDataError, "empty batch");
        CGM_REQUIRE(batch.condition_of.size() == batch.sequences.size(), InvalidArgument,
                    "condition index per record required");
        std::size_t len = 0;
        for (const auto *s : batch.sequences) {
            len = std::max(len, s->size());
        }
        std::vector<std::vector<int>> inputs;
        std::vector<int> targets;
        std::vector<T> weights;
        const T w = T(1) / static_cast<T>(batch.sequences.size());
        for (const auto *s : batch.sequences) {
            std::vector<int> in(len, 0);
            in[0] = cfg_.bos();
            for (std::size_t i = 0; i < len; ++i) {
                if (i + 1 < len && i < s->size()) {
                    in[i + 1] = (*s)[i];
                }
                if (i < s->size()) {
                    CGM_REQUIRE((*s)[i] < cfg_.vocab_size, InvalidArgument,
                                "token out of vocabulary");
                    targets.push_back((*s)[i]);
                    weights.push_back(w);
                } else {
                    targets.push_back(0);
                    weights.push_back(T(0));
                }
            }
            inputs.push_back(std::move(in));
        }
        const Var<T> cond = condition_embedding(batch.conditions);
        const Var<T> rows = nn::gather_rows(cond, batch.condition_of);
        return nn::nll_from_logits(logits(inputs, rows, train, rng), std::move(targets),
                                   std::move(weights));
    }

    /// p(a_{t+1} | prefix, g(x)) where t = prefix length.
    [[nodiscard]] std::vector<double> next_distribution(const std::vector<int> &prefix,
                                                        const Condition &cond) const {
        CGM_REQUIRE(static_cast<int>(prefix.size()) < cfg_.max_sites, InvalidArgument,
                    "prefix length must be below max_sites");
        nn::NoGradGuard guard;
        std::vector<int> in{cfg_.bos()};
        in.insert(in.end(), prefix.begin(), prefix.end());
        const Var<T> lg = logits({in}, condition_embedding({cond}), false, nullptr);
        const auto last = lg.value().row(lg.rows() - 1);
        const T m = last.maxCoeff();
        std::vector<double> p(static_cast<std::size_t>(cfg_.vocab_size));
        double z = 0.0;
        for (int k = 0; k < cfg_.vocab_size; ++k) {
            p[k] = std::exp(static_cast<double>(last(k) - m));
            z += p[k];
        }
        for (auto &v : p) {
            v /= z;
        }
        return p;
    }

  private:
    TransformerConfig cfg_;
    nn::ParameterSet<T> params_;
    nn::Embedding<T> tok_;
    std::vector<DecoderBlock<T>> blocks_;
    nn::Linear<T> out_;
    std::vector<nn::Linear<T>> gcn_;
    nn::Linear<T> pool_;
    Mat<T> pe_;
};

/**
 * Exact model probabilities of all vocab^n sequences for one condition,
 * indexed with site 0 as the most significant digit.
 */
template <class T>
std::vector<double> exhaustive_distribution(const ConditionalModel<T> &model,
                                            const Condition &cond, int n) {
    const int v = model.config().vocab_size;
    double total = 1.0;
    for (int i = 0; i < n; ++i) {
        total *= v;
    }
    CGM_REQUIRE(total <= 1e7, InvalidArgument, "exhaustive_distribution: vocab^n exceeds 1e7");
    CGM_REQUIRE(n >= 1 && n <= model.config().max_sites, InvalidArgument,
                "exhaustive_distribution: bad sequence length");
    const auto count = static_cast<std::size_t>(total);
    nn::NoGradGuard guard;
    const Var<T> cond_emb = model.condition_embedding({cond});
    std::vector<double> out(count);
    const std::size_t chunk = 4096;
    for (std::size_t lo = 0; lo < count; lo += chunk) {
        const std::size_t hi = std::min(count, lo + chunk);
        std::vector<std::vector<int>> inputs;
        std::vector<std::vector<int>> seqs;
        for (std::size_t idx = lo; idx < hi; ++idx) {
            std::vector<int> s(static_cast<std::size_t>(n));
            std::size_t r = idx;
            for (int i = n - 1; i >= 0; --i) {
                s[static_cast<std::size_t>(i)] = static_cast<int>(r % static_cast<std::size_t>(v));
                r /= static_cast<std::size_t>(v);
            }
            std::vector<int> in{model.config().bos()};
            in.insert(in.end(), s.begin(), s.end() - 1);
            inputs.push_back(std::move(in));
            seqs.push_back(std::move(s));
        }
        const auto b = static_cast<Eigen::Index>(inputs.size());
        const Var<T> rows = nn::repeat_rows(cond_emb, b);
        const Var<T> lg = model.logits(inputs, rows, false, nullptr);
        for (Eigen::Index k = 0; k < b; ++k) {
            double logp = 0.0;
            for (int i = 0; i < n; ++i) {
                const auto row = lg.value().row(k * n + i);
                const double m = static_cast<double>(row.maxCoeff());
                double z = 0.0;
                for (int c = 0; c < v; ++c) {
                    z += std::exp(static_cast<double>(row(c)) - m);
                }
                logp += static_cast<double>(row(seqs[k][static_cast<std::size_t>(i)])) - m -
                        std::log(z);
            }
            out[lo + static_cast<std::size_t>(k)] = std::exp(logp);
        }
    }
    return out;
}

} // namespace cgm::model
