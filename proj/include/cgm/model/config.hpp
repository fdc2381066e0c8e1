#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgm/core/error.hpp"
#include "cgm/measurement/dataset.hpp"

namespace cgm::model {

enum class ConditionerKind { gcn, linear };

inline const char *to_string(ConditionerKind k) { return k == ConditionerKind::gcn ? "gcn" : "linear"; }

inline ConditionerKind conditioner_from_string(const std::string &s) {
    if (s == "gcn") {
        return ConditionerKind::gcn;
    }
    if (s == "linear") {
        return ConditionerKind::linear;
    }
    throw ConfigError("unknown conditioner kind '" + s + "' (expected gcn or linear)");
}

struct TransformerConfig {
    int d_model = 128;
    int n_heads = 4;
    int n_blocks = 4;
    int ffn_hidden = 0; // 0 means 4 * d_model
    double dropout = 0.1;
    int vocab_size = 6;
    int max_sites = 16;
    ConditionerKind conditioner = ConditionerKind::gcn;
    // GCN only: node layout of the coupling graphs.
    int grid_rows = 0;
    int grid_cols = 0;
    std::vector<int> gcn_hidden{64, 32, 16};

    [[nodiscard]] int ffn() const { return ffn_hidden > 0 ? ffn_hidden : 4 * d_model; }
    [[nodiscard]] int bos() const { return vocab_size; }

    void validate() const {
        CGM_REQUIRE(d_model > 0 && n_heads > 0 && n_blocks >= 0, ConfigError,
                    "model sizes must be positive");
        CGM_REQUIRE(d_model % n_heads == 0, ConfigError,
                    "d_model (" + std::to_string(d_model) + ") must be divisible by n_heads (" +
                        std::to_string(n_heads) + ")");
        CGM_REQUIRE(dropout >= 0.0 && dropout < 1.0, ConfigError, "dropout must be in [0, 1)");
        CGM_REQUIRE(vocab_size >= 2, ConfigError, "vocab_size must be at least 2");
        CGM_REQUIRE(max_sites >= 1, ConfigError, "max_sites must be positive");
        if (conditioner == ConditionerKind::gcn) {
            CGM_REQUIRE(grid_rows > 0 && grid_cols > 0, ConfigError,
                        "gcn conditioner needs grid_rows and grid_cols");
            CGM_REQUIRE(grid_rows * grid_cols <= max_sites, ConfigError,
                        "grid larger than max_sites");
            CGM_REQUIRE(!gcn_hidden.empty(), ConfigError, "gcn needs at least one layer");
            for (int h : gcn_hidden) {
                CGM_REQUIRE(h > 0, ConfigError, "gcn hidden sizes must be positive");
            }
        }
    }
};

inline void to_json(nlohmann::json &j, const TransformerConfig &c) {
    j = {{"d_model", c.d_model},
         {"n_heads", c.n_heads},
         {"n_blocks", c.n_blocks},
         {"ffn_hidden", c.ffn_hidden},
         {"dropout", c.dropout},
         {"vocab_size", c.vocab_size},
         {"max_sites", c.max_sites},
         {"conditioner", to_string(c.conditioner)},
         {"grid_rows", c.grid_rows},
         {"grid_cols", c.grid_cols},
         {"gcn_hidden", c.gcn_hidden}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json &j, TransformerConfig &c) {
    static const std::vector<std::string> known = {
        "d_model", "n_heads", "n_blocks", "ffn_hidden", "dropout", "vocab_size",
        "max_sites", "conditioner", "grid_rows", "grid_cols", "gcn_hidden"};
    for (const auto &[k, v] : j.items()) {
        if (std::find(known.begin(), known.end(), k) == known.end()) {
            throw ConfigError("unknown model config key '" + k + "'");
        }
    }
    c.d_model = j.value("d_model", c.d_model);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.n_blocks = j.value("n_blocks", c.n_blocks);
    c.ffn_hidden = j.value("ffn_hidden", c.ffn_hidden);
    c.dropout = j.value("dropout", c.dropout);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.max_sites = j.value("max_sites", c.max_sites);
    if (j.contains("conditioner")) {
        c.conditioner = conditioner_from_string(j.at("conditioner").get<std::string>());
    }
    c.grid_rows = j.value("grid_rows", c.grid_rows);
    c.grid_cols = j.value("grid_cols", c.grid_cols);
    c.gcn_hidden = j.value("gcn_hidden", c.gcn_hidden);
}

/// Raw linear-conditioner input: (n_rows, n_cols, a, omega, delta/omega, T).
inline constexpr int kRydbergFeatures = 6;

inline std::array<double, kRydbergFeatures> rydberg_features(const measurement::RydbergParams &p) {
    return {static_cast<double>(p.n_rows), static_cast<double>(p.n_cols), p.a, p.omega,
            p.delta_over_omega(), p.T};
}

/// Per-feature standardisation fitted on the training systems. Features with
/// zero spread are only centred.
struct FeatureNormalizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static FeatureNormalizer fit(const std::vector<std::array<double, kRydbergFeatures>> &rows) {
        CGM_REQUIRE(!rows.empty(), NoDataError, "cannot fit normaliser on zero systems");
        FeatureNormalizer f;
        f.mean.assign(kRydbergFeatures, 0.0);
        f.scale.assign(kRydbergFeatures, 1.0);
        const double n = static_cast<double>(rows.size());
        for (const auto &r : rows) {
            for (int k = 0; k < kRydbergFeatures; ++k) {
                f.mean[k] += r[k] / n;
            }
        }
        for (int k = 0; k < kRydbergFeatures; ++k) {
            double ss = 0.0;
            for (const auto &r : rows) {
                ss += (r[k] - f.mean[k]) * (r[k] - f.mean[k]);
            }
            const double sd = std::sqrt(ss / n);
            f.scale[k] = sd > 1e-12 ? sd : 1.0;
        }
        return f;
    }

    [[nodiscard]] std::array<double, kRydbergFeatures>
    apply(const std::array<double, kRydbergFeatures> &x) const {
        std::array<double, kRydbergFeatures> out{};
        for (int k = 0; k < kRydbergFeatures; ++k) {
            out[k] = mean.empty() ? x[k] : (x[k] - mean[k]) / scale[k];
        }
        return out;
    }
};

inline void to_json(nlohmann::json &j, const FeatureNormalizer &f) {
    j = {{"mean", f.mean}, {"scale", f.scale}};
}

inline void from_json(const nlohmann::json &j, FeatureNormalizer &f) {
    f.mean = j.at("mean").get<std::vector<double>>();
    f.scale = j.at("scale").get<std::vector<double>>();
}

} // namespace cgm::model
