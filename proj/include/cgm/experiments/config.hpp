#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgm/core/error.hpp"
#include "cgm/model/config.hpp"
#include "cgm/model/trainer.hpp"

namespace cgm::experiments {

inline constexpr int kConfigSchema = 1;

struct Split {
    double train = 0.8;
    double val = 0.0;
    double test = 0.2;
};

struct Sweep {
    std::vector<double> r0_over_a;
    std::vector<double> delta_over_omega;
    /// Evolution times; 0 stands for the exact ground state.
    std::vector<double> T{0.0};
    /// Lattice sizes as (rows, cols); empty means the config lattice.
    std::vector<std::array<int, 2>> sizes;
};

struct ExperimentConfig {
    int schema = kConfigSchema;
    std::string family = "heisenberg"; // heisenberg | rydberg-1d | rydberg-2d
    int rows = 2;
    int cols = 3;
    int n_systems = 100;
    int shots = 1000;
    std::uint64_t seed = 0;
    Split split;
    double coupling_lo = 0.0;
    double coupling_hi = 2.0;
    double omega = 2.0 * std::numbers::pi * 2.0;
    double dt = 1e-3;
    Sweep sweep;
    bool augment = false;
    int sample_shots = 20000;
    double t0 = 1.0;
    std::vector<std::string> properties{"correlation", "renyi2"};
    model::TransformerConfig model;
    model::TrainConfig train;
    std::string out_dir = "out";

    [[nodiscard]] bool is_rydberg() const { return family != "heisenberg"; }

    void validate() const {
        CGM_REQUIRE(schema == kConfigSchema, ConfigError,
                    "unsupported config schema " + std::to_string(schema));
        CGM_REQUIRE(family == "heisenberg" || family == "rydberg-1d" || family == "rydberg-2d",
                    ConfigError, "unknown family '" + family + "'");
        CGM_REQUIRE(rows >= 1 && cols >= 1, ConfigError, "lattice dims must be positive");
        CGM_REQUIRE(shots >= 1 && sample_shots >= 1, ConfigError, "shot counts must be positive");
        CGM_REQUIRE(split.train >= 0 && split.val >= 0 && split.test >= 0, ConfigError,
                    "split fractions must be non-negative");
        CGM_REQUIRE(std::abs(split.train + split.val + split.test - 1.0) < 1e-9, ConfigError,
                    "split fractions must sum to 1");
        if (family == "heisenberg") {
            CGM_REQUIRE(n_systems >= 1, ConfigError, "n_systems must be positive");
            CGM_REQUIRE(rows * cols <= 16, ConfigError,
                        "lattice has " + std::to_string(rows * cols) +
                            " qubits; exact simulation is capped at 16 (use a smaller lattice)");
        } else {
            CGM_REQUIRE(omega > 0.0 && dt > 0.0, ConfigError, "omega and dt must be positive");
            CGM_REQUIRE(!sweep.r0_over_a.empty() && !sweep.delta_over_omega.empty() &&
                            !sweep.T.empty(),
                        ConfigError, "rydberg families need a sweep grid");
            for (const auto &s : lattice_sizes()) {
                CGM_REQUIRE(s[0] * s[1] <= 16, ConfigError,
                            "lattice " + std::to_string(s[0]) + "x" + std::to_string(s[1]) +
                                " exceeds the 16-qubit cap; use a smaller lattice");
                if (family == "rydberg-1d") {
                    CGM_REQUIRE(s[0] == 1, ConfigError, "rydberg-1d needs single-row lattices");
                }
            }
        }
    }

    [[nodiscard]] std::vector<std::array<int, 2>> lattice_sizes() const {
        if (sweep.sizes.empty()) {
            return {{rows, cols}};
        }
        return sweep.sizes;
    }
};

namespace detail {

inline void reject_unknown(const nlohmann::json &j, const std::vector<std::string> &known,
                           const std::string &where) {
    for (const auto &[k, v] : j.items()) {
        if (std::find(known.begin(), known.end(), k) == known.end()) {
            throw ConfigError("unknown key '" + k + "' in " + where);
        }
    }
}

} // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json &j) {
    ExperimentConfig c;
    try {
        detail::reject_unknown(j,
                               {"schema", "family", "rows", "cols", "n_systems", "shots", "seed",
                                "split", "coupling_range", "omega", "dt", "sweep", "augment",
                                "sample_shots", "t0", "properties", "model", "train", "out_dir",
                                "comment"},
                               "config");
        CGM_REQUIRE(j.contains("seed"), ConfigError, "config must set a seed");
        c.schema = j.value("schema", c.schema);
        c.family = j.value("family", c.family);
        c.rows = j.value("rows", c.rows);
        c.cols = j.value("cols", c.cols);
        c.n_systems = j.value("n_systems", c.n_systems);
        c.shots = j.value("shots", c.shots);
        c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("split")) {
            const auto &s = j.at("split");
            detail::reject_unknown(s, {"train", "val", "test"}, "split");
            c.split.train = s.value("train", c.split.train);
            c.split.val = s.value("val", c.split.val);
            c.split.test = s.value("test", c.split.test);
        }
        if (j.contains("coupling_range")) {
            const auto r = j.at("coupling_range").get<std::vector<double>>();
            CGM_REQUIRE(r.size() == 2 && r[0] <= r[1], ConfigError,
                        "coupling_range must be [lo, hi]");
            c.coupling_lo = r[0];
            c.coupling_hi = r[1];
        }
        c.omega = j.value("omega", c.omega);
        c.dt = j.value("dt", c.dt);
        if (j.contains("sweep")) {
            const auto &s = j.at("sweep");
            detail::reject_unknown(s, {"r0_over_a", "delta_over_omega", "T", "sizes"}, "sweep");
            c.sweep.r0_over_a = s.value("r0_over_a", c.sweep.r0_over_a);
            c.sweep.delta_over_omega = s.value("delta_over_omega", c.sweep.delta_over_omega);
            c.sweep.T = s.value("T", c.sweep.T);
            c.sweep.sizes = s.value("sizes", c.sweep.sizes);
        }
        c.augment = j.value("augment", c.augment);
        c.sample_shots = j.value("sample_shots", c.sample_shots);
        c.t0 = j.value("t0", c.t0);
        c.properties = j.value("properties", c.properties);
        if (j.contains("model")) {
            model::from_json(j.at("model"), c.model);
        }
        if (j.contains("train")) {
            model::from_json(j.at("train"), c.train);
        }
        c.out_dir = j.value("out_dir", c.out_dir);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig &c) {
    nlohmann::json j;
    j["schema"] = c.schema;
    j["family"] = c.family;
    j["rows"] = c.rows;
    j["cols"] = c.cols;
    j["n_systems"] = c.n_systems;
    j["shots"] = c.shots;
    j["seed"] = c.seed;
    j["split"] = {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}};
    j["coupling_range"] = {c.coupling_lo, c.coupling_hi};
    j["omega"] = c.omega;
    j["dt"] = c.dt;
    j["sweep"] = {{"r0_over_a", c.sweep.r0_over_a},
                  {"delta_over_omega", c.sweep.delta_over_omega},
                  {"T", c.sweep.T},
                  {"sizes", c.sweep.sizes}};
    j["augment"] = c.augment;
    j["sample_shots"] = c.sample_shots;
    j["t0"] = c.t0;
    j["properties"] = c.properties;
    j["model"] = c.model;
    j["train"] = c.train;
    j["out_dir"] = c.out_dir;
    return j;
}

inline ExperimentConfig load_config(const std::string &path) {
    std::ifstream is(path);
    CGM_REQUIRE(is, ConfigError, "cannot open config file " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is, nullptr, true, true);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return config_from_json(j);
}

} // namespace cgm::experiments
