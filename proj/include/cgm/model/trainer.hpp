#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgm/core/error.hpp"
#include "cgm/core/random.hpp"
#include "cgm/measurement/dataset.hpp"
#include "cgm/model/transformer.hpp"
#include "cgm/nn/checkpoint.hpp"
#include "cgm/nn/optim.hpp"

namespace cgm::model {

struct TrainConfig {
    int epochs = 100;
    int batch_size = 100;
    double peak_lr = 1e-3;
    double floor_lr = 1e-7;
    int warmup_epochs = 5;
    std::uint64_t seed = 0;
};

inline void to_json(nlohmann::json &j, const TrainConfig &c) {
    j = {{"epochs", c.epochs},         {"batch_size", c.batch_size},
         {"peak_lr", c.peak_lr},       {"floor_lr", c.floor_lr},
         {"warmup_epochs", c.warmup_epochs}, {"seed", c.seed}};
}

inline void from_json(const nlohmann::json &j, TrainConfig &c) {
    static const std::vector<std::string> known = {"epochs",   "batch_size",    "peak_lr",
                                                   "floor_lr", "warmup_epochs", "seed"};
    for (const auto &[k, v] : j.items()) {
        if (std::find(known.begin(), known.end(), k) == known.end()) {
            throw ConfigError("unknown training config key '" + k + "'");
        }
    }
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.peak_lr = j.value("peak_lr", c.peak_lr);
    c.floor_lr = j.value("floor_lr", c.floor_lr);
    c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
    c.seed = j.value("seed", c.seed);
}

/// Flattened training data: one condition per system, examples point at it.
struct TrainingSet {
    std::vector<Condition> conditions;
    std::vector<int> condition_of;
    std::vector<Outcome> sequences;

    [[nodiscard]] std::size_t size() const { return sequences.size(); }
};

inline TrainingSet make_training_set(const std::vector<const measurement::Dataset *> &sets) {
    TrainingSet t;
    for (const auto *d : sets) {
        std::map<std::string, int> index;
        for (const auto &s : d->systems) {
            index[s.id] = static_cast<int>(t.conditions.size());
            t.conditions.push_back(s.condition);
        }
        for (const auto &r : d->records) {
            t.condition_of.push_back(index.at(r.system_id));
            t.sequences.push_back(r.outcomes);
        }
    }
    return t;
}

inline TrainingSet make_training_set(const measurement::Dataset &d) {
    return make_training_set(std::vector<const measurement::Dataset *>{&d});
}

/// Progress that must survive a checkpoint for an exact resume.
struct TrainState {
    int epoch = 0;
    long step = 0;
    Rng rng;
    std::vector<double> history; // mean training loss per epoch
};

inline TrainState initial_state(const TrainConfig &cfg) {
    TrainState s;
    s.rng.seed(derive_seed(cfg.seed, 0x7261696eULL));
    return s;
}

template <class T> void fit_normalizer(ConditionalModel<T> &model, const TrainingSet &data) {
    if (model.config().conditioner != ConditionerKind::linear) {
        return;
    }
    std::vector<std::array<double, kRydbergFeatures>> rows;
    for (const auto &c : data.conditions) {
        const auto *p = std::get_if<measurement::RydbergParams>(&c);
        CGM_REQUIRE(p != nullptr, ConfigError, "linear conditioner needs Rydberg systems");
        rows.push_back(rydberg_features(*p));
    }
    model.normalizer = FeatureNormalizer::fit(rows);
}

/**
 * Runs epochs [state.epoch, until_epoch) of minibatch Adam on the mean NLL
 * with warmup + cosine learning rate. The shuffling and dropout stream is
 * state.rng, so stopping at an epoch boundary and resuming from a
 * checkpoint reproduces the uninterrupted run exactly.
 */
template <class T>
void train(ConditionalModel<T> &model, const TrainingSet &data, const TrainConfig &cfg,
           TrainState &state, int until_epoch = -1,
           const std::function<void(int, double)> &on_epoch = {}) {
    CGM_REQUIRE(data.size() > 0, NoDataError, "training set is empty");
    CGM_REQUIRE(cfg.batch_size >= 1 && cfg.epochs >= 1, ConfigError,
                "epochs and batch_size must be positive");
    if (until_epoch < 0 || until_epoch > cfg.epochs) {
        until_epoch = cfg.epochs;
    }
    if (state.epoch == 0 && state.step == 0) {
        fit_normalizer(model, data);
    }
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    const long per_epoch = static_cast<long>((data.size() + bs - 1) / bs);
    const long total = per_epoch * cfg.epochs;
    const long warmup = std::min(total, per_epoch * cfg.warmup_epochs);
    std::vector<std::size_t> order(data.size());
    for (; state.epoch < until_epoch; ++state.epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        shuffle(order.begin(), order.end(), state.rng);
        double epoch_loss = 0.0;
        for (std::size_t lo = 0; lo < order.size(); lo += bs) {
            const std::size_t hi = std::min(order.size(), lo + bs);
            Batch batch;
            std::map<int, int> local;
            for (std::size_t k = lo; k < hi; ++k) {
                const std::size_t e = order[k];
                const int c = data.condition_of[e];
                auto [it, fresh] = local.emplace(c, static_cast<int>(batch.conditions.size()));
                if (fresh) {
                    batch.conditions.push_back(data.conditions[static_cast<std::size_t>(c)]);
                }
                batch.condition_of.push_back(it->second);
                batch.sequences.push_back(&data.sequences[e]);
            }
            model.parameters().zero_grad();
            const Var<T> loss = model.loss(batch, true, &state.rng);
            const double lv = static_cast<double>(loss.item());
            if (!std::isfinite(lv)) {
                throw NumericalError("training loss is not finite at step " +
                                     std::to_string(state.step));
            }
            nn::backward(loss);
            const double lr = nn::lr_schedule(state.step + 1, total, warmup, cfg.peak_lr, cfg.floor_lr);
            nn::adam_step(model.parameters(), lr);
            ++state.step;
            epoch_loss += lv * static_cast<double>(hi - lo);
        }
        state.history.push_back(epoch_loss / static_cast<double>(data.size()));
        if (on_epoch) {
            on_epoch(state.epoch, state.history.back());
        }
    }
    model.parameters().zero_grad();
}

/// Mean NLL per record over a set, without dropout.
template <class T>
double evaluate_nll(const ConditionalModel<T> &model, const TrainingSet &data,
                    std::size_t batch_size = 512) {
    CGM_REQUIRE(data.size() > 0, NoDataError, "evaluation set is empty");
    nn::NoGradGuard guard;
    double total = 0.0;
    for (std::size_t lo = 0; lo < data.size(); lo += batch_size) {
        const std::size_t hi = std::min(data.size(), lo + batch_size);
        Batch batch;
        std::map<int, int> local;
        for (std::size_t e = lo; e < hi; ++e) {
            const int c = data.condition_of[e];
            auto [it, fresh] = local.emplace(c, static_cast<int>(batch.conditions.size()));
            if (fresh) {
                batch.conditions.push_back(data.conditions[static_cast<std::size_t>(c)]);
            }
            batch.condition_of.push_back(it->second);
            batch.sequences.push_back(&data.sequences[e]);
        }
        total += static_cast<double>(model.loss(batch, false, nullptr).item()) *
                 static_cast<double>(hi - lo);
    }
    return total / static_cast<double>(data.size());
}

// ---- checkpoints ---------------------------------------------------------

struct ModelInfo {
    std::string family;
    measurement::BasisKind basis = measurement::BasisKind::pauli6;
};

template <class T>
nn::Checkpoint model_checkpoint(const ConditionalModel<T> &model, const ModelInfo &info,
                                const TrainConfig &tcfg, const TrainState &state) {
    nn::Checkpoint c = nn::capture(model.parameters());
    c.meta["kind"] = "conditional-model";
    c.meta["family"] = info.family;
    c.meta["basis"] = measurement::to_string(info.basis);
    c.meta["model"] = model.config();
    c.meta["normalizer"] = model.normalizer;
    c.meta["train_config"] = tcfg;
    c.meta["epoch"] = state.epoch;
    c.meta["step"] = state.step;
    c.meta["rng"] = rng_state(state.rng);
    c.meta["history"] = state.history;
    return c;
}

struct LoadedModel {
    ConditionalModel<double> model;
    ModelInfo info;
    TrainConfig train_config;
    TrainState state;
};

inline LoadedModel load_model(const nn::Checkpoint &c) {
    if (c.meta.value("kind", std::string()) != "conditional-model") {
        throw ParseError("checkpoint does not hold a conditional model");
    }
    TransformerConfig cfg;
    from_json(c.meta.at("model"), cfg);
    ConditionalModel<double> m(cfg, 0);
    nn::restore(m.parameters(), c);
    from_json(c.meta.at("normalizer"), m.normalizer);
    ModelInfo info{c.meta.at("family").get<std::string>(),
                   measurement::basis_from_string(c.meta.at("basis").get<std::string>())};
    TrainConfig tcfg;
    from_json(c.meta.at("train_config"), tcfg);
    TrainState st;
    st.epoch = c.meta.at("epoch").get<int>();
    st.step = c.meta.at("step").get<long>();
    set_rng_state(st.rng, c.meta.at("rng").get<std::string>());
    st.history = c.meta.at("history").get<std::vector<double>>();
    return {std::move(m), info, tcfg, std::move(st)};
}

} // namespace cgm::model
