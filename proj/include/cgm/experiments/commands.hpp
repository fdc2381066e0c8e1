#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cgm/experiments/config.hpp"
#include "cgm/experiments/pipeline.hpp"
#include "cgm/experiments/png.hpp"
#include "cgm/nn/gradcheck.hpp"

namespace cgm::experiments {

/// Union of the flags of all subcommands; each command reads what it needs.
struct CommandOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    bool deterministic = false;
    std::string out;
    std::string checkpoint;
    std::optional<int> shots;
    std::string properties;
    std::string format = "csv";
    std::vector<std::string> data;
    std::string systems = "all";
    bool exact = false;
    std::optional<double> baseline_t0;
    std::string pred;
    std::string truth;
    int until_epoch = -1;
    bool chain_normalization = false;
};

namespace cmd_detail {

inline ExperimentConfig config_for(const CommandOptions &o) {
    CGM_REQUIRE(!o.config.empty(), ConfigError, "--config is required");
    auto cfg = load_config(o.config);
    if (o.seed) {
        cfg.seed = *o.seed;
    }
    return cfg;
}

inline std::vector<Dataset> read_all(const std::vector<std::string> &paths) {
    CGM_REQUIRE(!paths.empty(), ConfigError, "--data is required");
    std::vector<Dataset> out;
    for (const auto &p : paths) {
        out.push_back(measurement::read_dataset(p));
    }
    return out;
}

inline std::vector<std::string> split_list(const std::string &s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

/// Split of the union of all systems, recomputed from the config seed.
inline SplitIds split_for(const ExperimentConfig &cfg, const std::vector<Dataset> &sets) {
    std::vector<std::string> ids;
    for (const auto &d : sets) {
        for (const auto &s : d.systems) {
            ids.push_back(s.id);
        }
    }
    return split_systems(ids, cfg.split, cfg.seed);
}

/// "all", "train", "val", "test" (needs --config) or a comma list of ids.
inline std::vector<std::string> select_ids(const CommandOptions &o, const Dataset &d,
                                           const std::vector<Dataset> &all) {
    if (o.systems == "all") {
        return system_ids(d);
    }
    std::vector<std::string> wanted;
    if (o.systems == "train" || o.systems == "val" || o.systems == "test") {
        const auto s = split_for(config_for(o), all);
        wanted = o.systems == "train" ? s.train : (o.systems == "val" ? s.val : s.test);
    } else {
        wanted = split_list(o.systems);
    }
    std::vector<std::string> out;
    for (const auto &id : system_ids(d)) {
        if (std::find(wanted.begin(), wanted.end(), id) != wanted.end()) {
            out.push_back(id);
        }
    }
    return out;
}

inline void with_output(const std::string &path, const std::function<void(std::ostream &)> &fn) {
    if (path.empty() || path == "-") {
        fn(std::cout);
        return;
    }
    std::ofstream os(path, std::ios::binary);
    CGM_REQUIRE(os, ConfigError, "cannot open " + path + " for writing");
    fn(os);
}

inline std::uint64_t seed_for(const CommandOptions &o) {
    if (o.seed) {
        return *o.seed;
    }
    if (!o.config.empty()) {
        return load_config(o.config).seed;
    }
    return 0;
}

} // namespace cmd_detail

inline int cmd_gen_data(const CommandOptions &o, std::ostream &log) {
    const auto cfg = cmd_detail::config_for(o);
    const std::filesystem::path dir = o.out.empty() ? cfg.out_dir : o.out;
    std::filesystem::create_directories(dir);
    for (const auto &d : generate(cfg)) {
        const auto path = dir / dataset_filename(d);
        measurement::write_dataset(d, path.string());
        log << "wrote " << path.string() << " (" << d.systems.size() << " systems, "
            << d.records.size() << " records)\n";
    }
    return 0;
}

inline int cmd_train(const CommandOptions &o, std::ostream &log) {
    const auto cfg = cmd_detail::config_for(o);
    const auto sets = cmd_detail::read_all(o.data);
    const auto split = cmd_detail::split_for(cfg, sets);
    std::vector<Dataset> train_sets;
    for (const auto &d : sets) {
        CGM_REQUIRE(d.basis == sets.front().basis, ConfigError, "datasets mix measurement bases");
        std::vector<std::string> ids;
        for (const auto &s : d.systems) {
            // Rydberg states prepared with T > t0 are prediction targets only.
            const auto *p = std::get_if<RydbergParams>(&s.condition);
            if (p != nullptr && p->T > cfg.t0 + 1e-9) {
                continue;
            }
            if (std::find(split.train.begin(), split.train.end(), s.id) != split.train.end()) {
                ids.push_back(s.id);
            }
        }
        Dataset t = d.subset(ids);
        if (cfg.augment) {
            t = augment_dataset(t);
        }
        train_sets.push_back(std::move(t));
    }
    std::vector<const Dataset *> ptrs;
    for (const auto &t : train_sets) {
        ptrs.push_back(&t);
    }
    const auto data = model::make_training_set(ptrs);

    model::TrainConfig tcfg = cfg.train;
    tcfg.seed = cfg.seed;
    std::optional<model::LoadedModel> loaded;
    if (!o.checkpoint.empty()) {
        loaded.emplace(model::load_model(nn::read_checkpoint(o.checkpoint)));
        tcfg = loaded->train_config;
    } else {
        auto mcfg = cfg.model;
        mcfg.vocab_size = measurement::alphabet_size(sets.front().basis);
        if (cfg.family == "heisenberg") {
            mcfg.conditioner = model::ConditionerKind::gcn;
            mcfg.grid_rows = cfg.rows;
            mcfg.grid_cols = cfg.cols;
        } else {
            mcfg.conditioner = model::ConditionerKind::linear;
        }
        loaded.emplace(model::LoadedModel{
            model::ConditionalModel<double>(mcfg, derive_seed(cfg.seed, 6)),
            {cfg.family, sets.front().basis},
            tcfg,
            model::initial_state(tcfg)});
    }
    auto &lm = *loaded;
    model::train(lm.model, data, tcfg, lm.state, o.until_epoch, [&](int epoch, double loss) {
        log << "epoch " << epoch + 1 << " loss " << measurement::format_real(loss) << '\n';
    });

    const std::filesystem::path dir = o.out.empty() ? cfg.out_dir : o.out;
    std::filesystem::create_directories(dir);
    nn::write_checkpoint(model::model_checkpoint(lm.model, lm.info, tcfg, lm.state),
                         dir / "model.ckpt");
    std::ofstream hist(dir / "train_history.csv");
    hist << "epoch,loss\n";
    for (std::size_t e = 0; e < lm.state.history.size(); ++e) {
        hist << e + 1 << ',' << measurement::format_real(lm.state.history[e]) << '\n';
    }
    nlohmann::json sj = {{"train", split.train}, {"val", split.val}, {"test", split.test}};
    std::ofstream(dir / "split.json") << sj.dump(1) << '\n';
    log << "wrote " << (dir / "model.ckpt").string() << '\n';
    return 0;
}

inline int cmd_sample(const CommandOptions &o, std::ostream &log) {
    CGM_REQUIRE(!o.checkpoint.empty(), ConfigError, "--checkpoint is required");
    CGM_REQUIRE(!o.out.empty(), ConfigError, "--out is required");
    const auto lm = model::load_model(nn::read_checkpoint(o.checkpoint));
    const auto sets = cmd_detail::read_all(o.data);
    Dataset merged;
    bool first = true;
    const std::size_t shots =
        static_cast<std::size_t>(o.shots ? *o.shots : (o.config.empty() ? 20000 : cmd_detail::config_for(o).sample_shots));
    for (const auto &d : sets) {
        const auto ids = cmd_detail::select_ids(o, d, sets);
        auto s = sample_dataset(lm.model, d, ids, shots, cmd_detail::seed_for(o));
        if (first) {
            merged = std::move(s);
            first = false;
        } else {
            merged.systems.insert(merged.systems.end(), s.systems.begin(), s.systems.end());
            merged.records.insert(merged.records.end(), s.records.begin(), s.records.end());
        }
    }
    measurement::write_dataset(merged, o.out);
    log << "wrote " << o.out << " (" << merged.records.size() << " generated records)\n";
    return 0;
}

inline int cmd_estimate(const CommandOptions &o, std::ostream &log) {
    const auto sets = cmd_detail::read_all(o.data);
    auto props = cmd_detail::split_list(o.properties.empty() ? "correlation,renyi2" : o.properties);
    std::vector<shadows::EstimateRow> rows;
    std::optional<model::LoadedModel> lm;
    if (!o.checkpoint.empty()) {
        lm.emplace(model::load_model(nn::read_checkpoint(o.checkpoint)));
    }
    const double dt = o.config.empty() ? 1e-3 : cmd_detail::config_for(o).dt;
    for (const auto &d : sets) {
        const auto ids = cmd_detail::select_ids(o, d, sets);
        std::vector<shadows::EstimateRow> r;
        if (o.exact) {
            r = exact_dataset(d.subset(ids), props, dt);
        } else if (lm) {
            const std::size_t shots = static_cast<std::size_t>(o.shots ? *o.shots : 20000);
            r = estimate_dataset(sample_dataset(lm->model, d, ids, shots, cmd_detail::seed_for(o)),
                                 props);
        } else {
            r = estimate_dataset(d.subset(ids), props);
        }
        rows.insert(rows.end(), r.begin(), r.end());
    }
    cmd_detail::with_output(o.out, [&](std::ostream &os) { write_estimates_csv(rows, os); });
    log << "estimated " << rows.size() << " properties\n";
    return 0;
}

inline int cmd_phase_diagram(const CommandOptions &o, std::ostream &log) {
    const auto sets = cmd_detail::read_all(o.data);
    CGM_REQUIRE(o.format == "csv" || o.format == "png", ConfigError,
                "--format must be csv or png");
    std::optional<model::LoadedModel> lm;
    if (!o.checkpoint.empty()) {
        lm.emplace(model::load_model(nn::read_checkpoint(o.checkpoint)));
    }
    const bool norm = !o.chain_normalization;
    const double dt = o.config.empty() ? 1e-3 : cmd_detail::config_for(o).dt;
    std::vector<phase::PhasePoint> pts;
    std::size_t holes = 0;
    for (const auto &d : sets) {
        const auto ids = cmd_detail::select_ids(o, d, sets);
        const Dataset sel = d.subset(ids);
        std::vector<phase::PhasePoint> r;
        if (o.baseline_t0) {
            const auto truth = o.exact ? exact_phase_points(d, dt, norm) : phase_points(d, "data", norm);
            for (const auto &q : o.exact ? exact_phase_points(sel, dt, norm) : phase_points(sel, "data", norm)) {
                if (q.T + 1e-9 >= *o.baseline_t0) {
                    r.push_back(baselines::baseline_frozen_T(truth, *o.baseline_t0, q));
                }
            }
        } else if (o.exact) {
            r = exact_phase_points(sel, dt, norm);
        } else if (lm) {
            const std::size_t shots = static_cast<std::size_t>(o.shots ? *o.shots : 20000);
            r = phase_points(sample_dataset(lm->model, d, ids, shots, cmd_detail::seed_for(o)),
                             "model", norm);
        } else {
            r = phase_points(sel, "data", norm);
            holes += sel.systems.size() - r.size();
        }
        pts.insert(pts.end(), r.begin(), r.end());
    }
    if (o.format == "png") {
        CGM_REQUIRE(!o.out.empty(), ConfigError, "--format png needs --out");
        write_phase_png(o.out, pts);
    } else {
        cmd_detail::with_output(o.out, [&](std::ostream &os) { phase::write_phase_csv(pts, os); });
    }
    log << pts.size() << " phase points";
    if (holes > 0) {
        log << ", " << holes << " grid points without data (holes)";
    }
    log << '\n';
    return 0;
}

inline int cmd_evaluate(const CommandOptions &o, std::ostream &log) {
    CGM_REQUIRE(!o.pred.empty() && !o.truth.empty(), ConfigError, "--pred and --truth are required");
    const auto rep = evaluate(read_table(o.pred), read_table(o.truth));
    cmd_detail::with_output(o.out, [&](std::ostream &os) { write_report(rep, os); });
    log << "evaluated " << rep.schema << " table\n";
    return 0;
}

/// Finite-difference checks of a linear layer (1e-6) and of a small full
/// model (1e-4). Exit code 3 when any check fails.
inline int cmd_grad_check(const CommandOptions &o, std::ostream &log) {
    const std::uint64_t seed = o.seed ? *o.seed : 0;
    bool ok = true;
    {
        nn::ParameterSet<double> ps;
        Rng rng(derive_seed(seed, 1));
        nn::Linear<double> lin(ps, "linear", 5, 3, rng);
        nn::Mat<double> x(4, 5);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            x.data()[i] = normal01(rng);
        }
        const auto rep = nn::grad_check(ps, [&] { return nn::sum(nn::relu(lin(nn::constant(x)))); },
                                        {1e-5, 1e-6});
        log << "linear: max_rel_error " << rep.max_rel_error << (rep.passed ? " pass" : " FAIL") << '\n';
        ok = ok && rep.passed;
    }
    {
        model::TransformerConfig c;
        c.d_model = 8;
        c.n_heads = 2;
        c.n_blocks = 2;
        c.dropout = 0.0;
        c.vocab_size = 6;
        c.max_sites = 4;
        c.grid_rows = 1;
        c.grid_cols = 3;
        c.gcn_hidden = {4, 3, 2};
        model::ConditionalModel<double> m(c, derive_seed(seed, 2));
        Rng rng(derive_seed(seed, 3));
        quantum::CouplingGraph g = quantum::sample_coupling_graph({1, 3}, rng);
        const Outcome a{0, 3, 5};
        const Outcome b{2, 1, 4};
        const model::Batch batch{{g}, {0, 0}, {&a, &b}};
        const auto rep = nn::grad_check(m.parameters(), [&] { return m.loss(batch, false, nullptr); },
                                        {1e-5, 1e-4});
        log << "model: max_rel_error " << rep.max_rel_error << " over " << rep.checked
            << " entries" << (rep.passed ? " pass" : " FAIL") << '\n';
        ok = ok && rep.passed;
    }
    return ok ? 0 : 3;
}

} // namespace cgm::experiments
