#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "cgm/baselines/frozen.hpp"
#include "cgm/experiments/config.hpp"
#include "cgm/experiments/csv.hpp"
#include "cgm/measurement/augment.hpp"
#include "cgm/measurement/dataset.hpp"
#include "cgm/measurement/sampling.hpp"
#include "cgm/model/sampler.hpp"
#include "cgm/model/trainer.hpp"
#include "cgm/phase/order.hpp"
#include "cgm/quantum/evolution.hpp"
#include "cgm/quantum/ground_state.hpp"
#include "cgm/quantum/hamiltonian.hpp"
#include "cgm/quantum/observables.hpp"
#include "cgm/shadows/shadows.hpp"

namespace cgm::experiments {

using measurement::Condition;
using measurement::Dataset;
using measurement::Outcome;
using measurement::RydbergParams;

inline std::string system_id(char prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%c%04zu", prefix, i);
    return buf;
}

inline RydbergParams rydberg_params(int rows, int cols, double r0_over_a, double delta_over_omega,
                                    double omega, double T) {
    const auto sys = quantum::rydberg_from_ratios(rows, cols, r0_over_a, delta_over_omega, omega);
    return {rows, cols, sys.separation, omega, sys.delta, T, r0_over_a};
}

inline quantum::RydbergSystem rydberg_system(const RydbergParams &p) {
    auto sys = quantum::rydberg_lattice(p.n_rows, p.n_cols, p.a, p.omega, p.delta);
    sys.evolution_time = p.T;
    return sys;
}

/// Exact ground state, or for Rydberg systems with T > 0 the state after the
/// default adiabatic protocol of length T.
inline quantum::StateVector prepare_state(const Condition &c, double dt = 1e-3) {
    if (const auto *g = std::get_if<quantum::CouplingGraph>(&c)) {
        return quantum::ground_state(quantum::build_heisenberg(*g)).state;
    }
    const auto &p = std::get<RydbergParams>(c);
    const auto sys = rydberg_system(p);
    if (p.T <= 0.0) {
        return quantum::ground_state(quantum::build_rydberg(sys)).state;
    }
    return quantum::evolve_adiabatic(sys, quantum::default_schedule(p.T, p.omega, p.delta), dt);
}

// ---- data generation -------------------------------------------------------

inline Dataset generate_heisenberg(const ExperimentConfig &cfg) {
    Dataset d;
    d.family = "heisenberg";
    d.basis = measurement::BasisKind::pauli6;
    d.rows = cfg.rows;
    d.cols = cfg.cols;
    d.seed = cfg.seed;
    d.shots_per_system = static_cast<std::size_t>(cfg.shots);
    for (int s = 0; s < cfg.n_systems; ++s) {
        Rng rng(derive_seed(cfg.seed, 1, static_cast<std::uint64_t>(s)));
        auto g = quantum::sample_coupling_graph({cfg.rows, cfg.cols}, rng, cfg.coupling_lo,
                                                cfg.coupling_hi);
        const auto id = system_id('h', static_cast<std::size_t>(s));
        const auto psi = prepare_state(g);
        for (auto &o : measurement::sample_pauli6(psi, static_cast<std::size_t>(cfg.shots),
                                                  derive_seed(cfg.seed, 2, static_cast<std::uint64_t>(s)))) {
            d.records.push_back({id, std::move(o)});
        }
        d.systems.push_back({id, std::move(g)});
    }
    return d;
}

/// Systems of a Rydberg sweep for one lattice size, in grid order
/// (R0/a outer, then delta/omega, then T).
inline std::vector<RydbergParams> sweep_points(const ExperimentConfig &cfg, int rows, int cols) {
    std::vector<RydbergParams> out;
    for (double r : cfg.sweep.r0_over_a) {
        for (double dw : cfg.sweep.delta_over_omega) {
            for (double t : cfg.sweep.T) {
                out.push_back(rydberg_params(rows, cols, r, dw, cfg.omega, t));
            }
        }
    }
    return out;
}

/// One Z-basis dataset per lattice size of the sweep.
inline std::vector<Dataset> generate_rydberg(const ExperimentConfig &cfg) {
    std::vector<Dataset> out;
    std::size_t global = 0;
    for (const auto &size : cfg.lattice_sizes()) {
        Dataset d;
        d.family = cfg.family;
        d.basis = measurement::BasisKind::zbasis;
        d.rows = size[0];
        d.cols = size[1];
        d.seed = cfg.seed;
        d.shots_per_system = static_cast<std::size_t>(cfg.shots);
        const char prefix = 'r';
        for (const auto &p : sweep_points(cfg, size[0], size[1])) {
            const auto id = system_id(prefix, global);
            const auto psi = prepare_state(p, cfg.dt);
            for (auto &o : measurement::sample_zbasis(psi, static_cast<std::size_t>(cfg.shots),
                                                      derive_seed(cfg.seed, 2, global))) {
                d.records.push_back({id, std::move(o)});
            }
            d.systems.push_back({id, p});
            ++global;
        }
        out.push_back(std::move(d));
    }
    return out;
}

inline std::vector<Dataset> generate(const ExperimentConfig &cfg) {
    if (cfg.family == "heisenberg") {
        return {generate_heisenberg(cfg)};
    }
    return generate_rydberg(cfg);
}

inline std::string dataset_filename(const Dataset &d) {
    return "data_" + std::to_string(d.rows) + "x" + std::to_string(d.cols) + ".txt";
}

// ---- splits and augmentation -----------------------------------------------

struct SplitIds {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
};

/// Splits by system (never by record), after a seeded shuffle.
inline SplitIds split_systems(std::vector<std::string> ids, const Split &split,
                              std::uint64_t seed) {
    Rng rng(derive_seed(seed, 3));
    shuffle(ids.begin(), ids.end(), rng);
    const auto n = static_cast<double>(ids.size());
    const auto n_train = static_cast<std::size_t>(std::llround(split.train * n));
    const auto n_val =
        std::min(ids.size() - n_train, static_cast<std::size_t>(std::llround(split.val * n)));
    SplitIds s;
    s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train),
                 ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), ids.end());
    return s;
}

inline std::vector<std::string> system_ids(const Dataset &d) {
    std::vector<std::string> ids;
    for (const auto &s : d.systems) {
        ids.push_back(s.id);
    }
    return ids;
}

/**
 * Every record replaced by its images under the lattice point group.
 * Rydberg conditions are invariant, so images stay with their system; a
 * coupling graph is permuted too, which makes each non-identity image a new
 * system with id "<id>~<g>".
 */
inline Dataset augment_dataset(const Dataset &d) {
    Dataset out = d;
    out.systems.clear();
    out.records.clear();
    const auto grouped = d.outcomes_by_system();
    for (std::size_t i = 0; i < d.systems.size(); ++i) {
        const auto &sys = d.systems[i];
        const auto *graph = std::get_if<quantum::CouplingGraph>(&sys.condition);
        const quantum::GridDims dims = graph != nullptr ? graph->dims()
                                                        : quantum::GridDims{
                                                              std::get<RydbergParams>(sys.condition).n_rows,
                                                              std::get<RydbergParams>(sys.condition).n_cols};
        const int count = measurement::lattice_symmetry_count(dims);
        if (graph == nullptr) {
            out.systems.push_back(sys);
        }
        for (int g = 0; g < count; ++g) {
            const auto perm = measurement::lattice_symmetry(g, dims);
            std::string id = sys.id;
            if (graph != nullptr) {
                if (g > 0) {
                    id += "~" + std::to_string(g);
                }
                out.systems.push_back({id, measurement::permute_sites(*graph, perm)});
            }
            for (const auto &o : grouped[i]) {
                out.records.push_back({id, measurement::permute_sites(o, perm)});
            }
        }
    }
    return out;
}

// ---- property estimation ---------------------------------------------------

struct PropertyTarget {
    std::string property;
    std::vector<int> sites;
};

/// correlation: every pair i < j. renyi2: every single site and every
/// nearest-neighbour pair.
inline std::vector<PropertyTarget> property_targets(quantum::GridDims dims,
                                                    const std::vector<std::string> &properties) {
    std::vector<PropertyTarget> out;
    for (const auto &prop : properties) {
        if (prop == "correlation") {
            for (int i = 0; i < dims.sites(); ++i) {
                for (int j = i + 1; j < dims.sites(); ++j) {
                    out.push_back({prop, {i, j}});
                }
            }
        } else if (prop == "renyi2") {
            for (int i = 0; i < dims.sites(); ++i) {
                out.push_back({prop, {i}});
            }
            for (auto [i, j] : quantum::grid_edges(dims)) {
                out.push_back({prop, {i, j}});
            }
        } else {
            throw ConfigError("unknown property '" + prop + "' (expected correlation or renyi2)");
        }
    }
    return out;
}

inline std::vector<shadows::EstimateRow>
estimate_system(const std::string &id, const std::vector<Outcome> &shots,
                const std::vector<PropertyTarget> &targets) {
    std::vector<shadows::EstimateRow> rows;
    for (const auto &t : targets) {
        shadows::Estimate e;
        if (t.property == "correlation") {
            e = shadows::estimate_correlation(shots, t.sites[0], t.sites[1]);
        } else {
            e = shadows::estimate_renyi2(shots, t.sites);
        }
        rows.push_back({id, t.property, shadows::site_set(t.sites), e.value, e.raw, e.samples,
                        e.std_err});
    }
    return rows;
}

inline std::vector<shadows::EstimateRow>
exact_system(const std::string &id, const quantum::StateVector &psi,
             const std::vector<PropertyTarget> &targets) {
    std::vector<shadows::EstimateRow> rows;
    for (const auto &t : targets) {
        const double v = t.property == "correlation"
                             ? quantum::exact_correlation(psi, t.sites[0], t.sites[1])
                             : quantum::exact_renyi2(psi, t.sites);
        rows.push_back({id, t.property, shadows::site_set(t.sites), v, v, 0, 0.0});
    }
    return rows;
}

inline quantum::GridDims condition_dims(const Condition &c) {
    if (const auto *g = std::get_if<quantum::CouplingGraph>(&c)) {
        return g->dims();
    }
    const auto &p = std::get<RydbergParams>(c);
    return {p.n_rows, p.n_cols};
}

/// Shadow estimates for every system of a Pauli-6 dataset.
inline std::vector<shadows::EstimateRow> estimate_dataset(const Dataset &d,
                                                          const std::vector<std::string> &props) {
    CGM_REQUIRE(d.basis == measurement::BasisKind::pauli6, ConfigError,
                "unsupported basis: shadow estimates need a pauli6 dataset");
    const auto grouped = d.outcomes_by_system();
    std::vector<shadows::EstimateRow> rows;
    for (std::size_t i = 0; i < d.systems.size(); ++i) {
        if (grouped[i].empty()) {
            continue;
        }
        const auto targets = property_targets(condition_dims(d.systems[i].condition), props);
        auto r = estimate_system(d.systems[i].id, grouped[i], targets);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    return rows;
}

/// Exact oracle values for every system in the table.
inline std::vector<shadows::EstimateRow> exact_dataset(const Dataset &d,
                                                       const std::vector<std::string> &props,
                                                       double dt = 1e-3) {
    std::vector<shadows::EstimateRow> rows;
    for (const auto &s : d.systems) {
        const auto targets = property_targets(condition_dims(s.condition), props);
        auto r = exact_system(s.id, prepare_state(s.condition, dt), targets);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    return rows;
}

inline void write_estimates_csv(const std::vector<shadows::EstimateRow> &rows, std::ostream &os) {
    using measurement::format_real;
    os << shadows::kEstimatesHeader << '\n';
    for (const auto &r : rows) {
        os << r.system_id << ',' << r.property << ',' << r.sites << ',' << format_real(r.estimate)
           << ',' << format_real(r.raw) << ',' << r.samples << ',' << format_real(r.std_err)
           << '\n';
    }
}

// ---- model-generated measurements -------------------------------------------

/// Dataset with the same systems whose records are drawn from the model.
template <class T>
Dataset sample_dataset(const model::ConditionalModel<T> &m, const Dataset &systems,
                       const std::vector<std::string> &ids, std::size_t shots, std::uint64_t seed) {
    Dataset out;
    out.family = systems.family;
    out.basis = systems.basis;
    out.rows = systems.rows;
    out.cols = systems.cols;
    out.seed = seed;
    out.shots_per_system = shots;
    std::uint64_t k = 0;
    for (const auto &id : ids) {
        const auto &s = systems.system(id);
        out.systems.push_back(s);
        const int n = measurement::condition_sites(s.condition);
        for (auto &o : model::sample(m, s.condition, n, shots, derive_seed(seed, 4, k))) {
            out.records.push_back({id, std::move(o)});
        }
        ++k;
    }
    return out;
}

// ---- phase diagrams ----------------------------------------------------------

/// Phase point per system of a Z-basis dataset (systems without records
/// are skipped and reported as holes by the caller).
inline std::vector<phase::PhasePoint> phase_points(const Dataset &d, const std::string &source,
                                                   bool normalized_1d = true) {
    const auto grouped = d.outcomes_by_system();
    std::vector<phase::PhasePoint> out;
    for (std::size_t i = 0; i < d.systems.size(); ++i) {
        const auto *p = std::get_if<RydbergParams>(&d.systems[i].condition);
        CGM_REQUIRE(p != nullptr, ConfigError, "phase diagrams need Rydberg systems");
        if (grouped[i].empty()) {
            continue;
        }
        out.push_back(phase::phase_point(*p, phase::Shots(grouped[i]), source, normalized_1d));
    }
    return out;
}

/// Exact order parameters from the prepared states.
inline std::vector<phase::PhasePoint> exact_phase_points(const Dataset &d, double dt = 1e-3,
                                                         bool normalized_1d = true) {
    std::vector<phase::PhasePoint> out;
    for (const auto &s : d.systems) {
        const auto &p = std::get<RydbergParams>(s.condition);
        out.push_back(phase::phase_point(p, phase::exact_shots(prepare_state(p, dt)), "exact",
                                         normalized_1d));
    }
    return out;
}

// ---- evaluation ------------------------------------------------------------

struct ColumnRmse {
    std::string name;  // property (estimates) or order-parameter column (phase)
    double rmse = 0.0; // over all matched rows
    double mean_site_rmse = 0.0; // estimates only: RMSE per site set, averaged
    std::size_t rows = 0;
};

struct EvalReport {
    std::string schema; // "estimates" or "phase"
    std::vector<ColumnRmse> columns;

    [[nodiscard]] const ColumnRmse &get(const std::string &name) const {
        for (const auto &c : columns) {
            if (c.name == name) {
                return c;
            }
        }
        throw InvalidArgument("no RMSE for '" + name + "'");
    }
};

namespace detail {

inline void require_columns(const Table &t, const std::vector<std::string> &cols,
                            const std::string &which) {
    std::string missing;
    for (const auto &c : cols) {
        if (t.column(c) < 0) {
            missing += (missing.empty() ? "" : ", ") + c;
        }
    }
    if (!missing.empty()) {
        std::string have;
        for (const auto &h : t.header) {
            have += (have.empty() ? "" : ", ") + h;
        }
        throw ConfigError("schema mismatch: " + which + " lacks column(s) " + missing +
                          " (has: " + have + ")");
    }
}

inline double to_double(const std::string &s, const std::string &col) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) {
            throw std::invalid_argument(s);
        }
        return v;
    } catch (const std::exception &) {
        throw ConfigError("column " + col + ": '" + s + "' is not a number");
    }
}

} // namespace detail

/**
 * RMSE between a prediction table and an oracle table of the same schema.
 * Rows are matched on their key columns; every truth row must have a
 * prediction.
 */
inline EvalReport evaluate(const Table &pred, const Table &truth) {
    EvalReport rep;
    std::vector<std::string> keys;
    std::vector<std::string> values;
    if (truth.column("system_id") >= 0) {
        rep.schema = "estimates";
        keys = {"system_id", "property", "sites"};
        values = {"estimate"};
    } else if (truth.column("R0_over_a") >= 0) {
        rep.schema = "phase";
        keys = {"R0_over_a", "delta_over_omega", "T", "n_rows", "n_cols"};
        values = {"O_z2", "O_z3", "O_checkboard", "O_striated", "O_star", "O_staggered"};
    } else {
        throw ConfigError("schema mismatch: truth file has neither system_id nor R0_over_a column");
    }
    std::vector<std::string> need = keys;
    need.insert(need.end(), values.begin(), values.end());
    detail::require_columns(truth, need, "truth");
    detail::require_columns(pred, need, "prediction");

    auto key_of = [&](const Table &t, const std::vector<std::string> &row) {
        std::string k;
        for (const auto &c : keys) {
            k += row[static_cast<std::size_t>(t.column(c))] + '|';
        }
        return k;
    };
    std::map<std::string, const std::vector<std::string> *> pmap;
    for (const auto &r : pred.rows) {
        pmap[key_of(pred, r)] = &r;
    }
    for (const auto &r : truth.rows) {
        if (pmap.find(key_of(truth, r)) == pmap.end()) {
            throw ConfigError("prediction has no row for key " + key_of(truth, r));
        }
    }
    if (rep.schema == "estimates") {
        std::map<std::string, std::pair<double, std::size_t>> per_prop;
        std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> per_site;
        const int pc = truth.column("property");
        const int sc = truth.column("sites");
        for (const auto &r : truth.rows) {
            const auto &p = *pmap.at(key_of(truth, r));
            const double e = detail::to_double(p[static_cast<std::size_t>(pred.column("estimate"))], "estimate") -
                             detail::to_double(r[static_cast<std::size_t>(truth.column("estimate"))], "estimate");
            auto &pp = per_prop[r[static_cast<std::size_t>(pc)]];
            pp.first += e * e;
            ++pp.second;
            auto &ps = per_site[r[static_cast<std::size_t>(pc)]][r[static_cast<std::size_t>(sc)]];
            ps.first += e * e;
            ++ps.second;
        }
        for (const auto &[prop, acc] : per_prop) {
            ColumnRmse c;
            c.name = prop;
            c.rows = acc.second;
            c.rmse = std::sqrt(acc.first / static_cast<double>(acc.second));
            double s = 0.0;
            for (const auto &[site, a] : per_site[prop]) {
                s += std::sqrt(a.first / static_cast<double>(a.second));
            }
            c.mean_site_rmse = s / static_cast<double>(per_site[prop].size());
            rep.columns.push_back(c);
        }
    } else {
        for (const auto &v : values) {
            ColumnRmse c;
            c.name = v;
            double ss = 0.0;
            for (const auto &r : truth.rows) {
                const auto &p = *pmap.at(key_of(truth, r));
                const double e = detail::to_double(p[static_cast<std::size_t>(pred.column(v))], v) -
                                 detail::to_double(r[static_cast<std::size_t>(truth.column(v))], v);
                ss += e * e;
            }
            c.rows = truth.rows.size();
            c.rmse = truth.rows.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(c.rows));
            c.mean_site_rmse = c.rmse;
            rep.columns.push_back(c);
        }
    }
    return rep;
}

inline void write_report(const EvalReport &rep, std::ostream &os) {
    using measurement::format_real;
    os << "quantity,rmse,mean_site_rmse,rows\n";
    for (const auto &c : rep.columns) {
        os << c.name << ',' << format_real(c.rmse) << ',' << format_real(c.mean_site_rmse) << ','
           << c.rows << '\n';
    }
}

inline Table estimates_table(const std::vector<shadows::EstimateRow> &rows) {
    std::ostringstream os;
    write_estimates_csv(rows, os);
    std::istringstream is(os.str());
    return read_table(is);
}

inline Table phase_table(const std::vector<phase::PhasePoint> &pts) {
    std::ostringstream os;
    phase::write_phase_csv(pts, os);
    std::istringstream is(os.str());
    return read_table(is);
}

} // namespace cgm::experiments
