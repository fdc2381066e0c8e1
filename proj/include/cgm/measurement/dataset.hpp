#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "cgm/core/error.hpp"
#include "cgm/measurement/augment.hpp"
#include "cgm/measurement/povm.hpp"
#include "cgm/measurement/sampling.hpp"
#include "cgm/quantum/lattice.hpp"

namespace cgm::measurement {

/// Scalar description of a Rydberg system as stored in datasets.
struct RydbergParams {
    int n_rows = 1;
    int n_cols = 1;
    double a = 0.0;     // um
    double omega = 0.0; // rad/us
    double delta = 0.0; // rad/us
    double T = 0.0;     // us, 0 for exact ground states
    double r0_over_a = 0.0;

    [[nodiscard]] int sites() const { return n_rows * n_cols; }
    [[nodiscard]] double delta_over_omega() const { return omega > 0.0 ? delta / omega : 0.0; }
    bool operator==(const RydbergParams &) const = default;
};

using Condition = std::variant<quantum::CouplingGraph, RydbergParams>;

inline int condition_sites(const Condition &c) {
    return std::visit([](const auto &v) { return v.sites(); }, c);
}

struct SystemEntry {
    std::string id;
    Condition condition;
    bool operator==(const SystemEntry &) const = default;
};

struct MeasurementRecord {
    std::string system_id;
    Outcome outcomes;
    bool operator==(const MeasurementRecord &) const = default;
};

/**
 * A family of measured systems. Conditions live once per system in
 * `systems`; records reference them by id. Every record of a system has that
 * system's site count; `rows`/`cols` describe the largest lattice.
 */
struct Dataset {
    std::string family;
    BasisKind basis = BasisKind::pauli6;
    int rows = 1;
    int cols = 1;
    std::uint64_t seed = 0;
    std::size_t shots_per_system = 0;
    std::vector<SystemEntry> systems;
    std::vector<MeasurementRecord> records;

    [[nodiscard]] const SystemEntry &system(const std::string &id) const {
        for (const auto &s : systems) {
            if (s.id == id) {
                return s;
            }
        }
        throw InvalidArgument("unknown system id '" + id + "'");
    }

    /// Records grouped per system id, in system order.
    [[nodiscard]] std::vector<std::vector<Outcome>> outcomes_by_system() const {
        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < systems.size(); ++i) {
            index[systems[i].id] = i;
        }
        std::vector<std::vector<Outcome>> out(systems.size());
        for (const auto &r : records) {
            out.at(index.at(r.system_id)).push_back(r.outcomes);
        }
        return out;
    }

    /// Checks the record invariants (known ids, lengths, token range).
    void validate() const {
        std::map<std::string, int> sites;
        for (const auto &s : systems) {
            CGM_REQUIRE(sites.emplace(s.id, condition_sites(s.condition)).second, InvalidArgument,
                        "duplicate system id '" + s.id + "'");
        }
        const int alpha = alphabet_size(basis);
        for (const auto &r : records) {
            auto it = sites.find(r.system_id);
            CGM_REQUIRE(it != sites.end(), InvalidArgument,
                        "record references unknown system '" + r.system_id + "'");
            CGM_REQUIRE(static_cast<int>(r.outcomes.size()) == it->second, InvalidArgument,
                        "record length does not match site count of '" + r.system_id + "'");
            for (auto t : r.outcomes) {
                CGM_REQUIRE(t < alpha, InvalidArgument, "token id exceeds alphabet");
            }
        }
    }

    /// Dataset restricted to the listed systems (records keep their order).
    [[nodiscard]] Dataset subset(const std::vector<std::string> &ids) const {
        Dataset d = *this;
        d.systems.clear();
        d.records.clear();
        std::map<std::string, bool> keep;
        for (const auto &id : ids) {
            d.systems.push_back(system(id));
            keep[id] = true;
        }
        for (const auto &r : records) {
            if (keep.count(r.system_id) != 0) {
                d.records.push_back(r);
            }
        }
        return d;
    }
};

/// Orbit of a record under the square-lattice symmetries.
inline std::vector<MeasurementRecord> augment_square_symmetries(const MeasurementRecord &record,
                                                                quantum::GridDims dims) {
    std::vector<MeasurementRecord> out;
    for (auto &o : augment_square_symmetries(record.outcomes, dims)) {
        out.push_back({record.system_id, std::move(o)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Text format
//
//   cgm-dataset 1
//   family <tag>
//   basis pauli6|zbasis
//   rows <int>
//   cols <int>
//   seed <uint>
//   shots <uint>
//   systems <count>
//   system <id> heisenberg rows=<r> cols=<c> edges=<i>-<j>:<w>,...
//   system <id> rydberg n_rows=<r> n_cols=<c> a=<um> omega=<rad/us> delta=<rad/us> T=<us> R0_over_a=<x>
//   records <count>
//   <id> <digits>
//
// Reals use the shortest round-trip decimal form.
// ---------------------------------------------------------------------------

inline std::string format_real(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, res.ptr};
}

namespace detail {

inline double parse_real(const std::string &s, std::size_t line) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ParseError("bad real '" + s + "'", line);
    }
    return v;
}

inline long long parse_int(const std::string &s, std::size_t line) {
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ParseError("bad integer '" + s + "'", line);
    }
    return v;
}

inline std::map<std::string, std::string> parse_fields(std::istringstream &is, std::size_t line) {
    std::map<std::string, std::string> kv;
    std::string tok;
    while (is >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) {
            throw ParseError("expected key=value, got '" + tok + "'", line);
        }
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return kv;
}

inline const std::string &field(const std::map<std::string, std::string> &kv,
                                const std::string &key, std::size_t line) {
    auto it = kv.find(key);
    if (it == kv.end()) {
        throw ParseError("missing field '" + key + "'", line);
    }
    return it->second;
}

inline std::string system_line(const SystemEntry &s) {
    std::ostringstream os;
    os << "system " << s.id << ' ';
    if (const auto *g = std::get_if<quantum::CouplingGraph>(&s.condition)) {
        os << "heisenberg rows=" << g->dims().rows << " cols=" << g->dims().cols << " edges=";
        bool first = true;
        for (const auto &[e, w] : g->couplings()) {
            os << (first ? "" : ",") << e.first << '-' << e.second << ':' << format_real(w);
            first = false;
        }
    } else {
        const auto &p = std::get<RydbergParams>(s.condition);
        os << "rydberg n_rows=" << p.n_rows << " n_cols=" << p.n_cols << " a=" << format_real(p.a)
           << " omega=" << format_real(p.omega) << " delta=" << format_real(p.delta)
           << " T=" << format_real(p.T) << " R0_over_a=" << format_real(p.r0_over_a);
    }
    return os.str();
}

inline SystemEntry parse_system(const std::string &text, std::size_t line) {
    std::istringstream is(text);
    std::string kw;
    std::string id;
    std::string kind;
    is >> kw >> id >> kind;
    if (kw != "system" || id.empty()) {
        throw ParseError("expected 'system <id> <kind> ...'", line);
    }
    auto kv = parse_fields(is, line);
    if (kind == "heisenberg") {
        quantum::GridDims dims{static_cast<int>(parse_int(field(kv, "rows", line), line)),
                               static_cast<int>(parse_int(field(kv, "cols", line), line))};
        quantum::CouplingGraph g;
        try {
            g = quantum::CouplingGraph(dims);
        } catch (const Error &e) {
            throw ParseError(e.what(), line);
        }
        const std::string &edges = field(kv, "edges", line);
        std::size_t pos = 0;
        while (pos < edges.size()) {
            auto comma = edges.find(',', pos);
            if (comma == std::string::npos) {
                comma = edges.size();
            }
            const std::string item = edges.substr(pos, comma - pos);
            const auto dash = item.find('-');
            const auto colon = item.find(':');
            if (dash == std::string::npos || colon == std::string::npos || colon < dash) {
                throw ParseError("bad edge '" + item + "'", line);
            }
            try {
                g.set(static_cast<int>(parse_int(item.substr(0, dash), line)),
                      static_cast<int>(parse_int(item.substr(dash + 1, colon - dash - 1), line)),
                      parse_real(item.substr(colon + 1), line));
            } catch (const ParseError &) {
                throw;
            } catch (const Error &e) {
                throw ParseError(e.what(), line);
            }
            pos = comma + 1;
        }
        return {id, g};
    }
    if (kind == "rydberg") {
        RydbergParams p;
        p.n_rows = static_cast<int>(parse_int(field(kv, "n_rows", line), line));
        p.n_cols = static_cast<int>(parse_int(field(kv, "n_cols", line), line));
        p.a = parse_real(field(kv, "a", line), line);
        p.omega = parse_real(field(kv, "omega", line), line);
        p.delta = parse_real(field(kv, "delta", line), line);
        p.T = parse_real(field(kv, "T", line), line);
        p.r0_over_a = parse_real(field(kv, "R0_over_a", line), line);
        if (p.n_rows < 1 || p.n_cols < 1) {
            throw ParseError("lattice dims must be positive", line);
        }
        return {id, p};
    }
    throw ParseError("unknown system kind '" + kind + "'", line);
}

} // namespace detail

inline void write_dataset(const Dataset &d, std::ostream &os) {
    os << "cgm-dataset 1\n";
    os << "family " << d.family << '\n';
    os << "basis " << to_string(d.basis) << '\n';
    os << "rows " << d.rows << '\n';
    os << "cols " << d.cols << '\n';
    os << "seed " << d.seed << '\n';
    os << "shots " << d.shots_per_system << '\n';
    os << "systems " << d.systems.size() << '\n';
    for (const auto &s : d.systems) {
        os << detail::system_line(s) << '\n';
    }
    os << "records " << d.records.size() << '\n';
    std::string digits;
    for (const auto &r : d.records) {
        digits.resize(r.outcomes.size());
        for (std::size_t i = 0; i < r.outcomes.size(); ++i) {
            digits[i] = static_cast<char>('0' + r.outcomes[i]);
        }
        os << r.system_id << ' ' << digits << '\n';
    }
}

inline void write_dataset(const Dataset &d, const std::string &path) {
    std::ofstream os(path, std::ios::binary);
    CGM_REQUIRE(os.good(), ConfigError, "cannot open '" + path + "' for writing");
    write_dataset(d, os);
    CGM_REQUIRE(os.good(), Error, "write failed for '" + path + "'");
}

inline Dataset read_dataset(std::istream &is) {
    Dataset d;
    std::string text;
    std::size_t line = 0;
    auto next = [&](const char *what) -> std::string & {
        if (!std::getline(is, text)) {
            throw ParseError(std::string("unexpected end of file, expected ") + what, line + 1);
        }
        ++line;
        return text;
    };
    auto header = [&](const std::string &key) {
        const std::string &t = next(key.c_str());
        if (t.rfind(key + ' ', 0) != 0) {
            throw ParseError("expected '" + key + " ...'", line);
        }
        return t.substr(key.size() + 1);
    };
    if (next("magic") != "cgm-dataset 1") {
        throw ParseError("not a cgm-dataset v1 file", line);
    }
    d.family = header("family");
    try {
        d.basis = basis_from_string(header("basis"));
    } catch (const ConfigError &e) {
        throw ParseError(e.what(), line);
    }
    d.rows = static_cast<int>(detail::parse_int(header("rows"), line));
    d.cols = static_cast<int>(detail::parse_int(header("cols"), line));
    d.seed = static_cast<std::uint64_t>(detail::parse_int(header("seed"), line));
    d.shots_per_system = static_cast<std::size_t>(detail::parse_int(header("shots"), line));
    const auto nsys = detail::parse_int(header("systems"), line);
    std::map<std::string, int> sites;
    for (long long i = 0; i < nsys; ++i) {
        d.systems.push_back(detail::parse_system(next("system"), line));
        if (!sites.emplace(d.systems.back().id, condition_sites(d.systems.back().condition))
                 .second) {
            throw ParseError("duplicate system id '" + d.systems.back().id + "'", line);
        }
    }
    const auto nrec = detail::parse_int(header("records"), line);
    const int alpha = alphabet_size(d.basis);
    d.records.reserve(static_cast<std::size_t>(nrec));
    for (long long i = 0; i < nrec; ++i) {
        const std::string &t = next("record");
        const auto sp = t.find(' ');
        if (sp == std::string::npos) {
            throw ParseError("expected '<system_id> <digits>'", line);
        }
        MeasurementRecord r;
        r.system_id = t.substr(0, sp);
        auto it = sites.find(r.system_id);
        if (it == sites.end()) {
            throw ParseError("unknown system id '" + r.system_id + "'", line);
        }
        const std::string digits = t.substr(sp + 1);
        if (static_cast<int>(digits.size()) != it->second) {
            throw ParseError("record length " + std::to_string(digits.size()) +
                                 " does not match site count " + std::to_string(it->second),
                             line);
        }
        r.outcomes.resize(digits.size());
        for (std::size_t k = 0; k < digits.size(); ++k) {
            const int v = digits[k] - '0';
            if (v < 0 || v >= alpha) {
                throw ParseError("token '" + std::string(1, digits[k]) + "' outside alphabet",
                                 line);
            }
            r.outcomes[k] = static_cast<std::uint8_t>(v);
        }
        d.records.push_back(std::move(r));
    }
    if (std::getline(is, text) && !text.empty()) {
        throw ParseError("trailing content after records", line + 1);
    }
    return d;
}

inline Dataset read_dataset(const std::string &path) {
    std::ifstream is(path, std::ios::binary);
    CGM_REQUIRE(is.good(), ConfigError, "cannot open dataset '" + path + "'");
    return read_dataset(is);
}

} // namespace cgm::measurement
