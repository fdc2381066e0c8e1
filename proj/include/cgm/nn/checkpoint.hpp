#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgm/core/error.hpp"
#include "cgm/nn/layers.hpp"

namespace cgm::nn {

inline constexpr char kCheckpointMagic[8] = {'C', 'G', 'M', 'C', 'K', 'P', 'T', '\0'};
inline constexpr int kCheckpointVersion = 1;

struct TensorRecord {
    std::string name;
    Mat<double> value;
    Mat<double> m;
    Mat<double> v;
    std::int64_t step = 0;
};

/**
 * Key -> tensor map with a JSON header.
 *
 * Layout: 8-byte magic, u64 header length, header JSON, then for every
 * tensor listed in the header its value, first and second moments as
 * little-endian IEEE doubles in row-major order.
 */
struct Checkpoint {
    nlohmann::json meta = nlohmann::json::object();
    std::vector<TensorRecord> tensors;

    [[nodiscard]] const TensorRecord &get(const std::string &name) const {
        for (const auto &t : tensors) {
            if (t.name == name) {
                return t;
            }
        }
        throw ParseError("checkpoint has no tensor named " + name);
    }
};

template <class T> Checkpoint capture(const ParameterSet<T> &params) {
    Checkpoint c;
    for (const auto &p : params.items()) {
        c.tensors.push_back({p.name, p.var.value().template cast<double>(),
                             p.m.template cast<double>(), p.v.template cast<double>(), p.step});
    }
    return c;
}

/// Loads values and optimizer state into an already-built parameter set.
/// Names and shapes must match exactly.
template <class T> void restore(ParameterSet<T> &params, const Checkpoint &c) {
    CGM_REQUIRE(c.tensors.size() == params.items().size(), ParseError,
                "checkpoint holds " + std::to_string(c.tensors.size()) + " tensors, model has " +
                    std::to_string(params.items().size()));
    for (auto &p : params.items()) {
        const auto &t = c.get(p.name);
        if (t.value.rows() != p.var.rows() || t.value.cols() != p.var.cols()) {
            throw ParseError("checkpoint tensor " + p.name + " has shape " +
                             shape_str(t.value.rows(), t.value.cols()) + ", model expects " +
                             p.var.shape());
        }
        p.var.mutable_value() = t.value.template cast<T>();
        p.m = t.m.template cast<T>();
        p.v = t.v.template cast<T>();
        p.step = t.step;
        p.var.zero_grad();
    }
}

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

inline void write_u64(std::ostream &os, std::uint64_t x) {
    os.write(reinterpret_cast<const char *>(&x), sizeof x);
}

inline std::uint64_t read_u64(std::istream &is) {
    std::uint64_t x = 0;
    is.read(reinterpret_cast<char *>(&x), sizeof x);
    if (!is) {
        throw ParseError("truncated checkpoint");
    }
    return x;
}

inline void write_mat(std::ostream &os, const Mat<double> &m) {
    os.write(reinterpret_cast<const char *>(m.data()),
             static_cast<std::streamsize>(m.size() * sizeof(double)));
}

inline Mat<double> read_mat(std::istream &is, Eigen::Index rows, Eigen::Index cols) {
    Mat<double> m(rows, cols);
    is.read(reinterpret_cast<char *>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!is) {
        throw ParseError("truncated checkpoint");
    }
    return m;
}

} // namespace detail

inline void write_checkpoint(const Checkpoint &c, std::ostream &os) {
    nlohmann::json header;
    header["version"] = kCheckpointVersion;
    header["meta"] = c.meta;
    header["tensors"] = nlohmann::json::array();
    for (const auto &t : c.tensors) {
        header["tensors"].push_back(
            {{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}, {"step", t.step}});
    }
    const std::string h = header.dump();
    os.write(kCheckpointMagic, sizeof kCheckpointMagic);
    detail::write_u64(os, h.size());
    os.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (const auto &t : c.tensors) {
        detail::write_mat(os, t.value);
        detail::write_mat(os, t.m);
        detail::write_mat(os, t.v);
    }
    if (!os) {
        throw Error("failed writing checkpoint");
    }
}

inline Checkpoint read_checkpoint(std::istream &is) {
    char magic[sizeof kCheckpointMagic] = {};
    is.read(magic, sizeof magic);
    if (!is || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
        throw ParseError("not a checkpoint file (bad magic)");
    }
    const auto len = detail::read_u64(is);
    CGM_REQUIRE(len < (1ULL << 30U), ParseError, "checkpoint header too large");
    std::string h(len, '\0');
    is.read(h.data(), static_cast<std::streamsize>(len));
    if (!is) {
        throw ParseError("truncated checkpoint header");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(h);
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("checkpoint header: ") + e.what());
    }
    if (header.value("version", 0) != kCheckpointVersion) {
        throw ParseError("unsupported checkpoint version " + header.value("version", nlohmann::json()).dump());
    }
    Checkpoint c;
    c.meta = header.at("meta");
    for (const auto &t : header.at("tensors")) {
        TensorRecord r;
        r.name = t.at("name").get<std::string>();
        const auto rows = t.at("rows").get<Eigen::Index>();
        const auto cols = t.at("cols").get<Eigen::Index>();
        r.step = t.at("step").get<std::int64_t>();
        r.value = detail::read_mat(is, rows, cols);
        r.m = detail::read_mat(is, rows, cols);
        r.v = detail::read_mat(is, rows, cols);
        c.tensors.push_back(std::move(r));
    }
    return c;
}

inline void write_checkpoint(const Checkpoint &c, const std::filesystem::path &path) {
    std::ofstream os(path, std::ios::binary);
    CGM_REQUIRE(os, Error, "cannot open " + path.string() + " for writing");
    write_checkpoint(c, os);
}

inline Checkpoint read_checkpoint(const std::filesystem::path &path) {
    std::ifstream is(path, std::ios::binary);
    CGM_REQUIRE(is, ConfigError, "cannot open checkpoint " + path.string());
    return read_checkpoint(is);
}

} // namespace cgm::nn
