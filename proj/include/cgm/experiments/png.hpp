#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "cgm/core/error.hpp"
#include "cgm/phase/order.hpp"

namespace cgm::experiments {

namespace detail {

inline std::uint32_t crc32(const std::uint8_t *data, std::size_t n, std::uint32_t crc = 0) {
    crc = ~crc;
    for (std::size_t i = 0; i < n; ++i) {
        crc ^= data[i];
        for (int k = 0; k < 8; ++k) {
            crc = (crc >> 1U) ^ (0xEDB88320U & (0U - (crc & 1U)));
        }
    }
    return ~crc;
}

inline void put_be32(std::vector<std::uint8_t> &v, std::uint32_t x) {
    for (int s = 24; s >= 0; s -= 8) {
        v.push_back(static_cast<std::uint8_t>(x >> static_cast<unsigned>(s)));
    }
}

inline void png_chunk(std::vector<std::uint8_t> &out, const char *type,
                      const std::vector<std::uint8_t> &data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    std::vector<std::uint8_t> body(type, type + 4);
    body.insert(body.end(), data.begin(), data.end());
    out.insert(out.end(), body.begin(), body.end());
    put_be32(out, crc32(body.data(), body.size()));
}

} // namespace detail

/// RGB image as an uncompressed (stored-deflate) PNG.
inline void write_png(const std::string &path, int width, int height,
                      const std::vector<std::array<std::uint8_t, 3>> &pixels) {
    CGM_REQUIRE(width > 0 && height > 0 &&
                    pixels.size() == static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
                InvalidArgument, "png: pixel count does not match size");
    std::vector<std::uint8_t> raw;
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        for (int x = 0; x < width; ++x) {
            const auto &p = pixels[static_cast<std::size_t>(y * width + x)];
            raw.insert(raw.end(), p.begin(), p.end());
        }
    }
    std::vector<std::uint8_t> z{0x78, 0x01};
    std::size_t pos = 0;
    do {
        const std::size_t len = std::min<std::size_t>(65535, raw.size() - pos);
        const bool last = pos + len == raw.size();
        z.push_back(last ? 1 : 0);
        z.push_back(static_cast<std::uint8_t>(len & 0xFFU));
        z.push_back(static_cast<std::uint8_t>(len >> 8U));
        z.push_back(static_cast<std::uint8_t>(~len & 0xFFU));
        z.push_back(static_cast<std::uint8_t>((~len >> 8U) & 0xFFU));
        z.insert(z.end(), raw.begin() + static_cast<std::ptrdiff_t>(pos),
                 raw.begin() + static_cast<std::ptrdiff_t>(pos + len));
        pos += len;
    } while (pos < raw.size());
    std::uint32_t a = 1;
    std::uint32_t b = 0;
    for (auto byte : raw) {
        a = (a + byte) % 65521U;
        b = (b + a) % 65521U;
    }
    detail::put_be32(z, (b << 16U) | a);

    std::vector<std::uint8_t> out{0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    std::vector<std::uint8_t> ihdr;
    detail::put_be32(ihdr, static_cast<std::uint32_t>(width));
    detail::put_be32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
    detail::png_chunk(out, "IHDR", ihdr);
    detail::png_chunk(out, "IDAT", z);
    detail::png_chunk(out, "IEND", {});
    std::ofstream os(path, std::ios::binary);
    CGM_REQUIRE(os, Error, "cannot open " + path + " for writing");
    os.write(reinterpret_cast<const char *>(out.data()), static_cast<std::streamsize>(out.size()));
}

/// Label raster: delta/omega along x, R0/a along y (largest at the top),
/// `cell` pixels per grid point; holes stay white.
inline void write_phase_png(const std::string &path, const std::vector<phase::PhasePoint> &pts,
                            int cell = 16) {
    CGM_REQUIRE(!pts.empty(), NoDataError, "no phase points to render");
    std::map<double, int> xs;
    std::map<double, int> ys;
    for (const auto &p : pts) {
        xs[p.delta_over_omega] = 0;
        ys[p.r0_over_a] = 0;
    }
    int i = 0;
    for (auto &kv : xs) {
        kv.second = i++;
    }
    i = static_cast<int>(ys.size()) - 1;
    for (auto &kv : ys) {
        kv.second = i--;
    }
    static const std::map<std::string, std::array<std::uint8_t, 3>> colors = {
        {"disordered", {200, 200, 200}}, {"Z2", {220, 60, 60}},      {"Z3", {60, 90, 220}},
        {"checkboard", {230, 140, 30}},  {"striated", {60, 170, 80}}, {"star", {150, 70, 190}},
        {"staggered", {40, 170, 190}}};
    const int w = static_cast<int>(xs.size()) * cell;
    const int h = static_cast<int>(ys.size()) * cell;
    std::vector<std::array<std::uint8_t, 3>> px(static_cast<std::size_t>(w * h), {255, 255, 255});
    for (const auto &p : pts) {
        const auto it = colors.find(p.label);
        const auto c = it == colors.end() ? std::array<std::uint8_t, 3>{0, 0, 0} : it->second;
        const int gx = xs.at(p.delta_over_omega);
        const int gy = ys.at(p.r0_over_a);
        for (int y = gy * cell; y < (gy + 1) * cell; ++y) {
            for (int x = gx * cell; x < (gx + 1) * cell; ++x) {
                px[static_cast<std::size_t>(y * w + x)] = c;
            }
        }
    }
    write_png(path, w, h, px);
}

} // namespace cgm::experiments
