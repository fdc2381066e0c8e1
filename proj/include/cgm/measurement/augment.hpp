#pragma once

#include <array>
#include <tuple>
#include <vector>

#include "cgm/core/error.hpp"
#include "cgm/measurement/sampling.hpp"
#include "cgm/quantum/lattice.hpp"

namespace cgm::measurement {

/// Image of site (r, c) under dihedral element `g` of an L x L square:
/// g = rotation (0..3 quarter turns) + 4 * reflect.
inline std::pair<int, int> dihedral_map(int g, int r, int c, int l) {
    if (g >= 4) {
        c = l - 1 - c;
    }
    for (int k = 0; k < g % 4; ++k) {
        const int nr = c;
        const int nc = l - 1 - r;
        r = nr;
        c = nc;
    }
    return {r, c};
}

/// The 8 images of a square-lattice outcome under rotations and reflection,
/// identity first, each in row-major site order.
inline std::array<Outcome, 8> augment_square_symmetries(const Outcome &outcome,
                                                        quantum::GridDims dims) {
    CGM_REQUIRE(dims.rows == dims.cols, InvalidArgument,
                "unsupported: symmetry augmentation needs a square lattice");
    CGM_REQUIRE(static_cast<int>(outcome.size()) == dims.sites(), InvalidArgument,
                "outcome length does not match lattice");
    const int l = dims.rows;
    std::array<Outcome, 8> out;
    for (int g = 0; g < 8; ++g) {
        Outcome img(outcome.size());
        for (int r = 0; r < l; ++r) {
            for (int c = 0; c < l; ++c) {
                const auto [nr, nc] = dihedral_map(g, r, c, l);
                img[static_cast<std::size_t>(nr * l + nc)] =
                    outcome[static_cast<std::size_t>(r * l + c)];
            }
        }
        out[static_cast<std::size_t>(g)] = std::move(img);
    }
    return out;
}

/// Size of the lattice point group used for augmentation: the dihedral
/// group of a square, {identity, two mirrors, half turn} of a rectangle,
/// and {identity, reversal} of a chain.
inline int lattice_symmetry_count(quantum::GridDims dims) {
    if (dims.sites() == 1) {
        return 1;
    }
    if (dims.rows == 1 || dims.cols == 1) {
        return 2;
    }
    return dims.rows == dims.cols ? 8 : 4;
}

/// perm[site] = image of `site` under element g; g = 0 is the identity and
/// for squares the order matches augment_square_symmetries.
inline std::vector<int> lattice_symmetry(int g, quantum::GridDims dims) {
    const int count = lattice_symmetry_count(dims);
    CGM_REQUIRE(g >= 0 && g < count, InvalidArgument, "symmetry element out of range");
    std::vector<int> perm(static_cast<std::size_t>(dims.sites()));
    for (int r = 0; r < dims.rows; ++r) {
        for (int c = 0; c < dims.cols; ++c) {
            int nr = r;
            int nc = c;
            if (count == 8) {
                std::tie(nr, nc) = dihedral_map(g, r, c, dims.rows);
            } else if (count == 2 || g == 1) {
                nr = dims.rows - 1 - r;
                nc = dims.cols - 1 - c;
            } else if (g == 2) {
                nc = dims.cols - 1 - c;
            } else if (g == 3) {
                nr = dims.rows - 1 - r;
            }
            perm[static_cast<std::size_t>(dims.site_of(r, c))] = dims.site_of(nr, nc);
        }
    }
    return perm;
}

inline Outcome permute_sites(const Outcome &o, const std::vector<int> &perm) {
    CGM_REQUIRE(o.size() == perm.size(), InvalidArgument, "outcome length does not match lattice");
    Outcome img(o.size());
    for (std::size_t s = 0; s < o.size(); ++s) {
        img[static_cast<std::size_t>(perm[s])] = o[s];
    }
    return img;
}

/// Couplings carried along by a site permutation.
inline quantum::CouplingGraph permute_sites(const quantum::CouplingGraph &g,
                                            const std::vector<int> &perm) {
    quantum::CouplingGraph out(g.dims());
    for (const auto &[e, w] : g.couplings()) {
        out.set(perm[static_cast<std::size_t>(e.first)], perm[static_cast<std::size_t>(e.second)], w);
    }
    return out;
}

} // namespace cgm::measurement
