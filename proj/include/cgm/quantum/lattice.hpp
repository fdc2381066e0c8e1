#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cgm/core/error.hpp"
#include "cgm/core/random.hpp"

namespace cgm::quantum {

/// Sites are labelled row-major: site = row * cols + col.
struct GridDims {
    int rows = 1;
    int cols = 1;

    [[nodiscard]] int sites() const { return rows * cols; }
    [[nodiscard]] int row_of(int site) const { return site / cols; }
    [[nodiscard]] int col_of(int site) const { return site % cols; }
    [[nodiscard]] int site_of(int row, int col) const { return row * cols + col; }
    [[nodiscard]] bool adjacent(int i, int j) const {
        return std::abs(row_of(i) - row_of(j)) + std::abs(col_of(i) - col_of(j)) == 1;
    }
    bool operator==(const GridDims &) const = default;
};

/// All nearest-neighbour pairs (i < j) of a grid, horizontal bonds first.
inline std::vector<std::pair<int, int>> grid_edges(GridDims dims) {
    std::vector<std::pair<int, int>> edges;
    for (int r = 0; r < dims.rows; ++r) {
        for (int c = 0; c + 1 < dims.cols; ++c) {
            edges.emplace_back(dims.site_of(r, c), dims.site_of(r, c + 1));
        }
    }
    for (int r = 0; r + 1 < dims.rows; ++r) {
        for (int c = 0; c < dims.cols; ++c) {
            edges.emplace_back(dims.site_of(r, c), dims.site_of(r + 1, c));
        }
    }
    return edges;
}

/**
 * Weighted undirected nearest-neighbour graph on a rows x cols grid.
 *
 * Edge keys are stored with i < j. The weights are the Heisenberg couplings;
 * a missing edge is equivalent to a zero coupling.
 */
class CouplingGraph {
  public:
    CouplingGraph() = default;
    explicit CouplingGraph(GridDims dims) : dims_(dims) {
        CGM_REQUIRE(dims.rows >= 1 && dims.cols >= 1, InvalidArgument,
                    "invalid graph: grid dimensions must be positive");
    }

    void set(int i, int j, double weight) {
        if (i > j) {
            std::swap(i, j);
        }
        CGM_REQUIRE(i >= 0 && j < dims_.sites() && i != j, InvalidArgument,
                    "invalid graph: site index out of range");
        CGM_REQUIRE(dims_.adjacent(i, j), InvalidArgument,
                    "invalid graph: edge (" + std::to_string(i) + "," +
                        std::to_string(j) + ") is not nearest-neighbour");
        CGM_REQUIRE(std::isfinite(weight), InvalidArgument,
                    "invalid graph: non-finite weight");
        couplings_[{i, j}] = weight;
    }

    [[nodiscard]] double weight(int i, int j) const {
        if (i > j) {
            std::swap(i, j);
        }
        auto it = couplings_.find({i, j});
        return it == couplings_.end() ? 0.0 : it->second;
    }

    [[nodiscard]] const GridDims &dims() const { return dims_; }
    [[nodiscard]] int sites() const { return dims_.sites(); }
    [[nodiscard]] const std::map<std::pair<int, int>, double> &couplings() const {
        return couplings_;
    }

    /// Couplings in grid_edges() order; the flat feature vector used by the
    /// kernel baselines.
    [[nodiscard]] std::vector<double> edge_vector() const {
        std::vector<double> out;
        for (auto [i, j] : grid_edges(dims_)) {
            out.push_back(weight(i, j));
        }
        return out;
    }

    /// Dense symmetric adjacency matrix, row-major sites x sites.
    [[nodiscard]] std::vector<double> adjacency() const {
        const auto n = static_cast<std::size_t>(sites());
        std::vector<double> a(n * n, 0.0);
        for (const auto &[e, w] : couplings_) {
            a[static_cast<std::size_t>(e.first) * n + static_cast<std::size_t>(e.second)] = w;
            a[static_cast<std::size_t>(e.second) * n + static_cast<std::size_t>(e.first)] = w;
        }
        return a;
    }

    bool operator==(const CouplingGraph &) const = default;

  private:
    GridDims dims_{};
    std::map<std::pair<int, int>, double> couplings_;
};

/// Every nearest-neighbour coupling drawn i.i.d. from U[lo, hi].
inline CouplingGraph sample_coupling_graph(GridDims dims, Rng &rng, double lo = 0.0,
                                           double hi = 2.0) {
    CouplingGraph g(dims);
    for (auto [i, j] : grid_edges(dims)) {
        g.set(i, j, uniform(rng, lo, hi));
    }
    return g;
}

/// Uniform-weight graph, mostly for tests.
inline CouplingGraph uniform_coupling_graph(GridDims dims, double w) {
    CouplingGraph g(dims);
    for (auto [i, j] : grid_edges(dims)) {
        g.set(i, j, w);
    }
    return g;
}

} // namespace cgm::quantum
