#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "visifrac/geometry.hpp"

namespace visifrac {

// Standard dyadic cube in [0,1)^d: sidelength 2^-level, integer corner
// coordinates coords[i] in [0, 2^level).
struct DyadicCube {
    int dim = 0;
    int level = 0;
    std::array<uint32_t, 3> coords{0, 0, 0};

    double side() const { return std::ldexp(1.0, -level); }
    double lo(int i) const { return coords[size_t(i)] * side(); }
    double hi(int i) const { return (coords[size_t(i)] + 1) * side(); }
    Vec center() const {
        Vec c(dim, 0.0);
        for (int i = 0; i < dim; ++i) c[i] = (coords[size_t(i)] + 0.5) * side();
        return c;
    }
    DyadicCube parent() const;
    bool containsCube(const DyadicCube& q) const;
    bool containsPoint(const Vec& x) const;
};

// Morton (bit-interleaved) codes; the sparse-cell representation.
uint64_t mortonEncode(int dim, int depth, const std::array<uint32_t, 3>& c);
std::array<uint32_t, 3> mortonDecode(int dim, int depth, uint64_t code);

// A compact set discretized as the occupied dyadic cells of [0,1)^d at a
// single depth. Cells are stored as sorted, deduplicated Morton codes, so
// iteration order is deterministic and prefix ranges are dyadic subtrees.
class DyadicSet {
  public:
    static int maxDepth(int dim);  // 20 / 14 / 9 for d = 1 / 2 / 3

    DyadicSet() : dim_(1), depth_(0) {}
    DyadicSet(int dim, int depth, std::vector<uint64_t> codes);
    static DyadicSet fromCoords(int dim, int depth,
                                const std::vector<std::array<uint32_t, 3>>& cells);

    int dim() const { return dim_; }
    int depth() const { return depth_; }
    size_t size() const { return codes_.size(); }
    bool empty() const { return codes_.empty(); }
    const std::vector<uint64_t>& codes() const { return codes_; }

    std::array<uint32_t, 3> cellCoords(size_t i) const;
    DyadicCube cell(size_t i) const;
    Vec cellCenter(size_t i) const;
    double cellSize() const { return std::ldexp(1.0, -depth_); }
    bool contains(const std::array<uint32_t, 3>& c) const;

  private:
    int dim_;
    int depth_;
    std::vector<uint64_t> codes_;
};

// Number of level-j dyadic cubes meeting the set (dyadic covering number;
// comparable to the metric covering number within a dimensional factor).
uint64_t coveringNumber(const DyadicSet& set, int level);

// Dyadic Hausdorff content: exact min over dyadic coverings of sum l(Q)^s,
// computed by tree DP. Ties resolve to the coarser cube.
double dyadicContent(const DyadicSet& set, double s);

// Content of the part of the set inside a given cube.
double dyadicContentWithin(const DyadicSet& set, const DyadicCube& q, double s);

namespace detail {
// Content DP over a contiguous Morton-sorted code range rooted at the given level.
double contentRange(std::span<const uint64_t> codes, int level, int depth, int dim,
                    double s);
}  // namespace detail

struct BoxFit {
    double slope = 0.0;
    double residual = 0.0;  // RMS residual of the log-log fit
};
BoxFit boxDimensionFit(const std::vector<std::pair<double, uint64_t>>& counts);

// Dyadic grid on R^n shifted by e/3, e in {0,1}^n (the one-third trick).
struct ShiftedGrid {
    int n = 1;
    std::array<int, 2> e{0, 0};

    double shift(int i) const { return e[size_t(i)] / 3.0; }
};

// Cube of a (possibly shifted) grid on R^n; may extend outside [0,1)^n.
struct GridCube {
    ShiftedGrid grid;
    int level = 0;  // sidelength 2^-level, level may be negative
    std::array<int64_t, 2> idx{0, 0};

    double side() const { return std::ldexp(1.0, -level); }
    double lo(int i) const { return grid.shift(i) + idx[size_t(i)] * side(); }
    double hi(int i) const { return grid.shift(i) + (idx[size_t(i)] + 1) * side(); }
    bool containsPoint(const Vec& x) const;
    bool containsBall(const Vec& x, double r) const;
    GridCube parent() const;
    bool containsCube(const GridCube& q) const;  // same grid only
};

// Smallest cube Q from one of the 2^n shifted grids with B(x,r) inside Q and
// l(Q) <= maxConstant * r. Ties between grids break lexicographically on e.
std::optional<GridCube> findCoveringCube(const Vec& x, double r, double maxConstant);

// Empirical constant for the one-third trick: max over sampled (x,r) of the
// smallest achievable ratio l(Q)/r. The first sample is always the fixed
// adversarial pair (x = 0.5..., r = 0.1), the rest are seeded-random.
double calibrateGridConstant(int n, int trials, uint64_t seed);

// DYSET1 text format and binary PGM rasters (d = 2).
std::string writeDyset(const DyadicSet& set);
DyadicSet parseDyset(const std::string& text);
std::string writePgm(const DyadicSet& set);

}  // namespace visifrac
