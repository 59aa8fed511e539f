#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "visifrac/measures.hpp"
#include "visifrac/rng.hpp"

namespace testutil {

using namespace visifrac;

// random sparse cell set, coords independent per axis
inline DyadicSet randomSet(int dim, int depth, int cells, SplitMix64& rng) {
    std::vector<uint64_t> codes;
    const uint32_t side = 1u << depth;
    for (int i = 0; i < cells; ++i) {
        std::array<uint32_t, 3> c{0, 0, 0};
        for (int k = 0; k < dim; ++k) c[size_t(k)] = uint32_t(rng.below(side));
        codes.push_back(mortonEncode(dim, depth, c));
    }
    return DyadicSet(dim, depth, std::move(codes));
}

// independent covering minimum: top-down recursion over explicit coordinate
// boxes, no code-prefix tricks shared with the implementation
inline double coverOracleRec(const std::set<std::pair<uint32_t, uint32_t>>& cells,
                             int depth, double s, int level, uint32_t cx, uint32_t cy) {
    const uint32_t span = 1u << (depth - level);
    bool any = false;
    for (const auto& [x, y] : cells)
        if (x >= cx * span && x < (cx + 1) * span && y >= cy * span &&
            y < (cy + 1) * span) {
            any = true;
            break;
        }
    if (!any) return 0.0;
    const double own = std::pow(std::ldexp(1.0, -level), s);
    if (level == depth) return own;
    double split = 0.0;
    for (uint32_t dx = 0; dx < 2; ++dx)
        for (uint32_t dy = 0; dy < 2; ++dy)
            split += coverOracleRec(cells, depth, s, level + 1, 2 * cx + dx, 2 * cy + dy);
    return std::min(own, split);
}

inline double contentOracle2d(const DyadicSet& set, double s) {
    std::set<std::pair<uint32_t, uint32_t>> cells;
    for (size_t i = 0; i < set.size(); ++i) {
        const auto c = set.cellCoords(i);
        cells.insert({c[0], c[1]});
    }
    if (cells.empty()) return 0.0;
    return coverOracleRec(cells, set.depth(), s, 0, 0, 0);
}

// ray-occlusion brute force matching the documented discrete rule
inline DyadicSet visibleOracle(const DyadicSet& set, const Direction& dir) {
    const double band = 0.5 * set.cellSize();
    std::vector<Vec> proj(set.size());
    std::vector<double> h(set.size());
    for (size_t i = 0; i < set.size(); ++i) {
        const Vec c = set.cellCenter(i);
        proj[i] = projectPoint(dir.perp, c);
        h[i] = dot(c, dir.unit);
    }
    std::vector<uint64_t> out;
    for (size_t i = 0; i < set.size(); ++i) {
        bool occluded = false;
        for (size_t j = 0; j < set.size() && !occluded; ++j) {
            if (h[j] - h[i] <= band) continue;
            bool close = true;
            for (int k = 0; k < dir.perp.n; ++k)
                if (std::abs(proj[j][k] - proj[i][k]) > band) close = false;
            occluded = close;
        }
        if (!occluded) out.push_back(set.codes()[i]);
    }
    return DyadicSet(set.dim(), set.depth(), std::move(out));
}

// direct per-frequency sum over the measure's atoms
inline double naiveAmplitude(const DiscreteMeasure& m, const std::array<int, 3>& xi) {
    double re = 0.0, im = 0.0;
    const int d = m.support.dim();
    for (size_t i = 0; i < m.support.size(); ++i) {
        const Vec c = m.support.cellCenter(i);
        double phase = 0.0;
        for (int k = 0; k < d; ++k) phase -= 2.0 * 3.14159265358979323846 * xi[size_t(k)] * c[k];
        re += m.weights[i] * std::cos(phase);
        im += m.weights[i] * std::sin(phase);
    }
    return re * re + im * im;
}

inline double naiveProjAmplitude(const ProjectedMeasure& pm, const std::array<int, 3>& xi) {
    double re = 0.0, im = 0.0;
    for (const auto& [idx, w] : pm.bins) {
        const Vec c = pm.binCenter(idx);
        double phase = 0.0;
        for (int k = 0; k < pm.frame.n; ++k)
            phase -= 2.0 * 3.14159265358979323846 * xi[size_t(k)] * c[k];
        re += w * std::cos(phase);
        im += w * std::sin(phase);
    }
    return re * re + im * im;
}

inline ProjectedMeasure randomProjected(int n, int bins, SplitMix64& rng) {
    ProjectedMeasure pm;
    pm.frame.dim = n;
    pm.frame.n = n;
    for (int k = 0; k < n; ++k) {
        pm.frame.axes[size_t(k)] = Vec(n, 0.0);
        pm.frame.axes[size_t(k)][k] = 1.0;
    }
    pm.binWidth = 1.0 / double(bins);
    const int count = 3 + int(rng.below(12));
    for (int i = 0; i < count; ++i) {
        std::array<int64_t, 2> idx{0, 0};
        for (int k = 0; k < n; ++k) idx[size_t(k)] = int64_t(rng.below(uint64_t(bins)));
        const double w = 0.05 + rng.uniform();
        pm.bins[idx] += w;
    }
    for (const auto& [idx, w] : pm.bins) pm.totalMass += w;
    return pm;
}

}  // namespace testutil
