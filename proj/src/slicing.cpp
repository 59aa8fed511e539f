#include "visifrac/slicing.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "visifrac/spectral.hpp"

namespace visifrac {

Frame perpComplement(const Frame& L) {
    L.validate();
    Frame p;
    p.dim = L.dim;
    p.n = L.dim - L.n;
    if (L.dim == 2 && L.n == 1) {
        p.axes[0] = Vec(2, -L.axes[0][1], L.axes[0][0]);
    } else if (L.dim == 3 && L.n == 2) {
        const Vec &a = L.axes[0], &b = L.axes[1];
        p.axes[0] = Vec(3, a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
                        a[0] * b[1] - a[1] * b[0]);
    } else if (L.dim == 3 && L.n == 1) {
        p = Direction::fromVector(L.axes[0]).perp;
    } else {
        throw std::invalid_argument("perpComplement: unsupported (d, n)");
    }
    p.validate(1e-9);
    return p;
}

namespace {

// Does the projection of the closed cube (corner lo, side h) onto the frame
// contain the point p0? Support-function test of the projected zonotope over
// the generator and facet-normal directions.
bool cubeProjectionContains(const Frame& f, const Vec& lo, double h, const Vec& p0) {
    const int n = f.n, d = f.dim;
    Vec c(n, 0.0);  // projected cube center
    for (int i = 0; i < n; ++i) {
        c[i] = dot(f.axes[size_t(i)], lo);
        for (int j = 0; j < d; ++j) c[i] += f.axes[size_t(i)][j] * 0.5 * h;
    }
    Vec g[3];  // generators: projections of the scaled edge vectors
    for (int j = 0; j < d; ++j) {
        g[j] = Vec(n, 0.0);
        for (int i = 0; i < n; ++i) g[j][i] = f.axes[size_t(i)][j] * h;
    }
    auto test = [&](const Vec& u) {
        const double len = norm(u);
        if (len < 1e-14) return true;
        double reach = 0.0;
        for (int j = 0; j < d; ++j) reach += std::abs(dot(u, g[j]));
        double off = 0.0;
        for (int i = 0; i < n; ++i) off += u[i] * (p0[i] - c[i]);
        return std::abs(off) <= 0.5 * reach + 1e-12 * len;
    };
    if (n == 1) {
        return test(Vec(1, 1.0));
    }
    for (int j = 0; j < d; ++j) {
        if (!test(g[j])) return false;
        if (!test(Vec(2, -g[j][1], g[j][0]))) return false;
    }
    return true;
}

int64_t floorDiv(double x, double h) { return int64_t(std::floor(x / h)); }

}  // namespace

SliceResult sliceSet(const DyadicSet& set, const SliceSpec& spec) {
    spec.frame.validate(1e-9);
    if (spec.frame.dim != set.dim())
        throw std::invalid_argument("sliceSet: frame dimension mismatch");
    for (int i = 0; i < set.dim(); ++i)
        if (spec.anchor[i] < 0.0 || spec.anchor[i] >= 1.0)
            throw std::invalid_argument("sliceSet: anchor must lie in [0,1)^d");
    SliceResult out;
    out.perpFrame = perpComplement(spec.frame);
    out.thickness = set.cellSize();
    const Vec p0 = projectPoint(spec.frame, spec.anchor);
    const double h = set.cellSize();
    std::vector<uint64_t> codes;
    std::vector<std::array<int64_t, 2>> planar;
    for (size_t i = 0; i < set.size(); ++i) {
        const DyadicCube cell = set.cell(i);
        Vec lo(set.dim(), 0.0);
        for (int k = 0; k < set.dim(); ++k) lo[k] = cell.lo(k);
        if (!cubeProjectionContains(spec.frame, lo, h, p0)) continue;
        codes.push_back(set.codes()[i]);
        const Vec q = projectPoint(out.perpFrame, cell.center());
        std::array<int64_t, 2> idx{0, 0};
        for (int k = 0; k < out.perpFrame.n; ++k) idx[size_t(k)] = floorDiv(q[k], h);
        planar.push_back(idx);
    }
    std::sort(planar.begin(), planar.end());
    planar.erase(std::unique(planar.begin(), planar.end()), planar.end());
    out.ambient = DyadicSet(set.dim(), set.depth(), std::move(codes));
    out.planar = std::move(planar);
    return out;
}

namespace {

struct GridMass {
    const ShiftedGrid* grid;
    int fineLevel;
    static constexpr int coarseLevel = -2;
    // mass per cube, one map per level
    std::vector<std::unordered_map<uint64_t, double>> byLevel;

    static uint64_t key(const std::array<int64_t, 2>& q) {
        return (uint64_t(q[0] + (int64_t(1) << 30)) << 32) |
               uint64_t(q[1] + (int64_t(1) << 30));
    }

    std::array<int64_t, 2> cubeIdx(const Vec& p, int level) const {
        std::array<int64_t, 2> c{0, 0};
        const double side = std::ldexp(1.0, -level);
        for (int i = 0; i < grid->n; ++i)
            c[size_t(i)] = int64_t(std::floor((p[i] - grid->shift(i)) / side));
        return c;
    }

    GridMass(const ProjectedMeasure& pm, const ShiftedGrid& g) : grid(&g) {
        fineLevel = 0;
        while (std::ldexp(1.0, -fineLevel) > pm.binWidth + 1e-15) ++fineLevel;
        byLevel.assign(size_t(fineLevel - coarseLevel + 1), {});
        for (const auto& [idx, w] : pm.bins) {
            const Vec c = pm.binCenter(idx);
            for (int level = fineLevel; level >= coarseLevel; --level)
                byLevel[size_t(level - coarseLevel)][key(cubeIdx(c, level))] += w;
        }
    }

    double mass(int level, const std::array<int64_t, 2>& q) const {
        const auto& m = byLevel[size_t(level - coarseLevel)];
        const auto it = m.find(key(q));
        return it == m.end() ? 0.0 : it->second;
    }
};

}  // namespace

HeavyCover dyadicHeavyCubes(const ProjectedMeasure& pm, double M, const ShiftedGrid& grid) {
    if (M <= 0.0) throw std::invalid_argument("dyadicHeavyCubes: M must be positive");
    if (grid.n != pm.frame.n)
        throw std::invalid_argument("dyadicHeavyCubes: grid dimension mismatch");
    HeavyCover out;
    out.M = M;
    const int n = grid.n;
    out.degenerate = !(M > std::pow(3.0, n) * pm.totalMass);
    if (pm.bins.empty()) return out;
    const double threshold = std::pow(3.0, -n) * M;
    GridMass gm(pm, grid);
    // collect occupied cubes at the coarsest level, then descend; stopping at
    // the first qualifying cube makes the family maximal
    std::map<std::array<int64_t, 2>, bool> roots;
    for (const auto& [idx, w] : pm.bins) roots[gm.cubeIdx(pm.binCenter(idx), GridMass::coarseLevel)] = true;
    struct Item {
        int level;
        std::array<int64_t, 2> q;
    };
    std::vector<Item> stack;
    for (auto it = roots.rbegin(); it != roots.rend(); ++it)
        stack.push_back({GridMass::coarseLevel, it->first});
    while (!stack.empty()) {
        const Item item = stack.back();
        stack.pop_back();
        const double m = gm.mass(item.level, item.q);
        if (m <= 0.0) continue;
        const double side = std::ldexp(1.0, -item.level);
        if (m / std::pow(side, n) >= threshold) {
            out.cubes.push_back(GridCube{grid, item.level, item.q});
            continue;
        }
        if (item.level == gm.fineLevel) continue;
        for (int mask = (1 << n) - 1; mask >= 0; --mask) {
            std::array<int64_t, 2> c = item.q;
            for (int i = 0; i < n; ++i)
                c[size_t(i)] = 2 * item.q[size_t(i)] + ((mask >> i) & 1);
            stack.push_back({item.level + 1, c});
        }
    }
    return out;
}

RegularizedCover regularizeCover(const std::vector<GridCube>& cover,
                                 const std::set<std::array<int64_t, 2>>& hPrime,
                                 double binWidth, double t) {
    RegularizedCover out;
    if (cover.empty()) return out;
    const int n = cover.front().grid.n;
    for (size_t i = 0; i < cover.size(); ++i)
        for (size_t j = i + 1; j < cover.size(); ++j)
            if (cover[i].containsCube(cover[j]) || cover[j].containsCube(cover[i]))
                throw std::invalid_argument("regularizeCover: cover cubes not disjoint");
    // a cube exits hPrime iff some bin slot whose center lies in it is absent
    auto exits = [&](const GridCube& q) {
        std::array<int64_t, 2> lo{0, 0}, hi{0, 0};
        for (int i = 0; i < n; ++i) {
            lo[size_t(i)] = int64_t(std::ceil(q.lo(i) / binWidth - 0.5));
            hi[size_t(i)] = int64_t(std::floor(q.hi(i) / binWidth - 0.5));
        }
        for (int64_t a = lo[0]; a <= hi[0]; ++a)
            for (int64_t b = (n == 2 ? lo[1] : 0); b <= (n == 2 ? hi[1] : 0); ++b) {
                std::array<int64_t, 2> slot{a, b};
                Vec c(n, 0.0);
                for (int i = 0; i < n; ++i) c[i] = (double(slot[size_t(i)]) + 0.5) * binWidth;
                if (!q.containsPoint(c)) continue;
                if (!hPrime.count(slot)) return true;
            }
        return false;
    };
    std::vector<GridCube> grown;
    for (GridCube q : cover) {
        bool found = false;
        while (q.level >= -2) {
            if (exits(q)) {
                found = true;
                break;
            }
            q = q.parent();
        }
        if (!found) {
            out.degenerate = true;
            continue;
        }
        grown.push_back(q);
    }
    // keep the maximal cubes, deduplicated
    std::sort(grown.begin(), grown.end(), [](const GridCube& a, const GridCube& b) {
        return std::tie(a.level, a.idx) < std::tie(b.level, b.idx);
    });
    grown.erase(std::unique(grown.begin(), grown.end(),
                            [](const GridCube& a, const GridCube& b) {
                                return a.level == b.level && a.idx == b.idx;
                            }),
                grown.end());
    for (size_t i = 0; i < grown.size(); ++i) {
        bool dominated = false;
        for (size_t j = 0; j < grown.size() && !dominated; ++j)
            if (i != j && grown[j].containsCube(grown[i]) &&
                !(grown[i].level == grown[j].level && grown[i].idx == grown[j].idx))
                dominated = true;
        if (!dominated) out.P.push_back(grown[i]);
    }
    for (const auto& q : cover) out.contentQ += std::pow(q.side(), t);
    for (const auto& p : out.P) out.contentP += std::pow(p.side(), t);
    out.constantC = out.contentQ > 0.0 ? out.contentP / out.contentQ : 0.0;
    return out;
}

HeavySetResult heavySet(const DyadicSet& set, const DiscreteMeasure& measure,
                        const Frame& L, double M, double s, double epsilon) {
    L.validate(1e-9);
    if (M <= 0.0) throw std::invalid_argument("heavySet: M must be positive");
    const int n = L.n;
    HeavySetResult out;
    const ProjectedMeasure pm = project(measure, L);
    out.degenerate = !(M > std::pow(3.0, n) * pm.totalMass);
    // cells grouped by projected bin; one maximal-function query per bin
    std::map<std::array<int64_t, 2>, double> cache;
    std::vector<uint64_t> codes;
    for (size_t i = 0; i < set.size(); ++i) {
        const Vec p = projectPoint(L, set.cellCenter(i));
        std::array<int64_t, 2> idx{0, 0};
        for (int k = 0; k < n; ++k) idx[size_t(k)] = int64_t(std::floor(p[k] / pm.binWidth));
        auto it = cache.find(idx);
        if (it == cache.end())
            it = cache.emplace(idx, maximalFunctionAt(pm, pm.binCenter(idx)).value).first;
        if (it->second >= M) codes.push_back(set.codes()[i]);
    }
    out.fm = DyadicSet(set.dim(), set.depth(), std::move(codes));
    out.content = out.fm.empty() ? 0.0 : dyadicContent(out.fm, double(n) + 2.0 * epsilon);
    const double sigma = 0.5 * (s - double(n) - epsilon);
    const int cutoff = std::max(1, 1 << (set.depth() - 1));
    out.bound = sobolevNorm(transform(pm, cutoff), sigma, SobolevKind::inhomogeneous) / M;
    out.ratio = out.bound > 0.0 ? out.content / out.bound : 0.0;
    return out;
}

std::vector<SliceSpectrumRow> sliceSpectrum(const DyadicSet& set, const Frame& L,
                                            double s, double beta,
                                            const std::vector<int>& levels) {
    L.validate(1e-9);
    if (beta <= 0.0) throw std::invalid_argument("sliceSpectrum: beta must be positive");
    const int n = L.n;
    const Frame perp = perpComplement(L);
    std::vector<std::pair<Vec, Vec>> projected;  // (position in L, position in L_perp)
    projected.reserve(set.size());
    for (size_t i = 0; i < set.size(); ++i) {
        const Vec c = set.cellCenter(i);
        projected.push_back({projectPoint(L, c), projectPoint(perp, c)});
    }
    std::vector<SliceSpectrumRow> rows;
    for (int level : levels) {
        if (level < 0 || level > set.depth())
            throw std::invalid_argument("sliceSpectrum: level out of range");
        const double delta = std::ldexp(1.0, -level);
        // per position bin, the set of delta-cubes met in L_perp coordinates
        std::map<std::array<int64_t, 2>, std::set<std::array<int64_t, 2>>> slices;
        for (const auto& [pos, q] : projected) {
            std::array<int64_t, 2> b{0, 0}, t{0, 0};
            for (int k = 0; k < n; ++k) b[size_t(k)] = floorDiv(pos[k], delta);
            for (int k = 0; k < perp.n; ++k) t[size_t(k)] = floorDiv(q[k], delta);
            slices[b].insert(t);
        }
        SliceSpectrumRow row;
        row.scale = delta;
        row.thresholdExponent = (s - double(n)) + beta;
        const double threshold = std::pow(delta, -row.thresholdExponent);
        std::vector<uint64_t> counts;
        uint64_t heavy = 0;
        for (const auto& [b, cubes] : slices) {
            counts.push_back(cubes.size());
            if (double(cubes.size()) > threshold) ++heavy;
        }
        std::sort(counts.begin(), counts.end());
        row.fractionHeavy = counts.empty() ? 0.0 : double(heavy) / double(counts.size());
        row.sliceCountP50 = counts.empty() ? 0 : counts[(counts.size() - 1) / 2];
        row.sliceCountMax = counts.empty() ? 0 : counts.back();
        rows.push_back(row);
    }
    return rows;
}

std::string writeSliceSpectrumCsv(const std::vector<SliceSpectrumRow>& rows) {
    std::ostringstream out;
    out.precision(17);
    out << "scale,thresholdExponent,fractionHeavy,sliceCountP50,sliceCountMax\n";
    for (const auto& r : rows)
        out << r.scale << "," << r.thresholdExponent << "," << r.fractionHeavy << ","
            << r.sliceCountP50 << "," << r.sliceCountMax << "\n";
    return out.str();
}

}  // namespace visifrac
