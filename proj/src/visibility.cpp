#include "visifrac/visibility.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "visifrac/rng.hpp"
#include "visifrac/spectral.hpp"

namespace visifrac {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct PairKey {
    uint64_t q;
    std::array<int64_t, 2> t;
    bool operator==(const PairKey& o) const { return q == o.q && t == o.t; }
};

struct PairKeyHash {
    size_t operator()(const PairKey& k) const {
        uint64_t h = k.q * 0x9e3779b97f4a7c15ULL;
        h ^= uint64_t(k.t[0]) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h ^= uint64_t(k.t[1]) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        return size_t(h);
    }
};

struct IdxHash {
    size_t operator()(const std::array<int64_t, 2>& t) const {
        uint64_t h = uint64_t(t[0]) * 0x9e3779b97f4a7c15ULL;
        h ^= uint64_t(t[1]) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        return size_t(h);
    }
};

// tube indices at the given width whose padded slab contains p
void tubeIndicesForPoint(const Vec& p, int n, double gamma, double pad,
                         std::vector<std::array<int64_t, 2>>& out) {
    int64_t lo[2] = {0, 0}, hi[2] = {0, 0};
    for (int k = 0; k < n; ++k) {
        lo[k] = int64_t(std::floor((p[k] - pad) / gamma)) - 1;
        hi[k] = int64_t(std::floor((p[k] + pad) / gamma)) + 1;
    }
    out.clear();
    for (int64_t a = lo[0]; a <= hi[0]; ++a) {
        if (!(double(a) * gamma - pad <= p[0] && p[0] < double(a + 1) * gamma + pad))
            continue;
        if (n == 1) {
            out.push_back({a, 0});
            continue;
        }
        for (int64_t b = lo[1]; b <= hi[1]; ++b) {
            if (!(double(b) * gamma - pad <= p[1] && p[1] < double(b + 1) * gamma + pad))
                continue;
            out.push_back({a, b});
        }
    }
}

bool pointInTubeCore(const Vec& p, int n, double gamma, const std::array<int64_t, 2>& idx) {
    for (int k = 0; k < n; ++k) {
        const double lo = double(idx[size_t(k)]) * gamma;
        if (p[k] < lo || p[k] >= lo + gamma) return false;
    }
    return true;
}

// C++20 arithmetic shift: floor division of a tube index to a coarser level
std::array<int64_t, 2> tubeAncestor(const std::array<int64_t, 2>& idx, int levels) {
    return {idx[0] >> levels, idx[1] >> levels};
}

// inf and sup of x.theta over the axis box [lo, hi]
std::pair<double, double> heightRange(const Vec& theta, const Vec& lo, const Vec& hi) {
    double inf = 0.0, sup = 0.0;
    for (int k = 0; k < theta.dim; ++k) {
        if (theta[k] >= 0.0) {
            inf += theta[k] * lo[k];
            sup += theta[k] * hi[k];
        } else {
            inf += theta[k] * hi[k];
            sup += theta[k] * lo[k];
        }
    }
    return {inf, sup};
}

// does the (possibly haloed) cube meet the tube's closed base cube
bool cubeMeetsTube(const Frame& perp, const Vec& lo, const Vec& hi, double gamma,
                   const std::array<int64_t, 2>& idx) {
    for (int k = 0; k < perp.n; ++k) {
        const Vec& ax = perp.axes[size_t(k)];
        double plo = 0.0, phi = 0.0;
        for (int j = 0; j < perp.dim; ++j) {
            if (ax[j] >= 0.0) {
                plo += ax[j] * lo[j];
                phi += ax[j] * hi[j];
            } else {
                plo += ax[j] * hi[j];
                phi += ax[j] * lo[j];
            }
        }
        const double blo = double(idx[size_t(k)]) * gamma;
        if (phi < blo || plo > blo + gamma) return false;
    }
    return true;
}

struct CellData {
    std::vector<Vec> centers;
    std::vector<Vec> proj;       // theta-perp coordinates
    std::vector<double> height;  // center . theta
};

CellData projectCells(const DyadicSet& set, const Direction& dir) {
    CellData cd;
    cd.centers.resize(set.size());
    cd.proj.resize(set.size());
    cd.height.resize(set.size());
    for (size_t i = 0; i < set.size(); ++i) {
        cd.centers[i] = set.cellCenter(i);
        cd.proj[i] = projectPoint(dir.perp, cd.centers[i]);
        cd.height[i] = dot(cd.centers[i], dir.unit);
    }
    return cd;
}

}  // namespace

Params solveParameters(double s, int d, double epsilon, Mode mode, int deltaLevel) {
    if (d < 2 || d > 3) throw std::invalid_argument("solveParameters: d must be 2 or 3");
    if (epsilon < 0.0) throw std::invalid_argument("solveParameters: epsilon must be >= 0");
    if (deltaLevel < 1) throw std::invalid_argument("solveParameters: deltaLevel must be >= 1");
    Params p;
    p.s = s;
    p.d = d;
    p.epsilon = epsilon;
    p.mode = mode;
    p.deltaLevel = deltaLevel;
    p.delta = std::ldexp(1.0, -deltaLevel);
    if (mode == Mode::regular) {
        if (!(s > double(d) - 1.0 && s <= double(d)))
            throw std::invalid_argument("solveParameters: regular mode needs d-1 < s <= d");
        p.alpha = 1.0 - std::sqrt(6.0) / 3.0;
        p.kappa = p.alpha / (1.0 - p.alpha);
        if (std::abs(2.0 * p.kappa + 3.0 * p.alpha - 1.0) > 1e-12)
            throw std::logic_error("solveParameters: 2 kappa + 3 alpha != 1");
        p.tau = p.alpha * (s - double(d) + 1.0) - 5.0 * epsilon;
        // tau <= 0 leaves the content exponent s - tau usable as long as it
        // stays within (0, d]; reject only epsilon large enough to break that
        if (p.tau < s - double(d))
            throw std::invalid_argument("solveParameters: epsilon too large");
        p.tauWarning = p.tau <= 0.0;
        p.sigma = 0.5 * (s - double(d) + 1.0 - epsilon);
    } else {
        p.alpha = 0.0;
        p.kappa = 1.0 / 6.0;
        p.tau = 1.0 / 6.0 - 5.0 * epsilon;
        if (p.tau < 0.0)
            throw std::invalid_argument("solveParameters: epsilon too large");
        p.tauWarning = p.tau <= 0.0;
        p.sigma = 0.5 * (1.0 - p.tau - epsilon);
    }
    const int rawLevel = int(std::ceil(p.kappa * double(deltaLevel))) - 1;
    p.DeltaLevel = std::max(1, rawLevel);
    if (p.DeltaLevel >= deltaLevel)
        throw std::invalid_argument("solveParameters: deltaLevel too coarse for kappa");
    p.Delta = std::ldexp(1.0, -p.DeltaLevel);
    const double dk = std::pow(p.delta, p.kappa);
    // when the level-1 floor binds, Delta = 1/2 is the coarsest non-trivial
    // scale; accept it even though it sits at or below delta^kappa
    if (rawLevel >= 1 && !(p.Delta > dk && p.Delta <= 2.0 * dk + 1e-15))
        throw std::invalid_argument("solveParameters: no dyadic Delta in (delta^k, 2 delta^k]");
    p.scaleWarning = std::pow(p.delta, epsilon) > 0.5;
    return p;
}

std::vector<Tube> tubeFamily(const Direction& dir, int gammaLevel) {
    const int n = dir.perp.n;
    const double gamma = std::ldexp(1.0, -gammaLevel);
    // projection range of the unit cube onto each perp axis
    int64_t lo[2] = {0, 0}, hi[2] = {0, 0};
    for (int k = 0; k < n; ++k) {
        double plo = 0.0, phi = 0.0;
        for (int j = 0; j < dir.perp.dim; ++j) {
            plo += std::min(dir.perp.axes[size_t(k)][j], 0.0);
            phi += std::max(dir.perp.axes[size_t(k)][j], 0.0);
        }
        lo[k] = int64_t(std::floor(plo / gamma));
        hi[k] = int64_t(std::ceil(phi / gamma)) - 1;
        if (hi[k] < lo[k]) hi[k] = lo[k];
    }
    std::vector<Tube> tubes;
    for (int64_t a = lo[0]; a <= hi[0]; ++a) {
        if (n == 1) {
            tubes.push_back({dir, gammaLevel, {a, 0}});
            continue;
        }
        for (int64_t b = lo[1]; b <= hi[1]; ++b)
            tubes.push_back({dir, gammaLevel, {a, b}});
    }
    return tubes;
}

bool cellMeetsTube(const Vec& center, double cellSize, const Tube& tube) {
    const Vec p = projectPoint(tube.direction.perp, center);
    const double pad = 0.5 * cellSize * std::sqrt(double(tube.direction.perp.dim));
    const double gamma = tube.width();
    for (int k = 0; k < tube.direction.perp.n; ++k) {
        const double lo = double(tube.idx[size_t(k)]) * gamma;
        if (!(lo - pad <= p[k] && p[k] < lo + gamma + pad)) return false;
    }
    return true;
}

DyadicSet visibleCells(const DyadicSet& set, const Direction& dir) {
    if (set.empty()) throw std::domain_error("visibleCells: empty set");
    if (dir.perp.dim != set.dim())
        throw std::invalid_argument("visibleCells: direction dimension mismatch");
    const double delta = set.cellSize();
    const double band = 0.5 * delta;
    const CellData cd = projectCells(set, dir);
    const int n = dir.perp.n;
    std::vector<char> visible(set.size(), 1);
    if (n == 1) {
        // sweep over the sorted projections with a sliding max-height window
        std::vector<size_t> order(set.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](size_t a, size_t b) { return cd.proj[a][0] < cd.proj[b][0]; });
        std::multiset<double> window;
        size_t loPtr = 0, hiPtr = 0;
        for (size_t oi = 0; oi < order.size(); ++oi) {
            const size_t i = order[oi];
            const double p = cd.proj[i][0];
            while (hiPtr < order.size() && cd.proj[order[hiPtr]][0] <= p + band)
                window.insert(cd.height[order[hiPtr++]]);
            while (loPtr < order.size() && cd.proj[order[loPtr]][0] < p - band)
                window.erase(window.find(cd.height[order[loPtr++]]));
            if (!window.empty() && *window.rbegin() > cd.height[i] + band) visible[i] = 0;
        }
    } else {
        // bucket grid of width band; occluders live in neighboring buckets
        std::unordered_map<std::array<int64_t, 2>, std::vector<size_t>, IdxHash> buckets;
        auto key = [&](const Vec& p) {
            return std::array<int64_t, 2>{int64_t(std::floor(p[0] / band)),
                                          int64_t(std::floor(p[1] / band))};
        };
        for (size_t i = 0; i < set.size(); ++i) buckets[key(cd.proj[i])].push_back(i);
        for (auto& [k, list] : buckets)
            std::sort(list.begin(), list.end(),
                      [&](size_t a, size_t b) { return cd.height[a] > cd.height[b]; });
        for (size_t i = 0; i < set.size(); ++i) {
            const auto k = key(cd.proj[i]);
            bool occluded = false;
            for (int64_t da = -1; da <= 1 && !occluded; ++da)
                for (int64_t db = -1; db <= 1 && !occluded; ++db) {
                    const auto it = buckets.find({k[0] + da, k[1] + db});
                    if (it == buckets.end()) continue;
                    for (size_t j : it->second) {
                        if (cd.height[j] <= cd.height[i] + band) break;
                        if (std::abs(cd.proj[j][0] - cd.proj[i][0]) <= band &&
                            std::abs(cd.proj[j][1] - cd.proj[i][1]) <= band) {
                            occluded = true;
                            break;
                        }
                    }
                }
            if (occluded) visible[i] = 0;
        }
    }
    std::vector<uint64_t> codes;
    for (size_t i = 0; i < set.size(); ++i)
        if (visible[i]) codes.push_back(set.codes()[i]);
    return DyadicSet(set.dim(), set.depth(), std::move(codes));
}

namespace {

uint64_t countTubeCovering(const Tube& tube, const DyadicSet& set, int coverLevel) {
    const double h = set.cellSize();
    std::set<uint64_t> prefixes;
    for (size_t i = 0; i < set.size(); ++i) {
        if (!cellMeetsTube(set.cellCenter(i), h, tube)) continue;
        prefixes.insert(set.codes()[i] >> (set.dim() * (set.depth() - coverLevel)));
    }
    return prefixes.size();
}

uint64_t countTubeCellsInCube(const Tube& tube, const DyadicSet& set,
                              const DyadicCube& q) {
    const double h = set.cellSize();
    const int shift = set.dim() * (set.depth() - q.level);
    const uint64_t qcode = mortonEncode(set.dim(), q.level, q.coords);
    uint64_t count = 0;
    for (size_t i = 0; i < set.size(); ++i) {
        if ((set.codes()[i] >> shift) != qcode) continue;
        if (cellMeetsTube(set.cellCenter(i), h, tube)) ++count;
    }
    return count;
}

double lightThreshold(const Params& p) {
    return p.mode == Mode::regular
               ? std::pow(p.delta, -(p.s - double(p.d) + 1.0) + p.tau + p.epsilon)
               : std::pow(p.delta, -1.0 + p.tau + p.epsilon);
}

double heavyThreshold(const Params& p, double gamma) {
    return std::pow(p.delta, -2.0 * p.epsilon) *
           std::pow(gamma, -(p.s - double(p.d) + 1.0));
}

double heavyInQThreshold(const Params& p) {
    return std::pow(p.delta, (p.kappa - 1.0) * (p.s - double(p.d) + 1.0) -
                                 p.kappa * p.tau - 4.0 * p.epsilon);
}

double substantialThreshold(const Params& p) {
    return p.mode == Mode::regular
               ? std::pow(p.delta, (p.kappa - 1.0) * (p.s - double(p.d) + 1.0) + p.tau +
                                       4.0 * p.epsilon)
               : std::pow(p.delta, p.tau + p.kappa - 1.0 + 2.0 * p.epsilon);
}

}  // namespace

bool classifyTube(const Tube& tube, const DyadicSet& set, const Params& params,
                  TubeKind kind, const DyadicCube* Q) {
    if ((kind == TubeKind::heavyInQ || kind == TubeKind::substantial) && Q == nullptr)
        throw std::invalid_argument("classifyTube: cube required for this kind");
    if (kind != TubeKind::heavy && tube.level != params.deltaLevel)
        throw std::invalid_argument("classifyTube: this kind expects a delta tube");
    switch (kind) {
        case TubeKind::light:
            return double(countTubeCovering(tube, set, set.depth())) <=
                   lightThreshold(params);
        case TubeKind::heavy:
            return double(countTubeCovering(tube, set, tube.level)) >=
                   heavyThreshold(params, tube.width());
        case TubeKind::heavyInQ:
            if (params.mode != Mode::regular)
                throw std::invalid_argument("classifyTube: heavyInQ is regular-mode only");
            return double(countTubeCellsInCube(tube, set, *Q)) >=
                   heavyInQThreshold(params);
        case TubeKind::substantial:
            return double(countTubeCellsInCube(tube, set, *Q)) >=
                   substantialThreshold(params);
    }
    return false;
}

namespace {

// Cells of set with center in the halo cube (3Q for regular, Q for general),
// half-open box clipped to the unit cube.
bool centerInHalo(const Vec& c, const DyadicCube& q, int halo) {
    const double pad = halo == 3 ? q.side() : 0.0;
    for (int k = 0; k < q.dim; ++k) {
        const double lo = std::max(0.0, q.lo(k) - pad);
        const double hi = std::min(1.0, q.hi(k) + pad);
        if (c[k] < lo || c[k] >= hi) return false;
    }
    return true;
}

}  // namespace

std::vector<Tube> badLines(const DyadicSet& set, const Direction& dir,
                           const Params& params, const DyadicCube& Q) {
    if (Q.level != params.DeltaLevel)
        throw std::invalid_argument("badLines: cube must have the Delta sidelength");
    const int halo = params.mode == Mode::regular ? 3 : 1;
    const double gamma = params.delta;
    const CellData cd = projectCells(set, dir);
    const int n = dir.perp.n;
    // counting set for substantiality: non-light cells in general mode
    std::vector<char> counted(set.size(), 1);
    if (params.mode == Mode::general) {
        const DiscreteMeasure mu =
            frostmanDyadic(set, double(params.d) - params.tau);
        const double lightCube = std::pow(params.delta, double(params.d) + params.epsilon);
        for (size_t i = 0; i < set.size(); ++i)
            if (mu.weights[i] <= lightCube) counted[i] = 0;
    }
    const double pad = 0.5 * set.cellSize() * std::sqrt(double(set.dim()));
    const int shift = set.dim() * (set.depth() - Q.level);
    const uint64_t qcode = mortonEncode(set.dim(), Q.level, Q.coords);
    std::unordered_map<std::array<int64_t, 2>, uint64_t, IdxHash> counts;
    std::unordered_map<std::array<int64_t, 2>, char, IdxHash> coreHit;
    std::vector<std::array<int64_t, 2>> idxs;
    for (size_t i = 0; i < set.size(); ++i) {
        if (counted[i] && (set.codes()[i] >> shift) == qcode) {
            tubeIndicesForPoint(cd.proj[i], n, gamma, pad, idxs);
            for (const auto& t : idxs) ++counts[t];
        }
        if (centerInHalo(cd.centers[i], Q, halo)) {
            tubeIndicesForPoint(cd.proj[i], n, gamma, 0.0, idxs);
            for (const auto& t : idxs) coreHit[t] = 1;
        }
    }
    const double threshold = substantialThreshold(params);
    std::vector<Tube> bad;
    std::vector<std::array<int64_t, 2>> keys;
    for (const auto& [t, c] : counts)
        if (double(c) >= threshold && !coreHit.count(t)) keys.push_back(t);
    std::sort(keys.begin(), keys.end());
    for (const auto& t : keys) bad.push_back({dir, params.deltaLevel, t});
    return bad;
}

DecompositionReport decompose(const DyadicSet& set, const Direction& dir,
                              const Params& params) {
    if (set.depth() != params.deltaLevel)
        throw std::invalid_argument("decompose: set depth must equal deltaLevel");
    if (set.dim() != params.d)
        throw std::invalid_argument("decompose: set dimension must equal params d");
    if (set.empty()) throw std::domain_error("decompose: empty set");
    DecompositionReport rep;
    rep.params = params;
    rep.theta = dir.unit;
    const int n = dir.perp.n;
    const double delta = params.delta;
    const double pad = 0.5 * delta * std::sqrt(double(set.dim()));
    const CellData cd = projectCells(set, dir);
    const size_t N = set.size();

    // cells of the counting family: all cells (regular) or non-light cells
    std::vector<char> counted(N, 1);
    std::vector<char> lightCubeCell(N, 0);
    if (params.mode == Mode::general) {
        const DiscreteMeasure mu = frostmanDyadic(set, double(params.d) - params.tau);
        const double lc = std::pow(delta, double(params.d) + params.epsilon);
        for (size_t i = 0; i < N; ++i)
            if (mu.weights[i] <= lc) {
                counted[i] = 0;
                lightCubeCell[i] = 1;
            }
    }

    // delta-tube incidence
    std::vector<std::array<int64_t, 2>> idxs;
    std::unordered_map<std::array<int64_t, 2>, std::vector<uint32_t>, IdxHash> tubeCells;
    std::vector<std::vector<std::array<int64_t, 2>>> cellTubes(N);
    for (size_t i = 0; i < N; ++i) {
        tubeIndicesForPoint(cd.proj[i], n, delta, pad, idxs);
        cellTubes[i] = idxs;
        for (const auto& t : idxs) tubeCells[t].push_back(uint32_t(i));
    }
    rep.stats.tubes = tubeFamily(dir, params.deltaLevel).size();

    // light tubes
    const double lightThr = lightThreshold(params);
    std::unordered_map<std::array<int64_t, 2>, char, IdxHash> lightTube;
    for (const auto& [t, cells] : tubeCells) {
        uint64_t c = 0;
        for (uint32_t i : cells) c += counted[i];
        if (double(c) <= lightThr) lightTube[t] = 1;
    }
    rep.stats.lightTubes = lightTube.size();

    // heavy tubes at widths delta .. Delta (regular mode only)
    std::vector<char> inHeavy(N, 0);
    std::vector<std::unordered_map<std::array<int64_t, 2>, char, IdxHash>> heavyByLevel;
    if (params.mode == Mode::regular) {
        heavyByLevel.resize(size_t(params.deltaLevel - params.DeltaLevel + 1));
        std::vector<uint64_t> scratch;
        for (int g = params.DeltaLevel; g <= params.deltaLevel; ++g) {
            const double gamma = std::ldexp(1.0, -g);
            const double thr = heavyThreshold(params, gamma);
            std::unordered_map<std::array<int64_t, 2>, std::vector<uint32_t>, IdxHash>
                members;
            const int shift = set.dim() * (set.depth() - g);
            if (g == params.deltaLevel) {
                members = tubeCells;
            } else {
                for (size_t i = 0; i < N; ++i) {
                    tubeIndicesForPoint(cd.proj[i], n, gamma, pad, idxs);
                    for (const auto& t : idxs) members[t].push_back(uint32_t(i));
                }
            }
            auto& heavySet = heavyByLevel[size_t(g - params.DeltaLevel)];
            for (const auto& [t, cells] : members) {
                scratch.clear();
                for (uint32_t i : cells) scratch.push_back(set.codes()[i] >> shift);
                std::sort(scratch.begin(), scratch.end());
                const auto distinct =
                    std::unique(scratch.begin(), scratch.end()) - scratch.begin();
                if (double(distinct) >= thr) {
                    heavySet[t] = 1;
                    for (uint32_t i : cells) inHeavy[i] = 1;
                }
            }
            rep.stats.heavyTubes += heavySet.size();
        }
    }

    // per (Delta-cube, delta-tube) counts over the counting family
    const int qshift = set.dim() * (set.depth() - params.DeltaLevel);
    std::unordered_map<PairKey, uint32_t, PairKeyHash> pairCounts;
    for (size_t i = 0; i < N; ++i) {
        if (!counted[i]) continue;
        const uint64_t q = set.codes()[i] >> qshift;
        for (const auto& t : cellTubes[i]) ++pairCounts[{q, t}];
    }

    // Q_H: cells of 3Q meeting a tube heavy inside Q
    std::vector<char> inQH(N, 0);
    if (params.mode == Mode::regular) {
        const double hiqThr = heavyInQThreshold(params);
        std::unordered_map<std::array<int64_t, 2>, std::vector<uint64_t>, IdxHash>
            heavyInQ;
        for (const auto& [key, c] : pairCounts)
            if (double(c) >= hiqThr) {
                heavyInQ[key.t].push_back(key.q);
                ++rep.stats.heavyInQPairs;
            }
        for (auto& [t, qs] : heavyInQ) std::sort(qs.begin(), qs.end());
        for (const auto& [t, qs] : heavyInQ) {
            const auto it = tubeCells.find(t);
            if (it == tubeCells.end()) continue;
            for (uint64_t q : qs) {
                DyadicCube qc{set.dim(), params.DeltaLevel,
                              mortonDecode(set.dim(), params.DeltaLevel, q)};
                for (uint32_t i : it->second)
                    if (!inQH[i] && centerInHalo(cd.centers[i], qc, 3)) inQH[i] = 1;
            }
        }
    }

    // substantial pairs, bad tubes
    const double substThr = substantialThreshold(params);
    const int halo = params.mode == Mode::regular ? 3 : 1;
    std::unordered_map<std::array<int64_t, 2>, std::vector<uint64_t>, IdxHash> substOfTube;
    for (const auto& [key, c] : pairCounts)
        if (double(c) >= substThr) {
            substOfTube[key.t].push_back(key.q);
            ++rep.stats.substantialPairs;
        }
    for (auto& [t, qs] : substOfTube) std::sort(qs.begin(), qs.end());
    // tube core incidence against the halo of each substantial cube
    std::vector<char> inBad(N, 0);
    for (const auto& [t, qs] : substOfTube) {
        bool isBad = false;
        for (uint64_t q : qs) {
            DyadicCube qc{set.dim(), params.DeltaLevel,
                          mortonDecode(set.dim(), params.DeltaLevel, q)};
            bool hit = false;
            const auto it = tubeCells.find(t);
            if (it != tubeCells.end()) {
                for (uint32_t i : it->second) {
                    if (!pointInTubeCore(cd.proj[i], n, delta, t)) continue;
                    if (centerInHalo(cd.centers[i], qc, halo)) {
                        hit = true;
                        break;
                    }
                }
            }
            // the line (tube core) is bad for this cube: substantial yet
            // missing the set near Q
            if (!hit) {
                isBad = true;
                break;
            }
        }
        if (!isBad) continue;
        ++rep.stats.badTubes;
        const auto it = tubeCells.find(t);
        if (it != tubeCells.end())
            for (uint32_t i : it->second) inBad[i] = 1;
    }

    // raw light part
    std::vector<char> inLight(N, 0);
    for (size_t i = 0; i < N; ++i) {
        if (params.mode == Mode::general && lightCubeCell[i]) {
            inLight[i] = 1;
            continue;
        }
        for (const auto& t : cellTubes[i])
            if (lightTube.count(t)) {
                inLight[i] = 1;
                break;
            }
    }

    // partition with precedence H > L > B > G
    std::vector<uint64_t> ehc, elc, ebc, egc;
    for (size_t i = 0; i < N; ++i) {
        const uint64_t code = set.codes()[i];
        if (inHeavy[i] || inQH[i]) ehc.push_back(code);
        else if (inLight[i]) elc.push_back(code);
        else if (inBad[i]) ebc.push_back(code);
        else egc.push_back(code);
    }
    rep.eh = DyadicSet(set.dim(), set.depth(), std::move(ehc));
    rep.el = DyadicSet(set.dim(), set.depth(), std::move(elc));
    rep.eb = DyadicSet(set.dim(), set.depth(), std::move(ebc));
    rep.eg = DyadicSet(set.dim(), set.depth(), std::move(egc));

    // trichotomy around the theta-highest substantial cube, per non-light
    // tube not inside a heavy tube
    std::vector<uint64_t> dDelta;  // occupied Delta-cubes
    {
        uint64_t prev = ~uint64_t(0);
        for (uint64_t code : set.codes()) {
            const uint64_t q = code >> qshift;
            if (q != prev) dDelta.push_back(prev = q);
        }
    }
    const double Delta = params.Delta;
    auto haloRange = [&](uint64_t q) {
        const auto coords = mortonDecode(set.dim(), params.DeltaLevel, q);
        Vec lo(set.dim(), 0.0), hi(set.dim(), 0.0);
        const double padQ = halo == 3 ? Delta : 0.0;
        for (int k = 0; k < set.dim(); ++k) {
            lo[k] = double(coords[size_t(k)]) * Delta - padQ;
            hi[k] = double(coords[size_t(k)] + 1) * Delta + padQ;
        }
        return heightRange(dir.unit, lo, hi);
    };
    for (const auto& [t, cells] : tubeCells) {
        if (lightTube.count(t)) continue;
        bool heavyContained = false;
        for (int g = params.DeltaLevel; g <= params.deltaLevel && !heavyContained; ++g) {
            if (heavyByLevel.empty()) break;
            const auto& hs = heavyByLevel[size_t(g - params.DeltaLevel)];
            if (hs.count(tubeAncestor(t, params.deltaLevel - g))) heavyContained = true;
        }
        if (heavyContained) continue;
        const auto sit = substOfTube.find(t);
        if (sit == substOfTube.end() || sit->second.empty()) {
            ++rep.stats.tubesMissingSubstantialQ;
            continue;
        }
        // Q_T: maximize inf over the halo cube, ties broken by code order
        uint64_t qt = sit->second.front();
        double bestInf = haloRange(qt).first;
        for (uint64_t q : sit->second) {
            const double inf = haloRange(q).first;
            if (inf > bestInf + 1e-15) {
                bestInf = inf;
                qt = q;
            }
        }
        uint64_t less = 0, equal = 0, greater = 0;
        for (uint64_t q : dDelta) {
            const auto coords = mortonDecode(set.dim(), params.DeltaLevel, q);
            Vec lo(set.dim(), 0.0), hi(set.dim(), 0.0);
            for (int k = 0; k < set.dim(); ++k) {
                lo[k] = double(coords[size_t(k)]) * Delta;
                hi[k] = double(coords[size_t(k)] + 1) * Delta;
            }
            if (!cubeMeetsTube(dir.perp, lo, hi, delta, t)) continue;
            const auto [inf, sup] = haloRange(q);
            if (sup < bestInf) ++less;
            else if (inf > bestInf) ++greater;
            else ++equal;
        }
        rep.stats.dLess += less;
        rep.stats.dEqual += equal;
        rep.stats.dGreater += greater;
        rep.stats.maxEqualFamily = std::max(rep.stats.maxEqualFamily, equal);
    }

    // contents at the mode's exponent
    const double exponent = params.mode == Mode::regular ? params.s - params.tau
                                                         : double(params.d) - params.tau;
    auto content = [&](const DyadicSet& part) {
        return part.empty() ? 0.0 : dyadicContent(part, exponent);
    };
    rep.contentEh = content(rep.eh);
    rep.contentEl = content(rep.el);
    rep.contentEb = content(rep.eb);
    rep.contentEg = content(rep.eg);
    const DyadicSet vis = visibleCells(set, dir);
    rep.contentVis = content(vis);
    std::vector<uint64_t> egVis;
    std::set_intersection(rep.eg.codes().begin(), rep.eg.codes().end(),
                          vis.codes().begin(), vis.codes().end(),
                          std::back_inserter(egVis));
    DyadicSet egVisSet(set.dim(), set.depth(), std::move(egVis));
    rep.contentEgVis = content(egVisSet);
    return rep;
}

GoodCoveringCheck goodPartCoveringCheck(const DecompositionReport& report,
                                        const DyadicSet& set, const Direction& dir,
                                        const Params& params) {
    GoodCoveringCheck out;
    const DyadicSet vis = visibleCells(set, dir);
    std::vector<uint64_t> inter;
    std::set_intersection(report.eg.codes().begin(), report.eg.codes().end(),
                          vis.codes().begin(), vis.codes().end(),
                          std::back_inserter(inter));
    const DyadicSet goodVis(set.dim(), set.depth(), std::move(inter));
    const double sd1 = params.s - double(params.d) + 1.0;
    if (params.mode == Mode::regular)
        out.bound = std::max(
            std::pow(params.delta, (params.alpha - 1.0) * sd1 - 3.0 * params.epsilon),
            std::pow(params.delta, (params.kappa - 1.0 - params.kappa * params.alpha) * sd1 -
                                       4.0 * params.epsilon));
    else
        out.bound = std::max(std::pow(params.delta, params.tau - 1.0 + 2.0 * params.epsilon),
                             std::pow(params.delta, params.kappa - 1.0));
    if (goodVis.empty()) return out;
    const double pad = 0.5 * params.delta * std::sqrt(double(set.dim()));
    std::unordered_map<std::array<int64_t, 2>, uint64_t, IdxHash> counts;
    std::vector<std::array<int64_t, 2>> idxs;
    for (size_t i = 0; i < goodVis.size(); ++i) {
        const Vec p = projectPoint(dir.perp, goodVis.cellCenter(i));
        tubeIndicesForPoint(p, dir.perp.n, params.delta, pad, idxs);
        for (const auto& t : idxs) ++counts[t];
    }
    for (const auto& [t, c] : counts) out.maxCount = std::max(out.maxCount, c);
    out.maxRatio = double(out.maxCount) / out.bound;
    return out;
}

HeavyPartsReport maximalHeavyParts(const DyadicSet& set, const DiscreteMeasure& mu,
                                   const Direction& dir, const Params& params) {
    if (params.mode != Mode::regular)
        throw std::invalid_argument("maximalHeavyParts: regular mode only");
    if (set.depth() != params.deltaLevel)
        throw std::invalid_argument("maximalHeavyParts: set depth must equal deltaLevel");
    HeavyPartsReport rep;
    const CellData cd = projectCells(set, dir);
    const int n = dir.perp.n;
    const double pad = 0.5 * set.cellSize() * std::sqrt(double(set.dim()));
    const size_t N = set.size();
    std::vector<std::array<int64_t, 2>> idxs;

    // tube-counting heavy parts (widths delta..Delta)
    std::vector<char> inHeavy(N, 0);
    std::vector<uint64_t> scratch;
    for (int g = params.DeltaLevel; g <= params.deltaLevel; ++g) {
        const double gamma = std::ldexp(1.0, -g);
        const double thr = heavyThreshold(params, gamma);
        std::unordered_map<std::array<int64_t, 2>, std::vector<uint32_t>, IdxHash> members;
        const int shift = set.dim() * (set.depth() - g);
        for (size_t i = 0; i < N; ++i) {
            tubeIndicesForPoint(cd.proj[i], n, gamma, pad, idxs);
            for (const auto& t : idxs) members[t].push_back(uint32_t(i));
        }
        for (const auto& [t, cells] : members) {
            scratch.clear();
            for (uint32_t i : cells) scratch.push_back(set.codes()[i] >> shift);
            std::sort(scratch.begin(), scratch.end());
            const auto distinct =
                std::unique(scratch.begin(), scratch.end()) - scratch.begin();
            if (double(distinct) >= thr)
                for (uint32_t i : cells) inHeavy[i] = 1;
        }
    }
    const int qshift = set.dim() * (set.depth() - params.DeltaLevel);
    std::unordered_map<PairKey, uint32_t, PairKeyHash> pairCounts;
    std::unordered_map<std::array<int64_t, 2>, std::vector<uint32_t>, IdxHash> tubeCells;
    std::vector<std::vector<std::array<int64_t, 2>>> cellTubes(N);
    for (size_t i = 0; i < N; ++i) {
        tubeIndicesForPoint(cd.proj[i], n, params.delta, pad, idxs);
        cellTubes[i] = idxs;
        for (const auto& t : idxs) {
            tubeCells[t].push_back(uint32_t(i));
            ++pairCounts[{set.codes()[i] >> qshift, t}];
        }
    }
    std::vector<char> inQH(N, 0);
    const double hiqThr = heavyInQThreshold(params);
    for (const auto& [key, c] : pairCounts) {
        if (double(c) < hiqThr) continue;
        DyadicCube qc{set.dim(), params.DeltaLevel,
                      mortonDecode(set.dim(), params.DeltaLevel, key.q)};
        for (uint32_t i : tubeCells[key.t])
            if (!inQH[i] && centerInHalo(cd.centers[i], qc, 3)) inQH[i] = 1;
    }
    std::vector<uint64_t> ehp, qhu;
    for (size_t i = 0; i < N; ++i) {
        if (inHeavy[i]) ehp.push_back(set.codes()[i]);
        if (inQH[i]) qhu.push_back(set.codes()[i]);
    }
    rep.ehPrime = DyadicSet(set.dim(), set.depth(), std::move(ehp));
    rep.qhUnion = DyadicSet(set.dim(), set.depth(), std::move(qhu));

    // maximal-function versions
    const ProjectedMeasure muTheta = project(mu, dir.perp);
    const double thrE = std::pow(params.delta, -params.epsilon);
    const double thrQ =
        std::pow(params.delta, params.kappa * (params.s - double(params.d) + 1.0) -
                                   params.kappa * params.tau - 3.0 * params.epsilon);
    std::vector<double> mVal(N, 0.0);
    {
        std::map<std::array<int64_t, 2>, double> cache;
        for (size_t i = 0; i < N; ++i) {
            std::array<int64_t, 2> b{0, 0};
            for (int k = 0; k < n; ++k)
                b[size_t(k)] = int64_t(std::floor(cd.proj[i][k] / muTheta.binWidth));
            auto it = cache.find(b);
            if (it == cache.end())
                it = cache.emplace(b, maximalFunctionAt(muTheta, muTheta.binCenter(b)).value)
                         .first;
            mVal[i] = it->second;
        }
    }
    std::vector<uint64_t> eht;
    for (size_t i = 0; i < N; ++i)
        if (mVal[i] >= thrE) eht.push_back(set.codes()[i]);
    rep.ehTilde = DyadicSet(set.dim(), set.depth(), std::move(eht));
    for (size_t i = 0; i < N; ++i)
        if (rep.ehPrime.contains(set.cellCoords(i)) && mVal[i] > 0.0)
            rep.slackEh = std::max(rep.slackEh, thrE / mVal[i]);

    std::vector<uint64_t> qht;
    std::vector<uint64_t> dDelta;
    {
        uint64_t prev = ~uint64_t(0);
        for (uint64_t code : set.codes()) {
            const uint64_t q = code >> qshift;
            if (q != prev) dDelta.push_back(prev = q);
        }
    }
    std::vector<char> inQHT(N, 0);
    for (uint64_t q : dDelta) {
        DyadicCube qc{set.dim(), params.DeltaLevel,
                      mortonDecode(set.dim(), params.DeltaLevel, q)};
        const DiscreteMeasure muQ = restrict(mu, qc, 3);
        if (muQ.totalMass <= 0.0) continue;
        const ProjectedMeasure muQTheta = project(muQ, dir.perp);
        std::map<std::array<int64_t, 2>, double> cache;
        for (size_t i = 0; i < N; ++i) {
            if (!centerInHalo(cd.centers[i], qc, 3)) continue;
            std::array<int64_t, 2> b{0, 0};
            for (int k = 0; k < n; ++k)
                b[size_t(k)] = int64_t(std::floor(cd.proj[i][k] / muQTheta.binWidth));
            auto it = cache.find(b);
            if (it == cache.end())
                it = cache
                         .emplace(b,
                                  maximalFunctionAt(muQTheta, muQTheta.binCenter(b)).value)
                         .first;
            if (it->second >= thrQ && !inQHT[i]) inQHT[i] = 1;
            if (rep.qhUnion.contains(set.cellCoords(i)) && it->second > 0.0)
                rep.slackQh = std::max(rep.slackQh, thrQ / it->second);
        }
    }
    for (size_t i = 0; i < N; ++i)
        if (inQHT[i]) qht.push_back(set.codes()[i]);
    rep.qhTilde = DyadicSet(set.dim(), set.depth(), std::move(qht));

    if (!rep.ehPrime.empty())
        rep.contentEhPrime =
            dyadicContent(rep.ehPrime, double(params.d) - 1.0 + 2.0 * params.epsilon);
    std::vector<uint64_t> unionCodes;
    std::set_union(rep.ehPrime.codes().begin(), rep.ehPrime.codes().end(),
                   rep.qhUnion.codes().begin(), rep.qhUnion.codes().end(),
                   std::back_inserter(unionCodes));
    DyadicSet ehAll(set.dim(), set.depth(), std::move(unionCodes));
    if (!ehAll.empty()) rep.contentEhStau = dyadicContent(ehAll, params.s - params.tau);
    const int cutoff = std::max(1, 1 << (set.depth() - 1));
    rep.sobolevMuTheta = sobolevNorm(transform(muTheta, cutoff), params.sigma,
                                     SobolevKind::inhomogeneous);
    return rep;
}

std::vector<Direction> sampleDirections(int d, int count, uint64_t seed) {
    if (count < 1) throw std::invalid_argument("sampleDirections: count must be >= 1");
    SplitMix64 rng(seed);
    std::vector<Direction> dirs;
    for (int i = 0; i < count; ++i) {
        if (d == 2) {
            dirs.push_back(Direction::fromAngle(kTwoPi * rng.uniform()));
        } else if (d == 3) {
            const double z = 2.0 * rng.uniform() - 1.0;
            const double phi = kTwoPi * rng.uniform();
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            dirs.push_back(
                Direction::fromVector(Vec(3, r * std::cos(phi), r * std::sin(phi), z)));
        } else {
            throw std::invalid_argument("sampleDirections: d must be 2 or 3");
        }
    }
    return dirs;
}

ExperimentTable directionAverageExperiment(
    const std::function<DyadicSet(int depth)>& setAt, double s, double epsilon,
    Mode mode, int directions, uint64_t seed, const std::vector<int>& levels,
    int jobs) {
    ExperimentTable table;
    table.levels = levels;
    if (jobs < 1) jobs = 1;
    for (int level : levels) {
        const DyadicSet set = setAt(level);
        const Params params = solveParameters(s, set.dim(), epsilon, mode, level);
        const std::vector<Direction> dirs = sampleDirections(set.dim(), directions, seed);
        std::vector<ExperimentRow> rows(static_cast<size_t>(directions));
        auto worker = [&](int begin, int end) {
            for (int i = begin; i < end; ++i) {
                const DecompositionReport rep = decompose(set, dirs[size_t(i)], params);
                ExperimentRow& row = rows[size_t(i)];
                row.deltaLevel = level;
                row.dirIndex = i;
                row.theta = dirs[size_t(i)].unit;
                row.visContent = rep.contentVis;
                row.eh = rep.contentEh;
                row.el = rep.contentEl;
                row.eb = rep.contentEb;
                row.egVis = rep.contentEgVis;
            }
        };
        if (jobs == 1) {
            worker(0, directions);
        } else {
            std::vector<std::thread> pool;
            const int per = (directions + jobs - 1) / jobs;
            for (int j = 0; j < jobs; ++j) {
                const int begin = j * per, end = std::min(directions, begin + per);
                if (begin >= end) break;
                pool.emplace_back(worker, begin, end);
            }
            for (auto& th : pool) th.join();
        }
        double sum = 0.0;
        for (const auto& row : rows) sum += row.visContent;
        table.average.push_back(sum / double(directions));
        for (auto& row : rows) table.rows.push_back(std::move(row));
    }
    return table;
}

std::string writeExperimentCsv(const ExperimentTable& table) {
    std::ostringstream out;
    out.precision(17);
    out << "delta,direction,visContent,EH,EL,EB,EGvis\n";
    for (const auto& r : table.rows)
        out << std::ldexp(1.0, -r.deltaLevel) << "," << r.dirIndex << "," << r.visContent
            << "," << r.eh << "," << r.el << "," << r.eb << "," << r.egVis << "\n";
    return out.str();
}

}  // namespace visifrac
