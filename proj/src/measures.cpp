#include "visifrac/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace visifrac {

DiscreteMeasure DiscreteMeasure::fromWeights(DyadicSet set, std::vector<double> w) {
    if (w.size() != set.size())
        throw std::invalid_argument("measure: weight count must match cell count");
    for (double x : w)
        if (!(x >= 0.0)) throw std::invalid_argument("measure: negative weight");
    DiscreteMeasure m{std::move(set), std::move(w), 0.0};
    m.totalMass = std::accumulate(m.weights.begin(), m.weights.end(), 0.0);
    return m;
}

DiscreteMeasure naturalMeasure(const DyadicSet& set, double s) {
    if (set.empty()) throw std::domain_error("naturalMeasure: empty set");
    const double w = std::pow(set.cellSize(), s);
    return DiscreteMeasure::fromWeights(set, std::vector<double>(set.size(), w));
}

namespace {

// distribute the node's mass down the tree proportionally to child contents
void distributeMass(std::span<const uint64_t> codes, size_t base, int level, int depth,
                    int dim, double t, double mass, std::vector<double>& out) {
    if (codes.empty() || mass <= 0.0) return;
    if (level == depth) {
        out[base] = mass;
        return;
    }
    const int shift = dim * (depth - level - 1);
    struct Child {
        size_t begin, end;
        double content;
    };
    std::vector<Child> children;
    double total = 0.0;
    size_t i = 0;
    while (i < codes.size()) {
        const uint64_t key = codes[i] >> shift;
        size_t j = i + 1;
        while (j < codes.size() && (codes[j] >> shift) == key) ++j;
        const double c =
            detail::contentRange(codes.subspan(i, j - i), level + 1, depth, dim, t);
        children.push_back({i, j, c});
        total += c;
        i = j;
    }
    if (total <= 0.0) return;
    for (const auto& ch : children)
        distributeMass(codes.subspan(ch.begin, ch.end - ch.begin), base + ch.begin,
                       level + 1, depth, dim, t, mass * ch.content / total, out);
}

}  // namespace

DiscreteMeasure frostmanDyadic(const DyadicSet& set, double t) {
    if (!(t > 0.0 && t <= double(set.dim())))
        throw std::invalid_argument("frostman exponent must lie in (0, d]");
    std::vector<double> w(set.size(), 0.0);
    if (!set.empty()) {
        const double rootMass = dyadicContent(set, t);
        distributeMass(std::span(set.codes()), 0, 0, set.depth(), set.dim(), t, rootMass,
                       w);
    }
    return DiscreteMeasure::fromWeights(set, std::move(w));
}

namespace {

struct FrostmanScan {
    const DyadicSet* set;
    const std::vector<double>* weights;
    double t;
    double cLow = 1e300;
    double cHigh = 0.0;

    // returns nu of the subtree; updates the two-sided bounds per node
    double scan(std::span<const uint64_t> codes, size_t base, int level) {
        double mass = 0.0;
        if (level == set->depth()) {
            mass = (*weights)[base];
        } else {
            const int shift = set->dim() * (set->depth() - level - 1);
            size_t i = 0;
            while (i < codes.size()) {
                const uint64_t key = codes[i] >> shift;
                size_t j = i + 1;
                while (j < codes.size() && (codes[j] >> shift) == key) ++j;
                mass += scan(codes.subspan(i, j - i), base + i, level + 1);
                i = j;
            }
        }
        const double side = std::ldexp(1.0, -level);
        if (mass > 0.0) cHigh = std::max(cHigh, mass / std::pow(side, t));
        const double content =
            detail::contentRange(codes, level, set->depth(), set->dim(), t);
        const double lower = std::min(content, std::pow(side, set->dim()));
        if (lower > 0.0) cLow = std::min(cLow, mass / lower);
        return mass;
    }
};

}  // namespace

FrostmanReport frostmanWithLowerBound(const DyadicSet& set, double t) {
    FrostmanReport rep;
    rep.measure = frostmanDyadic(set, t);
    if (set.empty()) return rep;
    FrostmanScan s{&set, &rep.measure.weights, t};
    s.scan(std::span(set.codes()), 0, 0);
    rep.lowerConstant = s.cLow;
    rep.upperConstant = s.cHigh;
    return rep;
}

DiscreteMeasure restrict(const DiscreteMeasure& m, const DyadicCube& cube, int halo) {
    if (halo != 1 && halo != 3) throw std::invalid_argument("restrict: halo must be 1 or 3");
    if (cube.level > m.support.depth())
        throw std::invalid_argument("restrict: cube finer than the measure");
    const int d = m.support.dim();
    double lo[3], hi[3];
    for (int i = 0; i < d; ++i) {
        const double pad = halo == 3 ? cube.side() : 0.0;
        lo[i] = std::max(0.0, cube.lo(i) - pad);
        hi[i] = std::min(1.0, cube.hi(i) + pad);
    }
    std::vector<double> w(m.weights);
    for (size_t i = 0; i < m.support.size(); ++i) {
        const Vec c = m.support.cellCenter(i);
        for (int k = 0; k < d; ++k)
            if (c[k] < lo[k] || c[k] >= hi[k]) {
                w[i] = 0.0;
                break;
            }
    }
    return DiscreteMeasure::fromWeights(m.support, std::move(w));
}

ProjectedMeasure project(const DiscreteMeasure& m, const Frame& frame) {
    frame.validate();
    if (frame.dim != m.support.dim())
        throw std::invalid_argument("project: frame dimension mismatch");
    ProjectedMeasure pm;
    pm.frame = frame;
    pm.binWidth = m.support.cellSize();
    for (size_t i = 0; i < m.support.size(); ++i) {
        if (m.weights[i] == 0.0) continue;
        const Vec p = projectPoint(frame, m.support.cellCenter(i));
        std::array<int64_t, 2> idx{0, 0};
        for (int k = 0; k < frame.n; ++k)
            idx[size_t(k)] = int64_t(std::floor(p[k] / pm.binWidth));
        pm.bins[idx] += m.weights[i];
    }
    pm.totalMass = 0.0;
    for (const auto& [idx, w] : pm.bins) pm.totalMass += w;
    return pm;
}

MaximalValue maximalFunctionAt(const ProjectedMeasure& pm, const Vec& x) {
    MaximalValue out;
    if (pm.bins.empty()) {
        out.farOutside = true;
        return out;
    }
    // sort the atoms by distance once, then scan the radius lattice with a
    // prefix sum
    std::vector<std::pair<double, double>> atoms;
    atoms.reserve(pm.bins.size());
    for (const auto& [idx, w] : pm.bins) atoms.push_back({dist(pm.binCenter(idx), x), w});
    std::sort(atoms.begin(), atoms.end());
    const int n = pm.frame.n;
    double best = 0.0;
    bool reachedAny = false;
    for (double r = pm.binWidth; r <= 2.0; r *= 2.0) {
        double mass = 0.0;
        for (const auto& [dd, w] : atoms) {
            if (dd > r) break;
            mass += w;
        }
        if (mass > 0.0) reachedAny = true;
        best = std::max(best, mass / std::pow(r, n));
    }
    out.value = best;
    out.farOutside = !reachedAny;
    return out;
}

std::vector<MaximalValue> maximalFunction(const ProjectedMeasure& pm) {
    std::vector<MaximalValue> out;
    out.reserve(pm.bins.size());
    for (const auto& [idx, w] : pm.bins)
        out.push_back(maximalFunctionAt(pm, pm.binCenter(idx)));
    return out;
}

std::vector<double> dyadicMaximal(const ProjectedMeasure& pm, const ShiftedGrid& grid) {
    const int n = pm.frame.n;
    if (grid.n != n) throw std::invalid_argument("dyadicMaximal: grid dimension mismatch");
    std::vector<double> out(pm.bins.size(), 0.0);
    if (pm.bins.empty()) return out;
    // finest useful level: cubes at the bin scale
    int fineLevel = 0;
    while (std::ldexp(1.0, -fineLevel) > pm.binWidth + 1e-15) ++fineLevel;
    // aggregate atom mass per grid cube, level by level, coarsening upward;
    // levels below -2 cover everything reachable (bins live near [0,1]^n)
    const int coarseLevel = -2;
    std::vector<std::unordered_map<uint64_t, double>> byLevel(
        size_t(fineLevel - coarseLevel + 1));
    auto key = [](int64_t a, int64_t b) {
        return (uint64_t(a + (int64_t(1) << 30)) << 32) | uint64_t(b + (int64_t(1) << 30));
    };
    auto cubeIdx = [&](const Vec& p, int level) {
        std::array<int64_t, 2> c{0, 0};
        const double side = std::ldexp(1.0, -level);
        for (int i = 0; i < n; ++i)
            c[size_t(i)] = int64_t(std::floor((p[i] - grid.shift(i)) / side));
        return c;
    };
    for (const auto& [idx, w] : pm.bins) {
        const Vec c = pm.binCenter(idx);
        for (int level = fineLevel; level >= coarseLevel; --level) {
            const auto q = cubeIdx(c, level);
            byLevel[size_t(level - coarseLevel)][key(q[0], q[1])] += w;
        }
    }
    size_t bi = 0;
    for (const auto& [idx, w] : pm.bins) {
        const Vec c = pm.binCenter(idx);
        double best = 0.0;
        for (int level = fineLevel; level >= coarseLevel; --level) {
            const auto q = cubeIdx(c, level);
            const auto& level_map = byLevel[size_t(level - coarseLevel)];
            const auto it = level_map.find(key(q[0], q[1]));
            if (it != level_map.end())
                best = std::max(best, it->second / std::pow(std::ldexp(1.0, -level), n));
        }
        out[bi++] = best;
    }
    return out;
}

double selfEnergyConstant(int dim, double s) {
    if (dim == 1) return 2.0 / ((1.0 - s) * (2.0 - s));
    // c(d,s) = int over [0,1]^{2d} of |u-v|^{-s}, reduced to the difference
    // t = u-v: 2^d * int_{[0,1]^d} prod(1-t_i) |t|^{-s} dt; Gauss nodes avoid
    // the singularity at t = 0
    static const double gx[8] = {0.01985507175123188, 0.10166676129318664,
                                 0.2372337950418355,  0.40828267875217505,
                                 0.5917173212478249,  0.7627662049581645,
                                 0.8983332387068134,  0.9801449282487681};
    static const double gw[8] = {0.05061426814518813, 0.11119051722668723,
                                 0.15685332293894363, 0.18134189168918097,
                                 0.18134189168918097, 0.15685332293894363,
                                 0.11119051722668723, 0.05061426814518813};
    double total = 0.0;
    if (dim == 2) {
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j) {
                const double t0 = gx[i], t1 = gx[j];
                total += gw[i] * gw[j] * (1.0 - t0) * (1.0 - t1) *
                         std::pow(t0 * t0 + t1 * t1, -0.5 * s);
            }
        return 4.0 * total;
    }
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            for (int k = 0; k < 8; ++k) {
                const double t0 = gx[i], t1 = gx[j], t2 = gx[k];
                total += gw[i] * gw[j] * gw[k] * (1.0 - t0) * (1.0 - t1) * (1.0 - t2) *
                         std::pow(t0 * t0 + t1 * t1 + t2 * t2, -0.5 * s);
            }
    return 8.0 * total;
}

double rieszEnergy(const DiscreteMeasure& m, double s) {
    const int d = m.support.dim();
    if (!(s > 0.0 && s < double(d)))
        throw std::invalid_argument("rieszEnergy: need 0 < s < d (density divergence)");
    const size_t n = m.support.size();
    std::vector<Vec> centers(n);
    for (size_t i = 0; i < n; ++i) centers[i] = m.support.cellCenter(i);
    const double selfC = selfEnergyConstant(d, s) * std::pow(m.support.cellSize(), -s);
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        if (m.weights[i] == 0.0) continue;
        total += m.weights[i] * m.weights[i] * selfC;
        double row = 0.0;
        for (size_t j = i + 1; j < n; ++j) {
            if (m.weights[j] == 0.0) continue;
            row += m.weights[j] * std::pow(dist(centers[i], centers[j]), -s);
        }
        total += 2.0 * m.weights[i] * row;
    }
    return total;
}

std::string writeDmeas(const DiscreteMeasure& m) {
    std::vector<size_t> order(m.support.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return m.support.cellCoords(a) < m.support.cellCoords(b);
    });
    std::ostringstream out;
    out.precision(17);
    out << "DMEAS1 d=" << m.support.dim() << " depth=" << m.support.depth()
        << " count=" << m.support.size() << " mass=" << m.totalMass << "\n";
    for (size_t i : order) {
        const auto c = m.support.cellCoords(i);
        for (int k = 0; k < m.support.dim(); ++k) out << c[size_t(k)] << " ";
        out << m.weights[i] << "\n";
    }
    return out.str();
}

DiscreteMeasure parseDmeas(const std::string& text) {
    std::istringstream in(text);
    std::string magic;
    in >> magic;
    if (magic != "DMEAS1") throw std::invalid_argument("not a DMEAS1 file");
    int d = 0, depth = -1;
    size_t count = 0;
    double mass = 0.0;
    std::string tok;
    for (int i = 0; i < 4; ++i) {
        in >> tok;
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("bad DMEAS1 header");
        const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "d") d = std::stoi(val);
        else if (key == "depth") depth = std::stoi(val);
        else if (key == "count") count = std::stoul(val);
        else if (key == "mass") mass = std::stod(val);
        else throw std::invalid_argument("bad DMEAS1 header key: " + key);
    }
    std::vector<std::array<uint32_t, 3>> cells(count, {0, 0, 0});
    std::vector<double> weights(count, 0.0);
    for (size_t i = 0; i < count; ++i) {
        for (int k = 0; k < d; ++k) in >> cells[i][size_t(k)];
        in >> weights[i];
    }
    if (!in) throw std::invalid_argument("truncated DMEAS1 file");
    // cells arrive coordinate-sorted; reorder weights into Morton order
    std::vector<std::pair<uint64_t, double>> entries(count);
    for (size_t i = 0; i < count; ++i)
        entries[i] = {mortonEncode(d, depth, cells[i]), weights[i]};
    std::sort(entries.begin(), entries.end());
    std::vector<uint64_t> codes(count);
    std::vector<double> w(count);
    for (size_t i = 0; i < count; ++i) {
        codes[i] = entries[i].first;
        w[i] = entries[i].second;
    }
    auto m = DiscreteMeasure::fromWeights(DyadicSet(d, depth, std::move(codes)),
                                          std::move(w));
    if (std::abs(m.totalMass - mass) > 1e-9 * std::max(1.0, mass))
        throw std::invalid_argument("DMEAS1 mass header disagrees with weights");
    return m;
}

std::string writeProjectedCsv(const ProjectedMeasure& pm) {
    std::ostringstream out;
    out.precision(17);
    out << "binIndex0";
    if (pm.frame.n == 2) out << ",binIndex1";
    out << ",center0";
    if (pm.frame.n == 2) out << ",center1";
    out << ",weight\n";
    for (const auto& [idx, w] : pm.bins) {
        const Vec c = pm.binCenter(idx);
        out << idx[0];
        if (pm.frame.n == 2) out << "," << idx[1];
        out << "," << c[0];
        if (pm.frame.n == 2) out << "," << c[1];
        out << "," << w << "\n";
    }
    return out.str();
}

}  // namespace visifrac
