#include "visifrac/dyadic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "visifrac/rng.hpp"

namespace visifrac {

DyadicCube DyadicCube::parent() const {
    if (level == 0) throw std::domain_error("root cube has no parent");
    DyadicCube p{dim, level - 1, {}};
    for (int i = 0; i < dim; ++i) p.coords[size_t(i)] = coords[size_t(i)] >> 1;
    return p;
}

bool DyadicCube::containsCube(const DyadicCube& q) const {
    if (q.level < level) return false;
    const int shift = q.level - level;
    for (int i = 0; i < dim; ++i)
        if ((q.coords[size_t(i)] >> shift) != coords[size_t(i)]) return false;
    return true;
}

bool DyadicCube::containsPoint(const Vec& x) const {
    for (int i = 0; i < dim; ++i)
        if (x[i] < lo(i) || x[i] >= hi(i)) return false;
    return true;
}

uint64_t mortonEncode(int dim, int depth, const std::array<uint32_t, 3>& c) {
    uint64_t code = 0;
    for (int b = depth - 1; b >= 0; --b)
        for (int i = 0; i < dim; ++i)
            code = (code << 1) | ((c[size_t(i)] >> b) & 1u);
    return code;
}

std::array<uint32_t, 3> mortonDecode(int dim, int depth, uint64_t code) {
    std::array<uint32_t, 3> c{0, 0, 0};
    for (int b = 0; b < depth; ++b)
        for (int i = dim - 1; i >= 0; --i) {
            c[size_t(i)] |= uint32_t(code & 1u) << b;
            code >>= 1;
        }
    return c;
}

int DyadicSet::maxDepth(int dim) {
    switch (dim) {
        case 1: return 20;
        case 2: return 14;
        case 3: return 9;
        default: throw std::invalid_argument("dim must be 1, 2 or 3");
    }
}

DyadicSet::DyadicSet(int dim, int depth, std::vector<uint64_t> codes)
    : dim_(dim), depth_(depth), codes_(std::move(codes)) {
    if (depth < 0 || depth > maxDepth(dim))
        throw std::invalid_argument("depth out of range for dimension");
    std::sort(codes_.begin(), codes_.end());
    codes_.erase(std::unique(codes_.begin(), codes_.end()), codes_.end());
    const uint64_t limit = uint64_t(1) << (dim_ * depth_);
    if (!codes_.empty() && codes_.back() >= limit)
        throw std::invalid_argument("cell outside [0,1)^d");
}

DyadicSet DyadicSet::fromCoords(int dim, int depth,
                                const std::vector<std::array<uint32_t, 3>>& cells) {
    std::vector<uint64_t> codes;
    codes.reserve(cells.size());
    for (const auto& c : cells) codes.push_back(mortonEncode(dim, depth, c));
    return DyadicSet(dim, depth, std::move(codes));
}

std::array<uint32_t, 3> DyadicSet::cellCoords(size_t i) const {
    return mortonDecode(dim_, depth_, codes_[i]);
}

DyadicCube DyadicSet::cell(size_t i) const {
    return DyadicCube{dim_, depth_, cellCoords(i)};
}

Vec DyadicSet::cellCenter(size_t i) const { return cell(i).center(); }

bool DyadicSet::contains(const std::array<uint32_t, 3>& c) const {
    const uint64_t code = mortonEncode(dim_, depth_, c);
    return std::binary_search(codes_.begin(), codes_.end(), code);
}

uint64_t coveringNumber(const DyadicSet& set, int level) {
    if (level > set.depth())
        throw std::invalid_argument("covering scale finer than set resolution");
    if (set.empty()) return 0;
    const int shift = set.dim() * (set.depth() - level);
    uint64_t count = 0;
    uint64_t prev = ~uint64_t(0);
    for (uint64_t code : set.codes()) {
        const uint64_t key = code >> shift;
        if (key != prev) {
            ++count;
            prev = key;
        }
    }
    return count;
}

namespace detail {

// min over dyadic coverings of this subtree of sum l(Q)^s.
double contentRange(std::span<const uint64_t> codes, int level, int depth, int dim,
                    double s) {
    const double own = std::pow(std::ldexp(1.0, -level), s);
    if (codes.empty()) return 0.0;
    if (level == depth) return own;
    const int shift = dim * (depth - level - 1);
    double sum = 0.0;
    size_t i = 0;
    while (i < codes.size()) {
        const uint64_t key = codes[i] >> shift;
        size_t j = i + 1;
        while (j < codes.size() && (codes[j] >> shift) == key) ++j;
        sum += contentRange(codes.subspan(i, j - i), level + 1, depth, dim, s);
        i = j;
        if (sum >= own) return own;  // coarser cube wins ties
    }
    return sum;
}

}  // namespace detail

double dyadicContent(const DyadicSet& set, double s) {
    if (s <= 0.0) throw std::invalid_argument("content exponent must be positive");
    return detail::contentRange(std::span(set.codes()), 0, set.depth(), set.dim(), s);
}

double dyadicContentWithin(const DyadicSet& set, const DyadicCube& q, double s) {
    if (s <= 0.0) throw std::invalid_argument("content exponent must be positive");
    if (q.level > set.depth()) throw std::invalid_argument("cube finer than set");
    const int shift = set.dim() * (set.depth() - q.level);
    const uint64_t qcode = mortonEncode(set.dim(), q.level, q.coords);
    const auto& codes = set.codes();
    const auto lo = std::lower_bound(codes.begin(), codes.end(), qcode << shift);
    const auto hi = std::lower_bound(codes.begin(), codes.end(), (qcode + 1) << shift);
    return detail::contentRange(std::span(&*lo, size_t(hi - lo)), q.level, set.depth(),
                                set.dim(), s);
}

BoxFit boxDimensionFit(const std::vector<std::pair<double, uint64_t>>& counts) {
    if (counts.size() < 2)
        throw std::invalid_argument("box dimension fit needs at least 2 scales");
    std::vector<double> xs, ys;
    for (const auto& [scale, n] : counts) {
        if (scale <= 0.0 || n == 0)
            throw std::invalid_argument("box dimension fit: bad data point");
        xs.push_back(std::log(1.0 / scale));
        ys.push_back(std::log(double(n)));
    }
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / double(ys.size());
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("box dimension fit: scales not distinct");
    BoxFit fit;
    fit.slope = sxy / sxx;
    double ss = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        const double r = ys[i] - my - fit.slope * (xs[i] - mx);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / double(xs.size()));
    return fit;
}

bool GridCube::containsPoint(const Vec& x) const {
    for (int i = 0; i < grid.n; ++i)
        if (x[i] < lo(i) || x[i] >= hi(i)) return false;
    return true;
}

bool GridCube::containsBall(const Vec& x, double r) const {
    for (int i = 0; i < grid.n; ++i)
        if (x[i] - r < lo(i) || x[i] + r > hi(i)) return false;
    return true;
}

GridCube GridCube::parent() const {
    GridCube p{grid, level - 1, {}};
    for (int i = 0; i < grid.n; ++i)
        p.idx[size_t(i)] = (idx[size_t(i)] >= 0) ? idx[size_t(i)] / 2
                                                 : (idx[size_t(i)] - 1) / 2;
    return p;
}

bool GridCube::containsCube(const GridCube& q) const {
    if (q.grid.n != grid.n || q.grid.e != grid.e || q.level < level) return false;
    GridCube a = q;
    while (a.level > level) a = a.parent();
    return a.idx == idx;
}

std::optional<GridCube> findCoveringCube(const Vec& x, double r, double maxConstant) {
    const int n = x.dim;
    if (n < 1 || n > 2) throw std::invalid_argument("findCoveringCube: n must be 1 or 2");
    if (r <= 0.0 || r >= 1.0 / 3.0)
        throw std::domain_error("findCoveringCube: r must be in (0, 1/3)");
    // a cube of side l can contain B(x,r) only if l >= 2r
    int level = int(std::floor(-std::log2(2.0 * r)));
    for (; level >= -2; --level) {
        const double side = std::ldexp(1.0, -level);
        if (side > maxConstant * r) break;
        for (int emask = 0; emask < (1 << n); ++emask) {
            ShiftedGrid grid{n, {}};
            // lexicographic on the shift vector e
            for (int i = 0; i < n; ++i) grid.e[size_t(i)] = (emask >> (n - 1 - i)) & 1;
            GridCube q{grid, level, {}};
            for (int i = 0; i < n; ++i)
                q.idx[size_t(i)] = int64_t(std::floor((x[i] - grid.shift(i)) / side));
            if (q.containsBall(x, r)) return q;
        }
    }
    return std::nullopt;
}

double calibrateGridConstant(int n, int trials, uint64_t seed) {
    if (n < 1 || n > 2) throw std::invalid_argument("calibrate: n must be 1 or 2");
    if (trials < 1) throw std::invalid_argument("calibrate: trials must be >= 1");
    SplitMix64 rng(seed);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        Vec x(n, 0.0);
        double r;
        if (t == 0) {
            // fixed adversarial sample: a point on a level-1 boundary of the
            // standard grid, where the shifted grid must take over
            for (int i = 0; i < n; ++i) x[i] = 0.5;
            r = 0.1;
        } else {
            for (int i = 0; i < n; ++i) x[i] = rng.uniform();
            // dyadic radii only: they are the radius lattice the maximal
            // function uses, and for r = 2^-k the first level on which no
            // ball can cross both grids has side 8r. Radii above 1/8 can
            // straddle a boundary of both grids at once (the fixed 1/3 shift
            // is scale independent), so stay below.
            r = std::ldexp(1.0, -int(3 + rng.below(16)));
        }
        auto q = findCoveringCube(x, r, 64.0);
        if (!q) throw std::runtime_error("calibrate: no covering cube found");
        worst = std::max(worst, q->side() / r);
    }
    return worst;
}

std::string writeDyset(const DyadicSet& set) {
    std::ostringstream out;
    out << "DYSET1 d=" << set.dim() << " depth=" << set.depth()
        << " count=" << set.size() << "\n";
    // Morton order is already a deterministic total order; emit lexicographic
    // coordinate order as the format requires.
    std::vector<std::array<uint32_t, 3>> cells;
    cells.reserve(set.size());
    for (size_t i = 0; i < set.size(); ++i) cells.push_back(set.cellCoords(i));
    std::sort(cells.begin(), cells.end());
    for (const auto& c : cells) {
        for (int i = 0; i < set.dim(); ++i) out << (i ? " " : "") << c[size_t(i)];
        out << "\n";
    }
    return out.str();
}

DyadicSet parseDyset(const std::string& text) {
    std::istringstream in(text);
    std::string magic;
    in >> magic;
    if (magic != "DYSET1") throw std::invalid_argument("not a DYSET1 file");
    int d = 0, depth = -1;
    size_t count = 0;
    std::string kv;
    for (int k = 0; k < 3; ++k) {
        in >> kv;
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("bad DYSET1 header");
        const std::string key = kv.substr(0, eq);
        const long val = std::stol(kv.substr(eq + 1));
        if (key == "d") d = int(val);
        else if (key == "depth") depth = int(val);
        else if (key == "count") count = size_t(val);
        else throw std::invalid_argument("unknown DYSET1 header key: " + key);
    }
    std::vector<std::array<uint32_t, 3>> cells(count, {0, 0, 0});
    for (size_t i = 0; i < count; ++i)
        for (int j = 0; j < d; ++j) {
            long v;
            if (!(in >> v)) throw std::invalid_argument("truncated DYSET1 file");
            cells[i][size_t(j)] = uint32_t(v);
        }
    return DyadicSet::fromCoords(d, depth, cells);
}

std::string writePgm(const DyadicSet& set) {
    if (set.dim() != 2) throw std::invalid_argument("PGM dump requires d = 2");
    const uint32_t side = uint32_t(1) << set.depth();
    std::string img(size_t(side) * side, '\0');
    for (size_t i = 0; i < set.size(); ++i) {
        const auto c = set.cellCoords(i);
        const uint32_t row = side - 1 - c[1];
        img[size_t(row) * side + c[0]] = char(255);
    }
    char header[64];
    std::snprintf(header, sizeof(header), "P5\n%u %u\n255\n", side, side);
    return std::string(header) + img;
}

}  // namespace visifrac
