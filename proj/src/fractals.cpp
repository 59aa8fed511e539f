#include "visifrac/fractals.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "visifrac/rng.hpp"

namespace visifrac {

namespace {

// A composed similarity: x -> A x + b with A = scale * rotation.
struct Piece {
    double a[3][3];
    double b[3];
    double scale;

    // bbox of the image of [0,1]^d (exact for axis-aligned rotations)
    void bbox(int dim, double* lo, double* hi) const {
        for (int i = 0; i < dim; ++i) {
            lo[i] = b[i];
            hi[i] = b[i];
            for (int j = 0; j < dim; ++j) {
                lo[i] += std::min(a[i][j], 0.0);
                hi[i] += std::max(a[i][j], 0.0);
            }
        }
    }
};

Piece identityPiece(int dim) {
    Piece p{};
    p.scale = 1.0;
    for (int i = 0; i < dim; ++i) p.a[i][i] = 1.0;
    return p;
}

Piece mapPiece(int dim, const SimilarityMap& m) {
    Piece p{};
    p.scale = m.ratio;
    const double rad = m.angleDeg * std::acos(-1.0) / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    p.a[0][0] = m.ratio * c;
    p.a[0][1] = dim >= 2 ? -m.ratio * s : 0.0;
    p.a[1][0] = dim >= 2 ? m.ratio * s : 0.0;
    p.a[1][1] = dim >= 2 ? m.ratio * c : 0.0;
    if (dim == 1) p.a[0][0] = m.ratio;  // no rotation on the line
    if (dim == 3) p.a[2][2] = m.ratio;
    for (int i = 0; i < dim; ++i) p.b[i] = m.translation[i];
    return p;
}

Piece compose(int dim, const Piece& outer, const Piece& inner) {
    Piece r{};
    r.scale = outer.scale * inner.scale;
    for (int i = 0; i < dim; ++i) {
        r.b[i] = outer.b[i];
        for (int j = 0; j < dim; ++j) {
            r.b[i] += outer.a[i][j] * inner.b[j];
            r.a[i][j] = 0.0;
            for (int k = 0; k < dim; ++k) r.a[i][j] += outer.a[i][k] * inner.a[k][j];
        }
    }
    return r;
}

bool axisAlignedAngles(const IFSSpec& spec) {
    for (const auto& m : spec.maps) {
        const double q = m.angleDeg / 90.0;
        if (std::abs(q - std::round(q)) > 1e-9) return false;
    }
    return true;
}

struct Rasterizer {
    const IFSSpec& spec;
    int depth;
    double sqrtd;
    std::vector<Piece> mapPieces;
    std::vector<uint64_t> out;

    Rasterizer(const IFSSpec& s, int d) : spec(s), depth(d) {
        sqrtd = std::sqrt(double(spec.dim));
        for (const auto& m : spec.maps) mapPieces.push_back(mapPiece(spec.dim, m));
    }

    static bool overlaps(int dim, const double* alo, const double* ahi,
                         const double* blo, const double* bhi) {
        for (int i = 0; i < dim; ++i)
            if (alo[i] > bhi[i] || ahi[i] < blo[i]) return false;
        return true;
    }

    // refine pieces until their diameter drops below `fine`, keeping only
    // those whose bbox meets the cell
    void refineInto(const Piece& p, double fine, const double* clo, const double* chi,
                    std::vector<Piece>& dst) const {
        double lo[3], hi[3];
        p.bbox(spec.dim, lo, hi);
        if (!overlaps(spec.dim, lo, hi, clo, chi)) return;
        if (p.scale * sqrtd < fine) {
            dst.push_back(p);
            return;
        }
        for (const auto& m : mapPieces) refineInto(compose(spec.dim, p, m), fine, clo, chi, dst);
    }

    void descend(int level, const std::array<uint32_t, 3>& coords,
                 const std::vector<Piece>& active) {
        if (active.empty()) return;
        if (level == depth) {
            out.push_back(mortonEncode(spec.dim, depth, coords));
            return;
        }
        const int childLevel = level + 1;
        const double side = std::ldexp(1.0, -childLevel);
        for (uint32_t child = 0; child < (uint32_t(1) << spec.dim); ++child) {
            std::array<uint32_t, 3> cc = coords;
            double clo[3], chi[3];
            for (int i = 0; i < spec.dim; ++i) {
                cc[size_t(i)] = (coords[size_t(i)] << 1) | ((child >> i) & 1u);
                clo[i] = cc[size_t(i)] * side;
                chi[i] = clo[i] + side;
            }
            const double fine = std::max(side, std::ldexp(1.0, -depth));
            std::vector<Piece> next;
            for (const auto& p : active) refineInto(p, fine, clo, chi, next);
            descend(childLevel, cc, next);
        }
    }

    DyadicSet run() {
        double clo[3] = {0, 0, 0}, chi[3] = {1, 1, 1};
        std::vector<Piece> root;
        refineInto(identityPiece(spec.dim), 1.0, clo, chi, root);
        descend(0, {0, 0, 0}, root);
        return DyadicSet(spec.dim, depth, std::move(out));
    }
};

DyadicSet rasterizeByOversampling(const IFSSpec& spec, int depth) {
    // non-axis-aligned rotations: sample attractor points through fine
    // compositions of a 3^d hull grid
    const int dim = spec.dim;
    const double fine = std::ldexp(1.0, -(depth + 1));
    std::vector<Piece> pieces{identityPiece(dim)};
    std::vector<Piece> mapPieces;
    for (const auto& m : spec.maps) mapPieces.push_back(mapPiece(dim, m));
    const double sqrtd = std::sqrt(double(dim));
    while (true) {
        bool anyCoarse = false;
        std::vector<Piece> next;
        next.reserve(pieces.size());
        for (const auto& p : pieces) {
            if (p.scale * sqrtd >= fine) {
                anyCoarse = true;
                for (const auto& m : mapPieces) next.push_back(compose(dim, p, m));
            } else {
                next.push_back(p);
            }
        }
        pieces.swap(next);
        if (!anyCoarse) break;
        if (pieces.size() > 30'000'000)
            throw std::runtime_error("rasterize: rotated IFS too fine for oversampling");
    }
    const uint32_t n = uint32_t(1) << depth;
    std::vector<uint64_t> codes;
    for (const auto& p : pieces) {
        for (int gx = 0; gx < 3; ++gx)
            for (int gy = 0; gy < (dim >= 2 ? 3 : 1); ++gy)
                for (int gz = 0; gz < (dim >= 3 ? 3 : 1); ++gz) {
                    const double u[3] = {gx * 0.5, gy * 0.5, gz * 0.5};
                    std::array<uint32_t, 3> c{0, 0, 0};
                    bool ok = true;
                    for (int i = 0; i < dim; ++i) {
                        double x = p.b[i];
                        for (int j = 0; j < dim; ++j) x += p.a[i][j] * u[j];
                        const double scaled = x * n;
                        long idx = long(std::floor(scaled));
                        if (idx == long(n)) idx = long(n) - 1;
                        if (idx < 0 || idx >= long(n)) {
                            ok = false;
                            break;
                        }
                        c[size_t(i)] = uint32_t(idx);
                    }
                    if (ok) codes.push_back(mortonEncode(dim, depth, c));
                }
    }
    return DyadicSet(dim, depth, std::move(codes));
}

DyadicSet middleHalfCantorProduct(int depth) {
    IFSSpec c;
    c.dim = 1;
    c.name = "middle-half-cantor";
    c.maps = {{0.25, Vec(1, 0.0), 0.0}, {0.25, Vec(1, 0.75), 0.0}};
    const DyadicSet line = rasterizeIfs(c, depth);
    std::vector<uint64_t> codes;
    const uint32_t n = uint32_t(1) << depth;
    codes.reserve(line.size() * n);
    for (size_t i = 0; i < line.size(); ++i) {
        const uint32_t x = line.cellCoords(i)[0];
        for (uint32_t y = 0; y < n; ++y)
            codes.push_back(mortonEncode(2, depth, {x, y, 0}));
    }
    return DyadicSet(2, depth, std::move(codes));
}

}  // namespace

void IFSSpec::validate() const {
    if (dim < 1 || dim > 3) throw std::invalid_argument("IFS dim must be 1..3");
    if (maps.empty()) throw std::invalid_argument("IFS needs at least one map");
    for (const auto& m : maps)
        if (!(m.ratio > 0.0 && m.ratio < 1.0))
            throw std::invalid_argument("IFS ratios must lie in (0,1)");
    // iterate the hull bbox; the limit contains the attractor
    double lo[3] = {0, 0, 0}, hi[3] = {1, 1, 1};
    std::vector<Piece> pieces;
    for (const auto& m : maps) pieces.push_back(mapPiece(dim, m));
    for (int it = 0; it < 100; ++it) {
        double nlo[3], nhi[3];
        for (int i = 0; i < dim; ++i) {
            nlo[i] = 1e300;
            nhi[i] = -1e300;
        }
        for (const auto& p : pieces) {
            // image bbox of the current hull box
            for (int i = 0; i < dim; ++i) {
                double l = p.b[i], h = p.b[i];
                for (int j = 0; j < dim; ++j) {
                    l += std::min(p.a[i][j] * lo[j], p.a[i][j] * hi[j]);
                    h += std::max(p.a[i][j] * lo[j], p.a[i][j] * hi[j]);
                }
                nlo[i] = std::min(nlo[i], l);
                nhi[i] = std::max(nhi[i], h);
            }
        }
        std::copy(nlo, nlo + 3, lo);
        std::copy(nhi, nhi + 3, hi);
    }
    for (int i = 0; i < dim; ++i)
        if (lo[i] < -1e-9 || hi[i] > 1.0 + 1e-9)
            throw std::domain_error("IFS attractor escapes [0,1]^d");
    if (similarityDimension(*this) > double(dim) + 1e-12)
        throw std::invalid_argument("similarity dimension exceeds ambient dimension");
}

double similarityDimension(const IFSSpec& spec) {
    auto f = [&](double s) {
        double total = 0.0;
        for (const auto& m : spec.maps) total += std::pow(m.ratio, s);
        return total - 1.0;
    };
    double lo = 1e-12, hi = double(spec.dim);
    if (f(hi) > 0.0) return hi + 1.0;  // out of range, caught by validate
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

DyadicSet rasterizeIfs(const IFSSpec& spec, int depth) {
    spec.validate();
    if (depth < 0 || depth > DyadicSet::maxDepth(spec.dim))
        throw std::invalid_argument("rasterize depth out of range");
    if (!axisAlignedAngles(spec)) return rasterizeByOversampling(spec, depth);
    Rasterizer r(spec, depth);
    return r.run();
}

RegularityReport ahlforsConstants(const DyadicSet& set, double s, int sampleCenters,
                                  uint64_t seed) {
    if (set.empty()) throw std::domain_error("ahlforsConstants: empty set");
    SplitMix64 rng(seed);
    RegularityReport rep;
    rep.exponent = s;
    rep.cLow = 1e300;
    rep.cHigh = 0.0;
    const double cellMass = std::pow(set.cellSize(), s);
    std::vector<Vec> centers(set.size());
    for (size_t i = 0; i < set.size(); ++i) centers[i] = set.cellCenter(i);
    const int rMin = 1, rMax = std::max(1, set.depth() - 1);
    rep.scalesTested = rMax - rMin + 1;
    for (int t = 0; t < sampleCenters; ++t) {
        const Vec x = centers[rng.below(set.size())];
        for (int j = rMin; j <= rMax; ++j) {
            const double r = std::ldexp(1.0, -j);
            uint64_t n = 0;
            for (const auto& c : centers)
                if (dist(c, x) <= r) ++n;
            const double ratio = double(n) * cellMass / std::pow(r, s);
            rep.cLow = std::min(rep.cLow, ratio);
            rep.cHigh = std::max(rep.cHigh, ratio);
        }
    }
    return rep;
}

std::vector<std::string> builtinNames() {
    return {"square", "segment", "carpet", "triangle", "cantor4", "sponge",
            "cantor-product"};
}

bool isBuiltin(const std::string& name) {
    const auto names = builtinNames();
    return std::find(names.begin(), names.end(), name) != names.end();
}

IFSSpec builtinSpec(const std::string& name) {
    IFSSpec s;
    s.name = name;
    s.dim = 2;
    if (name == "square") {
        for (int i = 0; i < 4; ++i)
            s.maps.push_back({0.5, Vec(2, 0.5 * (i & 1), 0.5 * (i >> 1)), 0.0});
    } else if (name == "segment") {
        s.maps = {{0.5, Vec(2, 0.0, 0.0), 0.0}, {0.5, Vec(2, 0.5, 0.0), 0.0}};
    } else if (name == "carpet") {
        for (int x = 0; x < 3; ++x)
            for (int y = 0; y < 3; ++y)
                if (!(x == 1 && y == 1))
                    s.maps.push_back({1.0 / 3.0, Vec(2, x / 3.0, y / 3.0), 0.0});
    } else if (name == "triangle") {
        s.maps = {{0.5, Vec(2, 0.0, 0.0), 0.0},
                  {0.5, Vec(2, 0.5, 0.0), 0.0},
                  {0.5, Vec(2, 0.25, 0.5), 0.0}};
    } else if (name == "cantor4") {
        for (int x = 0; x < 2; ++x)
            for (int y = 0; y < 2; ++y)
                s.maps.push_back({0.25, Vec(2, 0.75 * x, 0.75 * y), 0.0});
    } else if (name == "sponge") {
        s.dim = 3;
        for (int x = 0; x < 3; ++x)
            for (int y = 0; y < 3; ++y)
                for (int z = 0; z < 3; ++z) {
                    const int mid = (x == 1) + (y == 1) + (z == 1);
                    if (mid >= 2) continue;  // Menger sponge keeps 20 of 27
                    s.maps.push_back({1.0 / 3.0, Vec(3, x / 3.0, y / 3.0, z / 3.0), 0.0});
                }
    } else if (name == "cantor-product") {
        throw std::invalid_argument("cantor-product is not IFS-backed; use builtinSet");
    } else {
        std::ostringstream msg;
        msg << "unknown builtin '" << name << "'; available:";
        for (const auto& b : builtinNames()) msg << " " << b;
        throw std::invalid_argument(msg.str());
    }
    return s;
}

DyadicSet builtinSet(const std::string& name, int depth) {
    if (name == "cantor-product") return middleHalfCantorProduct(depth);
    return rasterizeIfs(builtinSpec(name), depth);
}

double builtinDimension(const std::string& name) {
    if (name == "square") return 2.0;
    if (name == "segment") return 1.0;
    if (name == "carpet") return std::log(8.0) / std::log(3.0);
    if (name == "triangle") return std::log(3.0) / std::log(2.0);
    if (name == "cantor4") return 1.0;
    if (name == "sponge") return std::log(20.0) / std::log(3.0);
    if (name == "cantor-product") return 1.5;
    throw std::invalid_argument("unknown builtin: " + name);
}

IFSSpec parseIfsFile(const std::string& text) {
    IFSSpec spec;
    spec.dim = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("bad IFS line: " + line);
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "dim") {
            spec.dim = std::stoi(val);
        } else if (key == "name") {
            spec.name = val;
        } else if (key == "map") {
            if (spec.dim == 0)
                throw std::invalid_argument("IFS file: dim= must precede map=");
            std::vector<double> nums;
            std::istringstream vs(val);
            std::string tok;
            while (std::getline(vs, tok, ',')) nums.push_back(std::stod(tok));
            const size_t base = 1 + size_t(spec.dim);
            if (nums.size() != base && nums.size() != base + 1)
                throw std::invalid_argument("IFS map needs r + dim translations [+ angle]");
            SimilarityMap m;
            m.ratio = nums[0];
            m.translation = Vec(spec.dim, 0.0);
            for (int i = 0; i < spec.dim; ++i) m.translation[i] = nums[size_t(i) + 1];
            m.angleDeg = nums.size() == base + 1 ? nums[base] : 0.0;
            spec.maps.push_back(m);
        } else {
            throw std::invalid_argument("unknown IFS file key: " + key);
        }
    }
    spec.validate();
    return spec;
}

}  // namespace visifrac
