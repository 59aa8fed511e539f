#include "visifrac/spectral.hpp"

#include <cmath>
#include <complex>
#include <map>
#include <sstream>
#include <stdexcept>

#include "visifrac/rng.hpp"

namespace visifrac {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

struct Atom {
    std::array<int64_t, 3> idx;
    double w;
};

// exact transform of lattice atoms, folded one axis at a time; the final
// layout is row-major with xi_0 slowest
std::vector<std::complex<double>> foldTransform(int n, double h,
                                                const std::vector<Atom>& atoms, int K,
                                                double freqStep = 1.0) {
    const int width = 2 * K + 1;
    std::map<std::array<int64_t, 3>, std::vector<std::complex<double>>> table;
    for (const auto& a : atoms) {
        auto& v = table[a.idx];
        if (v.empty()) v.assign(1, 0.0);
        v[0] += a.w;
    }
    for (int axis = n - 1; axis >= 0; --axis) {
        std::map<std::array<int64_t, 3>, std::vector<std::complex<double>>> next;
        for (const auto& [coords, vec] : table) {
            std::array<int64_t, 3> key = coords;
            key[size_t(axis)] = 0;
            auto& dst = next[key];
            if (dst.empty()) dst.assign(size_t(width) * vec.size(), 0.0);
            const double x = (double(coords[size_t(axis)]) + 0.5) * h * freqStep;
            const std::complex<double> step = std::polar(1.0, -kTwoPi * x);
            std::complex<double> phase = std::polar(1.0, kTwoPi * x * K);  // xi = -K
            for (int f = 0; f < width; ++f) {
                const size_t base = size_t(f) * vec.size();
                for (size_t t = 0; t < vec.size(); ++t) dst[base + t] += phase * vec[t];
                phase *= step;
            }
        }
        table.swap(next);
    }
    return table.begin()->second;
}

SpectralProfile profileFromAtoms(int n, double h, const std::vector<Atom>& atoms,
                                 int cutoff, double totalMass) {
    if (cutoff < 1) throw std::invalid_argument("transform: cutoff must be >= 1");
    SpectralProfile p;
    p.n = n;
    p.cutoff = cutoff;
    p.totalMass = totalMass;
    const int width = 2 * cutoff + 1;
    size_t size = 1;
    for (int i = 0; i < n; ++i) size *= size_t(width);
    if (atoms.empty()) {
        p.amplitudes.assign(size, 0.0);
        return p;
    }
    const auto z = foldTransform(n, h, atoms, cutoff);
    p.amplitudes.resize(size);
    for (size_t i = 0; i < size; ++i) p.amplitudes[i] = std::norm(z[i]);
    return p;
}

}  // namespace

size_t SpectralProfile::index(const std::array<int, 3>& xi) const {
    const int width = 2 * cutoff + 1;
    size_t out = 0;
    for (int k = 0; k < n; ++k) {
        const int v = xi[size_t(k)] + cutoff;
        if (v < 0 || v >= width) throw std::out_of_range("frequency outside cutoff");
        out = out * size_t(width) + size_t(v);
    }
    return out;
}

SpectralProfile transform(const ProjectedMeasure& pm, int cutoff) {
    std::vector<Atom> atoms;
    atoms.reserve(pm.bins.size());
    for (const auto& [idx, w] : pm.bins)
        atoms.push_back({{idx[0], idx[1], 0}, w});
    return profileFromAtoms(pm.frame.n, pm.binWidth, atoms, cutoff, pm.totalMass);
}

SpectralProfile transformMeasure(const DiscreteMeasure& m, int cutoff) {
    std::vector<Atom> atoms;
    atoms.reserve(m.support.size());
    for (size_t i = 0; i < m.support.size(); ++i) {
        if (m.weights[i] == 0.0) continue;
        const auto c = m.support.cellCoords(i);
        atoms.push_back({{int64_t(c[0]), int64_t(c[1]), int64_t(c[2])}, m.weights[i]});
    }
    return profileFromAtoms(m.support.dim(), m.support.cellSize(), atoms, cutoff,
                            m.totalMass);
}

double sobolevNorm(const SpectralProfile& profile, double sigma, SobolevKind kind) {
    const int K = profile.cutoff, width = 2 * K + 1;
    double total = 0.0;
    std::array<int, 3> xi{0, 0, 0};
    for (size_t i = 0; i < profile.amplitudes.size(); ++i) {
        size_t rem = i;
        double q = 0.0;
        for (int k = profile.n - 1; k >= 0; --k) {
            xi[size_t(k)] = int(rem % size_t(width)) - K;
            rem /= size_t(width);
            q += double(xi[size_t(k)]) * double(xi[size_t(k)]);
        }
        if (kind == SobolevKind::homogeneous) {
            if (q == 0.0) continue;
            total += profile.amplitudes[i] * std::pow(q, sigma);
        } else {
            total += profile.amplitudes[i] * std::pow(1.0 + q, sigma);
        }
    }
    return total;
}

EnergyFourierResult energyFourierCheck(const DiscreteMeasure& m, double s, int cutoff) {
    const int d = m.support.dim();
    if (!(s > 0.0 && s < double(d)))
        throw std::invalid_argument("energyFourierCheck: need 0 < s < d");
    EnergyFourierResult out;
    size_t atoms = 0;
    for (double w : m.weights)
        if (w > 0.0) ++atoms;
    out.flagged = atoms <= 1;
    out.energy = rieszEnergy(m, s);
    // Riemann sum over a sub-integer lattice: integer frequencies alone sit on
    // the zero set of cell-uniform spectra (and their grid aliases), so refine
    // the grid and weight amplitudes with the per-axis cell window
    const int sub = d == 3 ? 2 : 4;
    const double h = m.support.cellSize();
    std::vector<Atom> cellAtoms;
    cellAtoms.reserve(m.support.size());
    for (size_t i = 0; i < m.support.size(); ++i) {
        if (m.weights[i] == 0.0) continue;
        const auto c = m.support.cellCoords(i);
        cellAtoms.push_back({{int64_t(c[0]), int64_t(c[1]), int64_t(c[2])}, m.weights[i]});
    }
    const int K = sub * cutoff;
    const int width = 2 * K + 1;
    const auto z = foldTransform(d, h, cellAtoms, K, 1.0 / double(sub));
    double sum = 0.0;
    for (size_t i = 0; i < z.size(); ++i) {
        size_t rem = i;
        double q = 0.0;
        double window = 1.0;
        for (int k = 0; k < d; ++k) {
            const double v = double(int(rem % size_t(width)) - K) / double(sub);
            rem /= size_t(width);
            q += v * v;
            const double x = 0.5 * kTwoPi * v * h;
            if (x != 0.0) window *= std::sin(x) / x;
        }
        if (q == 0.0) continue;  // |xi|^{s-d} blows up only at the excluded origin
        sum += std::norm(z[i]) * window * window * std::pow(q, 0.5 * (s - d));
    }
    sum /= std::pow(double(sub), d);
    out.latticeSum = sum;
    out.ratio = sum > 0.0 ? out.energy / sum : 0.0;
    return out;
}

DirectionAverage directionAverageSobolev(const DiscreteMeasure& m, double sigma,
                                         int directions, uint64_t seed,
                                         double frostmanT) {
    if (directions < 1)
        throw std::invalid_argument("directionAverageSobolev: need >= 1 direction");
    const int d = m.support.dim();
    if (d < 2) throw std::invalid_argument("directionAverageSobolev: need d >= 2");
    DirectionAverage avg;
    const int n = d - 1;
    avg.warned = frostmanT > 0.0 && sigma >= 0.5 * (frostmanT - double(n));
    SplitMix64 rng(seed);
    const int cutoff = std::max(1, 1 << (m.support.depth() - 1));
    double total = 0.0;
    for (int i = 0; i < directions; ++i) {
        Direction dir;
        if (d == 2) {
            dir = Direction::fromAngle(kTwoPi * rng.uniform());
        } else {
            const double z = 2.0 * rng.uniform() - 1.0;
            const double phi = kTwoPi * rng.uniform();
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            dir = Direction::fromVector(Vec(3, r * std::cos(phi), r * std::sin(phi), z));
        }
        avg.directions.push_back(dir.unit);
        const double norm2 = m.totalMass > 0.0
                                 ? sobolevNorm(transform(project(m, dir.perp), cutoff),
                                               sigma, SobolevKind::inhomogeneous)
                                 : 0.0;
        avg.perDirection.push_back(norm2);
        total += norm2;
    }
    avg.mean = total / double(directions);
    return avg;
}

std::string writeSpectrumCsv(const SpectralProfile& profile) {
    std::ostringstream out;
    out.precision(17);
    for (int k = 0; k < profile.n; ++k) out << "xi" << k << ",";
    out << "amplitude\n";
    const int width = 2 * profile.cutoff + 1;
    for (size_t i = 0; i < profile.amplitudes.size(); ++i) {
        size_t rem = i;
        std::array<int, 3> xi{0, 0, 0};
        for (int k = profile.n - 1; k >= 0; --k) {
            xi[size_t(k)] = int(rem % size_t(width)) - profile.cutoff;
            rem /= size_t(width);
        }
        for (int k = 0; k < profile.n; ++k) out << xi[size_t(k)] << ",";
        out << profile.amplitudes[i] << "\n";
    }
    return out.str();
}

std::string writeDirectionAverageCsv(const DirectionAverage& avg) {
    std::ostringstream out;
    out.precision(17);
    out << "thetaIndex,theta0,theta1,theta2,norm\n";
    for (size_t i = 0; i < avg.perDirection.size(); ++i) {
        const Vec& u = avg.directions[i];
        out << i << "," << u[0] << "," << (u.dim > 1 ? u[1] : 0.0) << ","
            << (u.dim > 2 ? u[2] : 0.0) << "," << avg.perDirection[i] << "\n";
    }
    return out.str();
}

}  // namespace visifrac
