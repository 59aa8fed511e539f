#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "visifrac/measures.hpp"

namespace visifrac {

// |nu_hat(xi)|^2 on the integer lattice |xi|_inf <= cutoff, kernel
// e^{-2 pi i x.xi}. Amplitudes are stored row-major over xi_k in [-K, K].
struct SpectralProfile {
    int n = 1;
    int cutoff = 0;
    double totalMass = 0.0;
    std::vector<double> amplitudes;

    size_t index(const std::array<int, 3>& xi) const;
    double at(const std::array<int, 3>& xi) const { return amplitudes[index(xi)]; }
};

// Exact sum over bin atoms, factored along grid axes (identical to the naive
// double loop to rounding error).
SpectralProfile transform(const ProjectedMeasure& pm, int cutoff);

// Same transform applied to a measure's own cells in R^d.
SpectralProfile transformMeasure(const DiscreteMeasure& m, int cutoff);

enum class SobolevKind { homogeneous, inhomogeneous };

// Lattice Riemann sum of |nu_hat|^2 (1+|xi|^2)^sigma, or |xi|^{2 sigma} with
// the xi = 0 term omitted for the homogeneous kind.
double sobolevNorm(const SpectralProfile& profile, double sigma, SobolevKind kind);

struct EnergyFourierResult {
    double energy = 0.0;
    double latticeSum = 0.0;
    double ratio = 0.0;  // empirical constant energy / latticeSum
    bool flagged = false;  // single-atom input: lattice sum diverges with cutoff
};

// Compares the pair-sum energy against the Fourier-side lattice sum
// sum |mu_hat(xi)|^2 |xi|^{s-d}; the ratio is the measured proportionality
// constant.
EnergyFourierResult energyFourierCheck(const DiscreteMeasure& m, double s, int cutoff);

struct DirectionAverage {
    double mean = 0.0;
    std::vector<double> perDirection;
    std::vector<Vec> directions;
    bool warned = false;  // sigma too large for the supplied Frostman exponent
};

// Monte Carlo average over uniformly sampled directions (d=2: uniform angle,
// d=3: area-uniform sphere) of the projected inhomogeneous Sobolev norm.
// frostmanT, when finite, triggers the sigma < (t-n)/2 convergence warning.
DirectionAverage directionAverageSobolev(const DiscreteMeasure& m, double sigma,
                                         int directions, uint64_t seed,
                                         double frostmanT = -1.0);

// CSV exports: xi...,amplitude and thetaIndex,angleOrVector...,norm
std::string writeSpectrumCsv(const SpectralProfile& profile);
std::string writeDirectionAverageCsv(const DirectionAverage& avg);

}  // namespace visifrac
