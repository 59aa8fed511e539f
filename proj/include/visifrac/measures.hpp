#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "visifrac/dyadic.hpp"
#include "visifrac/geometry.hpp"

namespace visifrac {

// Nonnegative cell weights on a DyadicSet, aligned with the set's code order.
struct DiscreteMeasure {
    DyadicSet support;
    std::vector<double> weights;
    double totalMass = 0.0;

    static DiscreteMeasure fromWeights(DyadicSet set, std::vector<double> w);
};

// Uniform weight cellSize^s per occupied cell.
DiscreteMeasure naturalMeasure(const DyadicSet& set, double s);

// Top-down tree construction consistent with the content DP: the root carries
// mass dyadicContent(set, t), each node splits its mass proportionally to the
// children's content values. Guarantees nu(Q) <= l(Q)^t for every dyadic Q
// and nu(total) = dyadicContent(set, t).
DiscreteMeasure frostmanDyadic(const DyadicSet& set, double t);

struct FrostmanReport {
    DiscreteMeasure measure;
    double lowerConstant = 0.0;  // min over tree nodes of nu(Q)/min(content(Q), l(Q)^d)
    double upperConstant = 0.0;  // max over tree nodes of nu(Q)/l(Q)^t
};

// frostmanDyadic plus a full tree scan of the two-sided Frostman bounds.
FrostmanReport frostmanWithLowerBound(const DyadicSet& set, double t);

// Keep weights of cells inside cube (halo=1) or inside 3*cube clipped to
// [0,1)^d (halo=3); zero elsewhere.
DiscreteMeasure restrict(const DiscreteMeasure& m, const DyadicCube& cube, int halo);

// Push-forward of a measure under projection to a frame: each cell's weight
// lands in the bin containing the projection of the cell center. Bin i covers
// [i*binWidth, (i+1)*binWidth) in each frame coordinate.
struct ProjectedMeasure {
    Frame frame;
    double binWidth = 0.0;
    std::map<std::array<int64_t, 2>, double> bins;
    double totalMass = 0.0;

    Vec binCenter(const std::array<int64_t, 2>& idx) const {
        Vec c(frame.n, 0.0);
        for (int i = 0; i < frame.n; ++i) c[i] = (double(idx[size_t(i)]) + 0.5) * binWidth;
        return c;
    }
};

ProjectedMeasure project(const DiscreteMeasure& m, const Frame& frame);

// Hardy-Littlewood maximal value sup nu(B(x,r))/r^n over the doubling radius
// lattice {binWidth * 2^j : r <= 2}. farOutside marks query points more than
// 2 away from all mass (value 0 under the radius cap).
struct MaximalValue {
    double value = 0.0;
    bool farOutside = false;
};
MaximalValue maximalFunctionAt(const ProjectedMeasure& pm, const Vec& x);

// One value per bin, in bin iteration order.
std::vector<MaximalValue> maximalFunction(const ProjectedMeasure& pm);

// max over cubes Q of the shifted grid with x in Q of nu(Q)/l(Q)^n, one value
// per bin center.
std::vector<double> dyadicMaximal(const ProjectedMeasure& pm, const ShiftedGrid& grid);

// Pair sum of w_i w_j |c_i-c_j|^{-s} plus the per-cell self term
// w^2 * cellSize^{-s} * selfEnergyConstant(d, s).
double rieszEnergy(const DiscreteMeasure& m, double s);

// Exact closed form 2/((1-s)(2-s)) for d=1; tensor Gauss-Legendre quadrature
// of the pair-distance integral for d=2,3.
double selfEnergyConstant(int dim, double s);

// DMEAS1 text format.
std::string writeDmeas(const DiscreteMeasure& m);
DiscreteMeasure parseDmeas(const std::string& text);

// ProjectedMeasure CSV: binIndex...,center...,weight
std::string writeProjectedCsv(const ProjectedMeasure& pm);

}  // namespace visifrac
