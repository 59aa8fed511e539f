#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "visifrac/measures.hpp"

namespace visifrac {

// Affine slice plane V = anchor + L_perp for a plane L in G(d,n).
struct SliceSpec {
    Frame frame;  // L, the projection target; the slice runs along L_perp
    Vec anchor;
};

// Orthonormal frame of the orthogonal complement of L.
Frame perpComplement(const Frame& L);

struct SliceResult {
    DyadicSet ambient;  // the source cells whose closed cube meets V
    // cell indices of the slice in L_perp coordinates at the source cell size;
    // signed because oblique slices are not anchored to [0,1)
    std::vector<std::array<int64_t, 2>> planar;
    Frame perpFrame;
    double thickness = 0.0;
};

SliceResult sliceSet(const DyadicSet& set, const SliceSpec& spec);

// Maximal cubes Q of the shifted grid with nu(Q)/l(Q)^n >= 3^{-n} M.
struct HeavyCover {
    double M = 0.0;
    bool degenerate = false;  // precondition M > 3^n mass violated
    std::vector<GridCube> cubes;
};

HeavyCover dyadicHeavyCubes(const ProjectedMeasure& pm, double M, const ShiftedGrid& grid);

// Cover regularization: each cover cube is replaced by its smallest ancestor
// containing a bin slot outside hPrime, then the maximal cubes are kept.
struct RegularizedCover {
    std::vector<GridCube> P;
    bool degenerate = false;  // some cube never exits hPrime up to the coarsest level
    double contentP = 0.0;    // sum of l(P)^t
    double contentQ = 0.0;    // sum of l(Q)^t over the input cover
    double constantC = 0.0;   // contentP / contentQ
};

RegularizedCover regularizeCover(const std::vector<GridCube>& cover,
                                 const std::set<std::array<int64_t, 2>>& hPrime,
                                 double binWidth, double t);

// F_M = cells whose projected bin has maximal function >= M, with the content
// bound content(F_M, n+2eps) vs M^{-1} ||nu_L||^2_{H^sigma}, sigma=(s-n-eps)/2.
struct HeavySetResult {
    DyadicSet fm;
    double content = 0.0;
    double bound = 0.0;
    double ratio = 0.0;
    bool degenerate = false;  // M <= 3^n mass
};

HeavySetResult heavySet(const DyadicSet& set, const DiscreteMeasure& measure,
                        const Frame& L, double M, double s, double epsilon);

// Per-scale slice statistics: fraction of position bins whose slice covering
// count exceeds delta^{-(s-n)-beta}.
struct SliceSpectrumRow {
    double scale = 0.0;
    double thresholdExponent = 0.0;
    double fractionHeavy = 0.0;
    uint64_t sliceCountP50 = 0;
    uint64_t sliceCountMax = 0;
};

std::vector<SliceSpectrumRow> sliceSpectrum(const DyadicSet& set, const Frame& L,
                                            double s, double beta,
                                            const std::vector<int>& levels);

std::string writeSliceSpectrumCsv(const std::vector<SliceSpectrumRow>& rows);

}  // namespace visifrac
