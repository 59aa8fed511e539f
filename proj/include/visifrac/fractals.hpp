#pragma once

#include <string>
#include <vector>

#include "visifrac/dyadic.hpp"

namespace visifrac {

// One similarity map x -> ratio * R(angle) * x + translation. Rotations are
// planar (about the z axis for d = 3); angle is in degrees.
struct SimilarityMap {
    double ratio = 0.5;
    Vec translation;
    double angleDeg = 0.0;
};

struct IFSSpec {
    int dim = 2;
    std::vector<SimilarityMap> maps;
    std::string name;

    void validate() const;  // ratios in (0,1), attractor inside [0,1]^d
};

// Exact root of sum ratio_i^s = 1 on (0, d], bisected to 1e-12.
double similarityDimension(const IFSSpec& spec);

// Cells at the given depth whose closed cube meets the attractor (outer
// approximation). Compositions with rotations that are not multiples of 90
// degrees fall back to point oversampling.
DyadicSet rasterizeIfs(const IFSSpec& spec, int depth);

struct RegularityReport {
    double exponent = 0.0;
    double cLow = 0.0;
    double cHigh = 0.0;
    int scalesTested = 0;
};

// Samples occupied cells and dyadic radii, measuring the two-sided Ahlfors
// regularity ratio cellCount(B(x,r)) * cellSize^s / r^s.
RegularityReport ahlforsConstants(const DyadicSet& set, double s, int sampleCenters,
                                  uint64_t seed);

// Named test sets spanning the s <= d-1, d-1 < s < d and s = d regimes.
// "cantor-product" (C x [0,1]) is generated directly, the rest are IFS-backed.
std::vector<std::string> builtinNames();
bool isBuiltin(const std::string& name);
IFSSpec builtinSpec(const std::string& name);  // throws for cantor-product
DyadicSet builtinSet(const std::string& name, int depth);
double builtinDimension(const std::string& name);

// key=value spec file: dim=, repeated map=r,tx,ty[,tz][,angle], name=
IFSSpec parseIfsFile(const std::string& text);

}  // namespace visifrac
