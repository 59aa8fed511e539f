#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "visifrac/measures.hpp"

namespace visifrac {

enum class Mode { regular, general };

// The exponent bundle. Regular mode: alpha = 1 - sqrt(6)/3 (the largest root
// allowed by -3a^2 + 6a - 1 <= 0), kappa = alpha/(1-alpha),
// tau = alpha(s-d+1) - 5 eps, sigma = (s-d+1-eps)/2. General mode:
// kappa = 1/6, tau = 1/6 - 5 eps, sigma = (1-tau-eps)/2.
struct Params {
    double s = 0.0;
    int d = 2;
    double epsilon = 0.0;
    int deltaLevel = 0;
    int DeltaLevel = 0;
    double delta = 0.0;
    double Delta = 0.0;  // dyadic, delta^kappa < Delta <= 2 delta^kappa
    double alpha = 0.0;
    double kappa = 0.0;
    double tau = 0.0;
    double sigma = 0.0;
    Mode mode = Mode::regular;
    bool scaleWarning = false;  // delta^epsilon > 1/2: delta not small for this epsilon
    bool tauWarning = false;    // tau <= 0: epsilon outside the decay regime
};

Params solveParameters(double s, int d, double epsilon, Mode mode, int deltaLevel);

// Width-gamma slab parallel to the direction: preimage of a gamma-cube of the
// standard dyadic grid on theta-perp coordinates.
struct Tube {
    Direction direction;
    int level = 0;  // width 2^-level
    std::array<int64_t, 2> idx{0, 0};

    double width() const { return std::ldexp(1.0, -level); }
};

// Tubes tiling the projection of [0,1]^d onto theta-perp.
std::vector<Tube> tubeFamily(const Direction& dir, int gammaLevel);

// Fixed incidence convention: a cell meets a tube iff its center projects
// into the base cube extended by half a cell diameter on each side.
bool cellMeetsTube(const Vec& center, double cellSize, const Tube& tube);

// Discrete visible part: a cell survives iff no other cell of the set is
// higher along theta by more than half a cell size within the same half-cell
// projection band (a superset of the cells meeting the continuum visible part).
DyadicSet visibleCells(const DyadicSet& set, const Direction& dir);

enum class TubeKind { light, heavy, heavyInQ, substantial };

// Covering-count threshold tests. light/heavyInQ/substantial expect delta
// tubes; heavy accepts any width. In general mode, pass the cells of the
// non-light cubes as `set` for light/substantial counts.
bool classifyTube(const Tube& tube, const DyadicSet& set, const Params& params,
                  TubeKind kind, const DyadicCube* Q = nullptr);

// Delta-tubes substantial for Q whose core (no tolerance band) misses the set
// inside the mode's halo of Q (3Q regular, Q general).
std::vector<Tube> badLines(const DyadicSet& set, const Direction& dir,
                           const Params& params, const DyadicCube& Q);

struct TubeStats {
    uint64_t tubes = 0;
    uint64_t lightTubes = 0;
    uint64_t heavyTubes = 0;  // across all widths
    uint64_t heavyInQPairs = 0;
    uint64_t substantialPairs = 0;
    uint64_t badTubes = 0;
    uint64_t tubesMissingSubstantialQ = 0;  // heavy tubes with no substantial coarse part
    uint64_t maxEqualFamily = 0;            // max #D^= over classified tubes
    uint64_t dLess = 0, dEqual = 0, dGreater = 0;
};

struct DecompositionReport {
    Params params;
    Vec theta;
    DyadicSet eh, el, eb, eg;
    double contentEh = 0.0, contentEl = 0.0, contentEb = 0.0, contentEg = 0.0;
    double contentVis = 0.0;
    double contentEgVis = 0.0;  // content of E_G intersected with the visible part
    TubeStats stats;
};

// The four-way partition with cell precedence H > L > B > G. General mode
// builds its Frostman measure at exponent d - tau internally.
DecompositionReport decompose(const DyadicSet& set, const Direction& dir,
                              const Params& params);

struct GoodCoveringCheck {
    uint64_t maxCount = 0;    // max over delta-tubes of N(vis & E_G & T, delta)
    double bound = 0.0;       // dominant term of the per-tube bound
    double maxRatio = 0.0;
};

GoodCoveringCheck goodPartCoveringCheck(const DecompositionReport& report,
                                        const DyadicSet& set, const Direction& dir,
                                        const Params& params);

struct HeavyPartsReport {
    DyadicSet ehPrime;   // tube-counting version
    DyadicSet qhUnion;
    DyadicSet ehTilde;   // maximal-function version
    DyadicSet qhTilde;
    double slackEh = 1.0;  // smallest factor making ehPrime fit under the
    double slackQh = 1.0;  // relaxed maximal-function threshold
    double contentEhPrime = 0.0;  // at exponent d-1+2 eps
    double contentEhStau = 0.0;   // eh' + qh union at s - tau
    double sobolevMuTheta = 0.0;
};

// Regular mode only: both characterizations of the heavy part and the
// measured slack in the discrete containment between them.
HeavyPartsReport maximalHeavyParts(const DyadicSet& set, const DiscreteMeasure& mu,
                                   const Direction& dir, const Params& params);

struct ExperimentRow {
    int deltaLevel = 0;
    int dirIndex = 0;
    Vec theta;
    double visContent = 0.0;
    double eh = 0.0, el = 0.0, eb = 0.0, egVis = 0.0;
};

struct ExperimentTable {
    std::vector<int> levels;
    std::vector<ExperimentRow> rows;
    std::vector<double> average;  // A(delta) per level: mean visContent
};

// Direction-averaged content experiment; setAt supplies the discretization of
// the same set at each working depth.
ExperimentTable directionAverageExperiment(
    const std::function<DyadicSet(int depth)>& setAt, double s, double epsilon,
    Mode mode, int directions, uint64_t seed, const std::vector<int>& levels,
    int jobs = 1);

// CSV: delta,direction,visContent,EH,EL,EB,EGvis
std::string writeExperimentCsv(const ExperimentTable& table);

// sampled directions shared by experiments: d=2 uniform angle, d=3
// area-uniform sphere, deterministic in the seed
std::vector<Direction> sampleDirections(int d, int count, uint64_t seed);

}  // namespace visifrac
