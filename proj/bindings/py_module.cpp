#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "visifrac/fractals.hpp"
#include "visifrac/slicing.hpp"
#include "visifrac/spectral.hpp"
#include "visifrac/visibility.hpp"

namespace py = pybind11;
using namespace visifrac;

namespace {

Vec toVec(const std::vector<double>& v) {
    if (v.size() < 1 || v.size() > 3) throw std::invalid_argument("vector must have 1..3 entries");
    Vec out(int(v.size()), 0.0);
    for (size_t i = 0; i < v.size(); ++i) out[int(i)] = v[i];
    return out;
}

Direction toDirection(const std::vector<double>& theta) {
    return Direction::fromVector(toVec(theta));
}

Frame lineFrame(const std::vector<double>& axis) {
    Frame L;
    const Vec a = toVec(axis);
    L.dim = a.dim;
    L.n = 1;
    const double len = norm(a);
    if (len <= 0.0) throw std::invalid_argument("zero axis");
    L.axes[0] = a * (1.0 / len);
    return L;
}

Mode toMode(const std::string& mode) {
    if (mode == "regular") return Mode::regular;
    if (mode == "general") return Mode::general;
    throw std::invalid_argument("mode must be regular or general");
}

py::dict paramsDict(const Params& p) {
    py::dict d;
    d["s"] = p.s;
    d["d"] = p.d;
    d["epsilon"] = p.epsilon;
    d["delta"] = p.delta;
    d["Delta"] = p.Delta;
    d["alpha"] = p.alpha;
    d["kappa"] = p.kappa;
    d["tau"] = p.tau;
    d["sigma"] = p.sigma;
    d["scale_warning"] = p.scaleWarning;
    d["tau_warning"] = p.tauWarning;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "dyadic visibility and slicing laboratory";

    py::class_<DyadicSet>(m, "DyadicSet")
        .def(py::init([](int dim, int depth, std::vector<uint64_t> codes) {
                 return DyadicSet(dim, depth, std::move(codes));
             }),
             py::arg("dim"), py::arg("depth"), py::arg("codes"))
        .def_property_readonly("dim", &DyadicSet::dim)
        .def_property_readonly("depth", &DyadicSet::depth)
        .def("__len__", &DyadicSet::size)
        .def("codes",
             [](const DyadicSet& s) {
                 return std::vector<uint64_t>(s.codes().begin(), s.codes().end());
             })
        .def("cell_coords",
             [](const DyadicSet& s) {
                 std::vector<std::vector<uint32_t>> out;
                 for (size_t i = 0; i < s.size(); ++i) {
                     const auto c = s.cellCoords(i);
                     out.emplace_back(c.begin(), c.begin() + s.dim());
                 }
                 return out;
             })
        .def("__repr__", [](const DyadicSet& s) {
            return "DyadicSet(dim=" + std::to_string(s.dim()) +
                   ", depth=" + std::to_string(s.depth()) +
                   ", cells=" + std::to_string(s.size()) + ")";
        });

    py::class_<DiscreteMeasure>(m, "DiscreteMeasure")
        .def_readonly("weights", &DiscreteMeasure::weights)
        .def_readonly("total_mass", &DiscreteMeasure::totalMass)
        .def_property_readonly("support",
                               [](const DiscreteMeasure& m_) { return m_.support; });

    m.def("builtin_names", &builtinNames);
    m.def("builtin_set", &builtinSet, py::arg("name"), py::arg("depth"));
    m.def("builtin_dimension", &builtinDimension, py::arg("name"));
    m.def("parse_dyset", &parseDyset);
    m.def("write_dyset", &writeDyset);

    m.def("dyadic_content", &dyadicContent, py::arg("set"), py::arg("s"));
    m.def("covering_number", &coveringNumber, py::arg("set"), py::arg("level"));
    m.def(
        "box_dimension_fit",
        [](const std::vector<std::pair<double, uint64_t>>& counts) {
            const BoxFit fit = boxDimensionFit(counts);
            py::dict d;
            d["slope"] = fit.slope;
            d["residual"] = fit.residual;
            return d;
        },
        py::arg("scale_counts"));
    m.def("calibrate_grid_constant", &calibrateGridConstant, py::arg("n"),
          py::arg("trials"), py::arg("seed"));

    m.def("natural_measure", &naturalMeasure, py::arg("set"), py::arg("s"));
    m.def("frostman_dyadic", &frostmanDyadic, py::arg("set"), py::arg("t"));
    m.def("riesz_energy", &rieszEnergy, py::arg("measure"), py::arg("s"));

    m.def(
        "visible_cells",
        [](const DyadicSet& set, const std::vector<double>& theta) {
            return visibleCells(set, toDirection(theta));
        },
        py::arg("set"), py::arg("theta"));

    m.def(
        "solve_parameters",
        [](double s, int d, double epsilon, const std::string& mode, int deltaLevel) {
            return paramsDict(solveParameters(s, d, epsilon, toMode(mode), deltaLevel));
        },
        py::arg("s"), py::arg("d"), py::arg("epsilon"), py::arg("mode"),
        py::arg("delta_level"));

    m.def(
        "decompose",
        [](const DyadicSet& set, const std::vector<double>& theta, double s,
           double epsilon, const std::string& mode) {
            const Params p =
                solveParameters(s, set.dim(), epsilon, toMode(mode), set.depth());
            const DecompositionReport rep = decompose(set, toDirection(theta), p);
            py::dict d;
            d["params"] = paramsDict(rep.params);
            d["EH"] = rep.eh;
            d["EL"] = rep.el;
            d["EB"] = rep.eb;
            d["EG"] = rep.eg;
            d["content_EH"] = rep.contentEh;
            d["content_EL"] = rep.contentEl;
            d["content_EB"] = rep.contentEb;
            d["content_EG"] = rep.contentEg;
            d["content_vis"] = rep.contentVis;
            d["content_EG_vis"] = rep.contentEgVis;
            py::dict st;
            st["tubes"] = rep.stats.tubes;
            st["light_tubes"] = rep.stats.lightTubes;
            st["heavy_tubes"] = rep.stats.heavyTubes;
            st["bad_tubes"] = rep.stats.badTubes;
            st["missing_substantial"] = rep.stats.tubesMissingSubstantialQ;
            st["max_equal_family"] = rep.stats.maxEqualFamily;
            d["stats"] = st;
            return d;
        },
        py::arg("set"), py::arg("theta"), py::arg("s"), py::arg("epsilon"),
        py::arg("mode") = "regular");

    m.def(
        "heavy_set",
        [](const DyadicSet& set, const DiscreteMeasure& measure,
           const std::vector<double>& axis, double M, double s, double epsilon) {
            const HeavySetResult r = heavySet(set, measure, lineFrame(axis), M, s, epsilon);
            py::dict d;
            d["fm"] = r.fm;
            d["content"] = r.content;
            d["bound"] = r.bound;
            d["ratio"] = r.ratio;
            d["degenerate"] = r.degenerate;
            return d;
        },
        py::arg("set"), py::arg("measure"), py::arg("axis"), py::arg("M"), py::arg("s"),
        py::arg("epsilon"));

    m.def(
        "slice_spectrum",
        [](const DyadicSet& set, const std::vector<double>& axis, double s, double beta,
           const std::vector<int>& levels) {
            std::vector<py::dict> out;
            for (const SliceSpectrumRow& r : sliceSpectrum(set, lineFrame(axis), s, beta, levels)) {
                py::dict d;
                d["scale"] = r.scale;
                d["threshold_exponent"] = r.thresholdExponent;
                d["fraction_heavy"] = r.fractionHeavy;
                d["slice_count_p50"] = r.sliceCountP50;
                d["slice_count_max"] = r.sliceCountMax;
                out.push_back(d);
            }
            return out;
        },
        py::arg("set"), py::arg("axis"), py::arg("s"), py::arg("beta"), py::arg("levels"));

    m.def(
        "direction_average_experiment",
        [](const std::string& builtin, double s, double epsilon, const std::string& mode,
           int directions, uint64_t seed, const std::vector<int>& levels, int jobs) {
            const ExperimentTable t = directionAverageExperiment(
                [&](int depth) { return builtinSet(builtin, depth); }, s, epsilon,
                toMode(mode), directions, seed, levels, jobs);
            py::dict d;
            d["levels"] = t.levels;
            d["average"] = t.average;
            d["csv"] = writeExperimentCsv(t);
            return d;
        },
        py::arg("builtin"), py::arg("s"), py::arg("epsilon"), py::arg("mode"),
        py::arg("directions"), py::arg("seed"), py::arg("levels"), py::arg("jobs") = 1);

    m.def(
        "direction_average_sobolev",
        [](const DiscreteMeasure& measure, double sigma, int directions, uint64_t seed,
           double frostmanT) {
            const DirectionAverage a =
                directionAverageSobolev(measure, sigma, directions, seed, frostmanT);
            py::dict d;
            d["mean"] = a.mean;
            d["per_direction"] = a.perDirection;
            d["warned"] = a.warned;
            return d;
        },
        py::arg("measure"), py::arg("sigma"), py::arg("directions"), py::arg("seed"),
        py::arg("frostman_t") = -1.0);
}
