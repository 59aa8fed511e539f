#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "visifrac/fractals.hpp"
#include "visifrac/rng.hpp"
#include "visifrac/slicing.hpp"
#include "visifrac/spectral.hpp"
#include "visifrac/visibility.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ResolutionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int depthCap(int dim) { return dim == 1 ? 20 : dim == 2 ? 14 : 9; }

std::string readFile(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// temp file + rename so interrupted runs never leave partial outputs
void atomicWrite(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw ConfigError("cannot write file: " + path.string());
        out << content;
    }
    fs::rename(tmp, path);
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string digestHex(const std::string& s) {
    std::ostringstream out;
    out << std::hex << fnv1a(s);
    return out.str();
}

std::vector<std::string> splitList(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

// "2^-6" or an exact power of two like 0.015625
int parseDyadicLevel(const std::string& tok) {
    if (tok.rfind("2^-", 0) == 0) {
        const int k = std::stoi(tok.substr(3));
        if (k < 1) throw ResolutionError("delta must be below 1: " + tok);
        return k;
    }
    const double v = std::stod(tok);
    if (!(v > 0.0 && v < 1.0)) throw ResolutionError("delta out of range: " + tok);
    const double l = -std::log2(v);
    const int k = int(std::lround(l));
    if (std::abs(l - double(k)) > 1e-9)
        throw ResolutionError("delta is not dyadic: " + tok);
    return k;
}

visifrac::DyadicSet loadSet(const std::string& builtin, const std::string& ifsPath,
                            const std::string& dysetPath, int depth) {
    using namespace visifrac;
    const int sources = int(!builtin.empty()) + int(!ifsPath.empty()) + int(!dysetPath.empty());
    if (sources != 1)
        throw ConfigError("exactly one of --builtin, --ifs, --in must be given");
    if (!dysetPath.empty()) return parseDyset(readFile(dysetPath));
    if (!builtin.empty()) {
        if (!isBuiltin(builtin)) {
            std::string names;
            for (const auto& n : builtinNames()) names += " " + n;
            throw ConfigError("unknown builtin '" + builtin + "'; available:" + names);
        }
        const int dim = builtin == "sponge" ? 3 : 2;
        if (depth < 1 || depth > depthCap(dim))
            throw ResolutionError("depth out of range for dim " + std::to_string(dim));
        return builtinSet(builtin, depth);
    }
    const IFSSpec spec = parseIfsFile(readFile(ifsPath));
    if (depth < 1 || depth > depthCap(spec.dim))
        throw ResolutionError("depth out of range for dim " + std::to_string(spec.dim));
    return rasterizeIfs(spec, depth);
}

visifrac::Direction parseDirection(int dim, double angleDeg, const std::string& theta) {
    using namespace visifrac;
    if (!theta.empty()) {
        const auto parts = splitList(theta);
        if (int(parts.size()) != dim)
            throw ConfigError("--theta needs " + std::to_string(dim) + " components");
        Vec v(dim, 0.0);
        for (int i = 0; i < dim; ++i) v[i] = std::stod(parts[size_t(i)]);
        return Direction::fromVector(v);
    }
    if (dim != 2) throw ConfigError("--angle only applies to d=2; use --theta");
    return Direction::fromAngle(angleDeg * 3.14159265358979323846 / 180.0);
}

double resolveS(const std::string& sSpec, const std::string& builtin,
                const std::string& ifsPath) {
    using namespace visifrac;
    if (sSpec != "similarity") return std::stod(sSpec);
    if (!builtin.empty()) return builtinDimension(builtin);
    if (!ifsPath.empty()) return similarityDimension(parseIfsFile(readFile(ifsPath)));
    throw ConfigError("s=similarity needs a builtin or IFS source");
}

// plain key=value file; later keys win, flags override afterwards
std::map<std::string, std::string> parseKeyValue(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line is not key=value: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

struct ExperimentConfig {
    std::string kind;
    std::string builtin, ifsPath, dysetPath;
    int depth = 8;
    visifrac::Mode mode = visifrac::Mode::regular;
    std::string sSpec = "similarity";
    double epsilon = 0.05;
    std::vector<int> deltaLevels;
    int directions = 16;
    uint64_t seed = 1;
    std::string outDir = "out";
    double beta = 0.1;
    double sigma = 0.25;
    int calibN = 1;
    int calibTrials = 10000;
    int jobs = 1;

    static ExperimentConfig fromMap(const std::map<std::string, std::string>& kv);
    json snapshot() const;
};

ExperimentConfig ExperimentConfig::fromMap(const std::map<std::string, std::string>& kv) {
    ExperimentConfig c;
    static const std::set<std::string> known = {
        "kind",   "source", "depth",  "mode", "s",      "epsilon", "deltas",
        "directions", "seed", "out",  "beta", "sigma",  "n",       "trials",
        "jobs"};
    for (const auto& [k, v] : kv)
        if (!known.count(k)) throw ConfigError("unknown config key: " + k);
    auto get = [&](const std::string& k) -> const std::string* {
        const auto it = kv.find(k);
        return it == kv.end() ? nullptr : &it->second;
    };
    if (const auto* v = get("kind")) c.kind = *v;
    if (const auto* v = get("source")) {
        if (v->rfind("builtin:", 0) == 0) c.builtin = v->substr(8);
        else if (v->rfind("ifs:", 0) == 0) c.ifsPath = v->substr(4);
        else if (v->rfind("dyset:", 0) == 0) c.dysetPath = v->substr(6);
        else throw ConfigError("source must be builtin:|ifs:|dyset: prefixed, got " + *v);
    }
    if (const auto* v = get("depth")) c.depth = std::stoi(*v);
    if (const auto* v = get("mode")) {
        if (*v == "regular") c.mode = visifrac::Mode::regular;
        else if (*v == "general") c.mode = visifrac::Mode::general;
        else throw ConfigError("mode must be regular or general, got " + *v);
    }
    if (const auto* v = get("s")) c.sSpec = *v;
    if (const auto* v = get("epsilon")) c.epsilon = std::stod(*v);
    if (const auto* v = get("deltas"))
        for (const auto& tok : splitList(*v)) c.deltaLevels.push_back(parseDyadicLevel(tok));
    if (const auto* v = get("directions")) c.directions = std::stoi(*v);
    if (const auto* v = get("seed")) c.seed = std::stoull(*v);
    if (const auto* v = get("out")) c.outDir = *v;
    if (const auto* v = get("beta")) c.beta = std::stod(*v);
    if (const auto* v = get("sigma")) c.sigma = std::stod(*v);
    if (const auto* v = get("n")) c.calibN = std::stoi(*v);
    if (const auto* v = get("trials")) c.calibTrials = std::stoi(*v);
    if (const auto* v = get("jobs")) c.jobs = std::stoi(*v);
    return c;
}

json ExperimentConfig::snapshot() const {
    json j;
    j["kind"] = kind;
    if (!builtin.empty()) j["source"] = "builtin:" + builtin;
    if (!ifsPath.empty()) j["source"] = "ifs:" + ifsPath;
    if (!dysetPath.empty()) j["source"] = "dyset:" + dysetPath;
    j["depth"] = depth;
    j["mode"] = mode == visifrac::Mode::regular ? "regular" : "general";
    j["s"] = sSpec;
    j["epsilon"] = epsilon;
    j["deltas"] = deltaLevels;
    j["directions"] = directions;
    j["seed"] = seed;
    j["out"] = outDir;
    j["beta"] = beta;
    j["sigma"] = sigma;
    j["n"] = calibN;
    j["trials"] = calibTrials;
    return j;
}

// one record per run, appended as a JSON line
void appendRunRecord(const ExperimentConfig& c, double wallSeconds,
                     const std::map<std::string, std::string>& outputs,
                     const json& series) {
    json rec;
    rec["config"] = c.snapshot();
    rec["version"] = kVersion;
    rec["wallSeconds"] = wallSeconds;
    rec["seed"] = c.seed;
    json digests = json::object();
    for (const auto& [name, content] : outputs) digests[name] = digestHex(content);
    rec["digests"] = digests;
    rec["series"] = series;
    const fs::path index = fs::path(c.outDir) / "index.jsonl";
    fs::create_directories(c.outDir);
    std::ofstream out(index, std::ios::app);
    out << rec.dump() << "\n";
}

int runExperiment(ExperimentConfig c) {
    using namespace visifrac;
    const auto t0 = std::chrono::steady_clock::now();
    std::map<std::string, std::string> outputs;
    json series = json::array();

    if (c.kind == "calibrate") {
        const double cstar = calibrateGridConstant(c.calibN, c.calibTrials, c.seed);
        json j;
        j["n"] = c.calibN;
        j["trials"] = c.calibTrials;
        j["seed"] = c.seed;
        j["cStar"] = cstar;
        outputs["calibration.json"] = j.dump(2) + "\n";
        std::cout << "c* = " << cstar << "\n";
        series.push_back({double(c.calibN), cstar});
    } else if (c.kind == "vis-average") {
        if (c.deltaLevels.empty()) throw ConfigError("vis-average needs deltas");
        const double s = resolveS(c.sSpec, c.builtin, c.ifsPath);
        auto setAt = [&](int depth) {
            return loadSet(c.builtin, c.ifsPath, c.dysetPath, depth);
        };
        const ExperimentTable table = directionAverageExperiment(
            setAt, s, c.epsilon, c.mode, c.directions, c.seed, c.deltaLevels, c.jobs);
        outputs["visavg.csv"] = writeExperimentCsv(table);
        std::ostringstream avg;
        avg.precision(17);
        avg << "delta,A\n";
        for (size_t i = 0; i < table.levels.size(); ++i) {
            const double delta = std::ldexp(1.0, -table.levels[i]);
            avg << delta << "," << table.average[i] << "\n";
            series.push_back({delta, table.average[i]});
        }
        outputs["visavg_mean.csv"] = avg.str();
    } else if (c.kind == "decompose") {
        if (c.deltaLevels.empty()) throw ConfigError("decompose needs deltas");
        const double s = resolveS(c.sSpec, c.builtin, c.ifsPath);
        std::ostringstream csv;
        csv.precision(17);
        csv << "delta,direction,EH,EL,EB,EG,vis,EGvis\n";
        for (int level : c.deltaLevels) {
            const DyadicSet set = loadSet(c.builtin, c.ifsPath, c.dysetPath, level);
            const Params params = solveParameters(s, set.dim(), c.epsilon, c.mode, level);
            const auto dirs = sampleDirections(set.dim(), c.directions, c.seed);
            double sum = 0.0;
            for (int i = 0; i < c.directions; ++i) {
                const DecompositionReport rep = decompose(set, dirs[size_t(i)], params);
                csv << params.delta << "," << i << "," << rep.contentEh << ","
                    << rep.contentEl << "," << rep.contentEb << "," << rep.contentEg
                    << "," << rep.contentVis << "," << rep.contentEgVis << "\n";
                sum += rep.contentVis;
            }
            series.push_back({params.delta, sum / double(c.directions)});
        }
        outputs["decomp.csv"] = csv.str();
    } else if (c.kind == "slice-spectrum") {
        if (c.deltaLevels.empty()) throw ConfigError("slice-spectrum needs deltas");
        const double s = resolveS(c.sSpec, c.builtin, c.ifsPath);
        const int depth = *std::max_element(c.deltaLevels.begin(), c.deltaLevels.end());
        const DyadicSet set = loadSet(c.builtin, c.ifsPath, c.dysetPath, depth);
        const auto dirs = sampleDirections(set.dim(), c.directions, c.seed);
        std::ostringstream csv;
        csv.precision(17);
        csv << "direction,scale,thresholdExponent,fractionHeavy,sliceCountP50,"
               "sliceCountMax\n";
        std::map<double, double> perScale;
        for (int i = 0; i < c.directions; ++i) {
            Frame L;
            L.dim = set.dim();
            L.n = 1;
            L.axes[0] = dirs[size_t(i)].unit;
            const auto rows = sliceSpectrum(set, L, s, c.beta, c.deltaLevels);
            for (const auto& r : rows) {
                csv << i << "," << r.scale << "," << r.thresholdExponent << ","
                    << r.fractionHeavy << "," << r.sliceCountP50 << ","
                    << r.sliceCountMax << "\n";
                perScale[r.scale] += r.fractionHeavy;
            }
        }
        outputs["slicespec.csv"] = csv.str();
        for (const auto& [scale, total] : perScale)
            series.push_back({scale, total / double(c.directions)});
    } else if (c.kind == "heavy-set") {
        const double s = resolveS(c.sSpec, c.builtin, c.ifsPath);
        const DyadicSet set = loadSet(c.builtin, c.ifsPath, c.dysetPath, c.depth);
        const DiscreteMeasure mu = frostmanDyadic(set, s);
        const auto dirs = sampleDirections(set.dim(), 1, c.seed);
        Frame L;
        L.dim = set.dim();
        L.n = 1;
        L.axes[0] = dirs[0].unit;
        std::ostringstream csv;
        csv.precision(17);
        csv << "M,content,bound,ratio,degenerate\n";
        for (int j = 0; j <= 6; ++j) {
            const double M = std::ldexp(3.0 * mu.totalMass, j);
            const HeavySetResult r = heavySet(set, mu, L, M, s, c.epsilon);
            csv << M << "," << r.content << "," << r.bound << "," << r.ratio << ","
                << (r.degenerate ? 1 : 0) << "\n";
            series.push_back({M, r.content});
        }
        outputs["heavyset.csv"] = csv.str();
    } else if (c.kind == "sobolev-average") {
        const double s = resolveS(c.sSpec, c.builtin, c.ifsPath);
        const DyadicSet set = loadSet(c.builtin, c.ifsPath, c.dysetPath, c.depth);
        const DiscreteMeasure mu = frostmanDyadic(set, s);
        const DirectionAverage avg =
            directionAverageSobolev(mu, c.sigma, c.directions, c.seed, s);
        outputs["sobolev.csv"] = writeDirectionAverageCsv(avg);
        series.push_back({c.sigma, avg.mean});
        if (avg.warned)
            std::cerr << "WARN: sigma at or above the finiteness threshold for this s\n";
    } else {
        throw ConfigError("unknown experiment kind: " + c.kind);
    }

    for (const auto& [name, content] : outputs)
        atomicWrite(fs::path(c.outDir) / name, content);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    appendRunRecord(c, wall, outputs, series);
    std::cerr << "wrote " << outputs.size() << " file(s) to " << c.outDir << "\n";
    return 0;
}

struct Fit {
    double slope = 0.0;
    double intercept = 0.0;
    bool ok = false;
};

Fit leastSquares(const std::vector<std::pair<double, double>>& pts) {
    Fit f;
    if (pts.size() < 2) return f;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [x, y] : pts) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = double(pts.size());
    const double den = n * sxx - sx * sx;
    if (den == 0.0) return f;
    f.slope = (n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / n;
    f.ok = true;
    return f;
}

int runSummarize(const std::string& indexPath) {
    std::ifstream in(indexPath);
    if (!in) throw ConfigError("missing index: " + indexPath);
    std::map<std::string, std::vector<std::pair<double, double>>> byKind;
    std::string line;
    size_t runs = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json rec = json::parse(line);
        ++runs;
        const std::string kind = rec["config"]["kind"];
        for (const auto& pt : rec["series"])
            byKind[kind].emplace_back(pt[0].get<double>(), pt[1].get<double>());
    }
    json summary;
    summary["runs"] = runs;
    summary["kinds"] = json::object();
    // optional stored baselines: kind -> expected level constant
    json baselines = json::object();
    const fs::path basePath = fs::path(indexPath).parent_path() / "baselines.json";
    if (fs::exists(basePath)) baselines = json::parse(readFile(basePath));
    std::cout << "kind                 points  monotone  slope(log-log)  constant\n";
    for (auto& [kind, pts] : byKind) {
        std::sort(pts.begin(), pts.end());
        bool dec = true, inc = true;
        std::vector<std::pair<double, double>> logs;
        double constant = 0.0;
        for (size_t i = 0; i < pts.size(); ++i) {
            if (i > 0) {
                if (pts[i].second > pts[i - 1].second) dec = false;
                if (pts[i].second < pts[i - 1].second) inc = false;
            }
            if (pts[i].first > 0.0 && pts[i].second > 0.0)
                logs.emplace_back(std::log(pts[i].first), std::log(pts[i].second));
            constant = std::max(constant, pts[i].second);
        }
        const Fit f = leastSquares(logs);
        json k;
        k["points"] = pts.size();
        k["monotone"] = dec ? "decreasing" : inc ? "increasing" : "mixed";
        k["slope"] = f.ok ? f.slope : 0.0;
        k["constant"] = constant;
        std::ostringstream row;
        row.precision(6);
        row.setf(std::ios::left);
        row.width(21);
        row << kind;
        std::cout << row.str() << pts.size() << "       "
                  << (dec ? "dec" : inc ? "inc" : "mixed") << "     ";
        if (f.ok) std::cout << f.slope;
        else std::cout << "n/a";
        std::cout << "          " << constant << "\n";
        if (baselines.contains(kind)) {
            const double base = baselines[kind].get<double>();
            k["baseline"] = base;
            if (base > 0.0 && (constant > 2.0 * base || constant < 0.5 * base)) {
                std::cout << "WARN: " << kind << " constant " << constant
                          << " drifted more than 2x from baseline " << base << "\n";
                k["drift"] = true;
            }
        }
        summary["kinds"][kind] = k;
    }
    atomicWrite(fs::path(indexPath).parent_path() / "summary.json",
                summary.dump(2) + "\n");
    return 0;
}

int defaultJobs() {
    if (const char* env = std::getenv("VISIFRAC_JOBS")) {
        const int j = std::atoi(env);
        if (j >= 1) return j;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace visifrac;
    CLI::App app{"visifrac: visible parts and slices of fractal sets"};
    app.require_subcommand(1);

    std::string builtin, ifsPath, dysetPath, outPath, pgmPath, theta, sSpec = "similarity";
    std::string configPath, indexPath, modeStr = "regular", levelsStr;
    int depth = 8, directionsN = 8, cutoff = 0, calibN = 1, calibTrials = 10000;
    int jobs = defaultJobs();
    double angleDeg = 90.0, epsilon = 0.05, beta = 0.1, sigma = 0.25, bigM = 0.0;
    uint64_t seed = 1;

    auto addSource = [&](CLI::App* cmd) {
        cmd->add_option("--builtin", builtin, "builtin set name");
        cmd->add_option("--ifs", ifsPath, "IFS spec file");
        cmd->add_option("--in", dysetPath, "DYSET1 input file");
        cmd->add_option("--depth", depth, "dyadic depth");
    };
    auto addDirection = [&](CLI::App* cmd) {
        cmd->add_option("--angle", angleDeg, "direction angle in degrees (d=2)");
        cmd->add_option("--theta", theta, "direction vector, comma separated");
    };

    CLI::App* gen = app.add_subcommand("gen", "generate a dyadic set");
    addSource(gen);
    gen->add_option("--out", outPath, "DYSET1 output")->required();
    gen->add_option("--pgm", pgmPath, "also write a PGM raster (d=2)");

    CLI::App* vis = app.add_subcommand("vis", "visible part of a set");
    addSource(vis);
    addDirection(vis);
    vis->add_option("--out", outPath, "DYSET1 output")->required();
    vis->add_option("--pgm", pgmPath, "also write a PGM raster (d=2)");

    CLI::App* dim = app.add_subcommand("dim", "box dimension fit");
    addSource(dim);

    CLI::App* decomp = app.add_subcommand("decomp", "four-way visibility decomposition");
    addSource(decomp);
    addDirection(decomp);
    decomp->add_option("--s", sSpec, "content exponent or 'similarity'");
    decomp->add_option("--epsilon", epsilon, "epsilon");
    decomp->add_option("--mode", modeStr, "regular|general");
    decomp->add_option("--out", outPath, "JSON output (default stdout)");

    CLI::App* slice = app.add_subcommand("slice", "slice spectrum");
    addSource(slice);
    addDirection(slice);
    slice->add_option("--s", sSpec, "content exponent or 'similarity'");
    slice->add_option("--beta", beta, "threshold offset");
    slice->add_option("--levels", levelsStr, "comma separated dyadic scales");
    slice->add_option("--out", outPath, "CSV output (default stdout)");

    CLI::App* heavy = app.add_subcommand("heavy", "heavy part of a projection");
    addSource(heavy);
    addDirection(heavy);
    heavy->add_option("--s", sSpec, "measure exponent or 'similarity'");
    heavy->add_option("--epsilon", epsilon, "epsilon");
    heavy->add_option("--M", bigM, "maximal-function threshold (default 3x mass)");
    heavy->add_option("--out", outPath, "JSON output (default stdout)");

    CLI::App* sobolev = app.add_subcommand("sobolev", "direction-averaged Sobolev norms");
    addSource(sobolev);
    sobolev->add_option("--s", sSpec, "measure exponent or 'similarity'");
    sobolev->add_option("--sigma", sigma, "Sobolev exponent");
    sobolev->add_option("--directions", directionsN, "direction count");
    sobolev->add_option("--seed", seed, "PRNG seed");
    sobolev->add_option("--out", outPath, "CSV output (default stdout)");

    CLI::App* energy = app.add_subcommand("energy", "Riesz energy and lattice check");
    addSource(energy);
    energy->add_option("--s", sSpec, "energy exponent or 'similarity'");
    energy->add_option("--cutoff", cutoff, "frequency cutoff for the lattice check");
    energy->add_option("--out", outPath, "JSON output (default stdout)");

    CLI::App* calibrate = app.add_subcommand("calibrate", "shifted-grid constant");
    calibrate->add_option("--n", calibN, "ambient dimension of the grid");
    calibrate->add_option("--trials", calibTrials, "sample count");
    calibrate->add_option("--seed", seed, "PRNG seed");
    calibrate->add_option("--out", outPath, "JSON output (default stdout)");

    CLI::App* experiment = app.add_subcommand("experiment", "run a configured experiment");
    experiment->add_option("--config", configPath, "key=value config file");
    std::string ovKind, ovSource, ovS, ovDeltas, ovOut;
    int ovDepth = -1, ovDirections = -1;
    double ovEpsilon = -1.0;
    bool haveSeed = false;
    experiment->add_option("--kind", ovKind, "experiment kind override");
    experiment->add_option("--source", ovSource, "source override");
    experiment->add_option("--depth", ovDepth, "depth override");
    experiment->add_option("--mode", modeStr, "mode override");
    experiment->add_option("--s", ovS, "exponent override");
    experiment->add_option("--epsilon", ovEpsilon, "epsilon override");
    experiment->add_option("--deltas", ovDeltas, "delta list override");
    experiment->add_option("--directions", ovDirections, "direction count override");
    experiment->add_option("--seed", seed, "seed override")
        ->each([&](const std::string&) { haveSeed = true; });
    experiment->add_option("--out", ovOut, "output directory override");
    experiment->add_option("--jobs", jobs, "parallel jobs (default VISIFRAC_JOBS or 1)");

    CLI::App* summarize = app.add_subcommand("summarize", "summarize a run index");
    summarize->add_option("--index", indexPath, "index.jsonl path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        auto emit = [&](const std::string& content) {
            if (outPath.empty()) std::cout << content;
            else atomicWrite(outPath, content);
        };
        if (gen->parsed()) {
            const DyadicSet set = loadSet(builtin, ifsPath, dysetPath, depth);
            emit(writeDyset(set));
            if (!pgmPath.empty()) atomicWrite(pgmPath, writePgm(set));
        } else if (vis->parsed()) {
            const DyadicSet set = loadSet(builtin, ifsPath, dysetPath, depth);
            const Direction dir = parseDirection(set.dim(), angleDeg, theta);
            const DyadicSet v = visibleCells(set, dir);
            emit(writeDyset(v));
            if (!pgmPath.empty()) atomicWrite(pgmPath, writePgm(v));
        } else if (dim->parsed()) {
            const DyadicSet set = loadSet(builtin, ifsPath, dysetPath, depth);
            std::vector<std::pair<double, uint64_t>> counts;
            for (int j = 1; j <= set.depth(); ++j)
                counts.emplace_back(std::ldexp(1.0, -j), coveringNumber(set, j));
            const BoxFit fit = boxDimensionFit(counts);
            json j;
            j["dimension"] = fit.slope;
            j["residual"] = fit.residual;
            j["cells"] = set.size();
            std::cout << j.dump(2) << "\n";
        } else if (decomp->parsed()) {
            const DyadicSet set = loadSet(builtin, ifsPath, dysetPath, depth);
            const double s = resolveS(sSpec, builtin, ifsPath);
            const Mode mode = modeStr == "general" ? Mode::general : Mode::regular;
            const Params params = solveParameters(s, set.dim(), epsilon, mode, depth);
            if (params.scaleWarning)
                std::cerr << "WARN: delta^epsilon > 1/2; scale too coarse for epsilon\n";
            const Direction dir = parseDirection(set.dim(), angleDeg, theta);
            const DecompositionReport rep = decompose(set, dir, params);
            json j;
            j["delta"] = params.delta;
            j["Delta"] = params.Delta;
            j["tau"] = params.tau;
            j["contentEH"] = rep.contentEh;
            j["contentEL"] = rep.contentEl;
            j["contentEB"] = rep.contentEb;
            j["contentEG"] = rep.contentEg;
            j["contentVis"] = rep.contentVis;
            j["contentEGvis"] = rep.contentEgVis;
            j["cells"] = {{"EH", rep.eh.size()},
                          {"EL", rep.el.size()},
                          {"EB", rep.eb.size()},
                          {"EG", rep.eg.size()}};
            j["stats"] = {{"tubes", rep.stats.tubes},
                          {"lightTubes", rep.stats.lightTubes},
                          {"heavyTubes", rep.stats.heavyTubes},
                          {"heavyInQPairs", rep.stats.heavyInQPairs},
                          {"substantialPairs", rep.stats.substantialPairs},
                          {"badTubes", rep.stats.badTubes},
                          {"missingSubstantial", rep.stats.tubesMissingSubstantialQ},
                          {"maxEqualFamily", rep.stats.maxEqualFamily}};
            emit(j.dump(2) + "\n");
        } else if (slice->parsed()) {
            const DyadicSet set = loadSet(builtin, ifsPath, dysetPath, depth);
            const double s = resolveS(sSpec, builtin, ifsPath);
            const Direction dir = parseDirection(set.dim(), angleDeg, theta);
            std::vector<int> levels;
            if (levelsStr.empty()) levels.push_back(set.depth());
            else
                for (const auto& tok : splitList(levelsStr))
                    levels.push_back(parseDyadicLevel(tok));
            Frame L;
            L.dim = set.dim();
            L.n = 1;
            L.axes[0] = dir.unit;
            emit(writeSliceSpectrumCsv(sliceSpectrum(set, L, s, beta, levels)));
        } else if (heavy->parsed()) {
            const DyadicSet set = loadSet(builtin, ifsPath, dysetPath, depth);
            const double s = resolveS(sSpec, builtin, ifsPath);
            const Direction dir = parseDirection(set.dim(), angleDeg, theta);
            const DiscreteMeasure mu = frostmanDyadic(set, s);
            const double M = bigM > 0.0 ? bigM : 3.0 * mu.totalMass * 2.0;
            Frame L;
            L.dim = set.dim();
            L.n = 1;
            L.axes[0] = dir.unit;
            const HeavySetResult r = heavySet(set, mu, L, M, s, epsilon);
            json j;
            j["M"] = M;
            j["cells"] = r.fm.size();
            j["content"] = r.content;
            j["bound"] = r.bound;
            j["ratio"] = r.ratio;
            j["degenerate"] = r.degenerate;
            emit(j.dump(2) + "\n");
        } else if (sobolev->parsed()) {
            const DyadicSet set = loadSet(builtin, ifsPath, dysetPath, depth);
            const double s = resolveS(sSpec, builtin, ifsPath);
            const DiscreteMeasure mu = frostmanDyadic(set, s);
            const DirectionAverage avg =
                directionAverageSobolev(mu, sigma, directionsN, seed, s);
            if (avg.warned)
                std::cerr << "WARN: sigma at or above the finiteness threshold\n";
            emit(writeDirectionAverageCsv(avg));
        } else if (energy->parsed()) {
            const DyadicSet set = loadSet(builtin, ifsPath, dysetPath, depth);
            const double s = resolveS(sSpec, builtin, ifsPath);
            const DiscreteMeasure mu = frostmanDyadic(set, s);
            json j;
            j["s"] = s;
            j["energy"] = rieszEnergy(mu, s);
            if (cutoff > 0) {
                const EnergyFourierResult r = energyFourierCheck(mu, s, cutoff);
                j["latticeSum"] = r.latticeSum;
                j["ratio"] = r.ratio;
                j["flagged"] = r.flagged;
            }
            emit(j.dump(2) + "\n");
        } else if (calibrate->parsed()) {
            const double cstar = calibrateGridConstant(calibN, calibTrials, seed);
            json j;
            j["n"] = calibN;
            j["trials"] = calibTrials;
            j["seed"] = seed;
            j["cStar"] = cstar;
            std::cout << "c* = " << cstar << "\n";
            if (!outPath.empty()) atomicWrite(outPath, j.dump(2) + "\n");
        } else if (experiment->parsed()) {
            std::map<std::string, std::string> kv;
            if (!configPath.empty()) kv = parseKeyValue(readFile(configPath));
            // flags win over file keys
            if (!ovKind.empty()) kv["kind"] = ovKind;
            if (!ovSource.empty()) kv["source"] = ovSource;
            if (ovDepth >= 0) kv["depth"] = std::to_string(ovDepth);
            if (experiment->count("--mode")) kv["mode"] = modeStr;
            if (!ovS.empty()) kv["s"] = ovS;
            if (ovEpsilon >= 0.0) kv["epsilon"] = std::to_string(ovEpsilon);
            if (!ovDeltas.empty()) kv["deltas"] = ovDeltas;
            if (ovDirections >= 0) kv["directions"] = std::to_string(ovDirections);
            if (haveSeed) kv["seed"] = std::to_string(seed);
            if (!ovOut.empty()) kv["out"] = ovOut;
            ExperimentConfig c = ExperimentConfig::fromMap(kv);
            if (experiment->count("--jobs") || std::getenv("VISIFRAC_JOBS")) c.jobs = jobs;
            if (c.kind.empty()) throw ConfigError("missing config key: kind");
            return runExperiment(std::move(c));
        } else if (summarize->parsed()) {
            return runSummarize(indexPath);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ResolutionError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return 3;
    } catch (const std::domain_error& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
