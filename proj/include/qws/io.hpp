// io.hpp: experiment configuration (JSON), result serialization (CSV, JSON, SVG)
// and the subcommand runner behind the `qws` tool.

#pragma once

#include "qws/core.hpp"
#include "qws/defects.hpp"
#include "qws/lattice.hpp"
#include "qws/spectra.hpp"
#include "qws/symbol.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace qws {

inline constexpr const char* kVersion = "qws 1.0.0";

using Json = nlohmann::ordered_json;

// ------------------------------- config -------------------------------------

enum class InitialKind { site_delta, uniform_on_set, custom };

struct SiteAmplitude {
    long x{0};
    Complex a0;
    Complex a1;
};

struct InitialStateSpec {
    InitialKind kind{InitialKind::site_delta};
    long site{0};
    std::vector<long> sites{};
    std::array<Complex, 2> spinor{Complex(1.0 / std::numbers::sqrt2, 0.0), Complex(0.0, 1.0 / std::numbers::sqrt2)};
    std::vector<SiteAmplitude> amplitudes{};

    /// Lowest and highest site carrying amplitude.
    std::pair<long, long> extent() const {
        std::vector<long> xs;
        switch (kind) {
            case InitialKind::site_delta: xs = {site}; break;
            case InitialKind::uniform_on_set: xs = sites; break;
            case InitialKind::custom:
                for (const auto& a : amplitudes) xs.push_back(a.x);
                break;
        }
        if (xs.empty()) return {0, 0};
        return {*std::min_element(xs.begin(), xs.end()), *std::max_element(xs.begin(), xs.end())};
    }

    State build(const Window& w) const {
        auto put = [&](State& s, long x, Complex a0, Complex a1) {
            if (!w.contains(x)) {
                throw Error(ErrorKind::WindowTooSmall, "initial state site " + std::to_string(x) + " outside the window");
            }
            s(x, 0) += a0;
            s(x, 1) += a1;
        };
        State s = State::zero(w);
        switch (kind) {
            case InitialKind::site_delta: put(s, site, spinor[0], spinor[1]); break;
            case InitialKind::uniform_on_set:
                for (long x : sites) put(s, x, spinor[0], spinor[1]);
                break;
            case InitialKind::custom:
                for (const auto& a : amplitudes) put(s, a.x, a.a0, a.a1);
                break;
        }
        return s;
    }
};

/// Overrides for classification and detection; unset values take the
/// per-boundary defaults.
struct ToleranceSpec {
    double circle{1e-6};
    double threshold_radius{0.05};
    std::optional<double> band_edge{};
    double localization{0.99};
    long radius{10};
    double theta_step{0.01};
    double null_ratio{kNullRatio};
    double stability{1e-6};
    DetectMethod detect_method{DetectMethod::compact_kernel};

    ClassifyTolerances classify(Boundary b) const {
        ClassifyTolerances t = ClassifyTolerances::for_boundary(b);
        t.circle = circle;
        t.threshold_radius = threshold_radius;
        if (band_edge) t.band_edge = *band_edge;
        t.localization = localization;
        t.radius = radius;
        return t;
    }

    DetectConfig detect() const {
        DetectConfig d;
        d.method = detect_method;
        d.theta_step = theta_step;
        d.threshold_radius = threshold_radius;
        d.null_ratio = null_ratio;
        d.stability = stability;
        d.classify = classify(Boundary::periodic);
        return d;
    }
};

struct ExperimentConfig {
    ModelParams model{ModelParams::hadamard()};
    DefectSpec defects{};
    std::vector<SiteCoin> site_coins{};
    PerturbationSpec perturbation{};
    long L{60};
    /// unset: periodic for spectral work, padded for evolution
    std::optional<Boundary> boundary{};
    InitialStateSpec initial_state{};
    long steps{100};
    ToleranceSpec tolerances{};
    long grid{100};
    std::string output_dir{"out"};
    std::set<std::string> formats{"csv", "json", "svg"};

    FieldModel field_model() const { return FieldModel{model, defects, perturbation, site_coins}; }
    Window window() const { return Window::symmetric(L); }
};

namespace detail {

inline const std::set<std::string>& known_formats() {
    static const std::set<std::string> f{"csv", "json", "svg"};
    return f;
}

class Reader {
public:
    Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw Error(ErrorKind::SchemaError, "expected an object", path_.empty() ? "$" : path_);
    }

    void allow(std::initializer_list<const char*> keys) const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            bool ok = false;
            for (const char* k : keys) ok = ok || it.key() == k;
            if (!ok) throw Error(ErrorKind::SchemaError, "unknown key", join(it.key()));
        }
    }

    bool has(const char* key) const { return j_.contains(key); }
    const Json& at(const char* key) const { return j_.at(key); }
    std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    double number(const char* key, double fallback) const {
        if (!has(key)) return fallback;
        if (!j_.at(key).is_number()) throw Error(ErrorKind::SchemaError, "expected a number", join(key));
        return j_.at(key).get<double>();
    }

    long integer(const char* key, long fallback) const {
        if (!has(key)) return fallback;
        if (!j_.at(key).is_number_integer()) throw Error(ErrorKind::SchemaError, "expected an integer", join(key));
        return j_.at(key).get<long>();
    }

    std::uint64_t unsigned_integer(const char* key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const Json& v = j_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
            throw Error(ErrorKind::SchemaError, "expected a nonnegative integer", join(key));
        }
        return v.get<std::uint64_t>();
    }

    std::string string(const char* key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        if (!j_.at(key).is_string()) throw Error(ErrorKind::SchemaError, "expected a string", join(key));
        return j_.at(key).get<std::string>();
    }

private:
    const Json& j_;
    std::string path_;
};

inline Complex parse_complex(const Json& v, const std::string& path) {
    if (v.is_number()) return Complex(v.get<double>(), 0.0);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
        throw Error(ErrorKind::SchemaError, "expected [re, im]", path);
    }
    return Complex(v[0].get<double>(), v[1].get<double>());
}

inline Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

inline std::vector<long> parse_sites(const Json& v, const std::string& path) {
    if (!v.is_array()) throw Error(ErrorKind::SchemaError, "expected an array of integers", path);
    std::vector<long> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number_integer()) {
            throw Error(ErrorKind::SchemaError, "expected an integer", path + "[" + std::to_string(i) + "]");
        }
        out.push_back(v[i].get<long>());
    }
    return out;
}

inline Boundary parse_boundary(const std::string& s, const std::string& path) {
    if (s == "padded") return Boundary::padded;
    if (s == "periodic") return Boundary::periodic;
    if (s == "truncate") return Boundary::truncate;
    throw Error(ErrorKind::SchemaError, "boundary must be padded, periodic or truncate", path);
}

inline DetectMethod parse_method(const std::string& s, const std::string& path) {
    if (s == "compact_kernel") return DetectMethod::compact_kernel;
    if (s == "spectral_localization") return DetectMethod::spectral_localization;
    throw Error(ErrorKind::SchemaError, "detect_method must be compact_kernel or spectral_localization", path);
}

inline void require_positive(double v, const char* path) {
    if (!(v > 0.0)) throw Error(ErrorKind::RangeError, "must be > 0", path);
}

}  // namespace detail

/// Validate a JSON document and fill in defaults. Unknown keys are rejected.
inline ExperimentConfig config_from_json(const Json& doc) {
    using detail::Reader;
    ExperimentConfig cfg;
    Reader root(doc, "");
    root.allow({"model", "defects", "site_coins", "perturbation", "window", "boundary", "initial_state", "steps",
                "tolerances", "grid", "output"});

    if (root.has("model")) {
        Reader r(root.at("model"), "model");
        r.allow({"p", "alpha", "beta", "gamma"});
        const ModelParams d = ModelParams::hadamard();
        cfg.model = ModelParams::make(r.number("p", d.p), r.number("alpha", d.alpha), r.number("beta", d.beta),
                                      r.number("gamma", d.gamma));
    }
    if (root.has("defects")) {
        Reader r(root.at("defects"), "defects");
        r.allow({"centers", "beta_prime", "gamma_prime"});
        const auto centers = r.has("centers") ? detail::parse_sites(r.at("centers"), "defects.centers") : std::vector<long>{};
        cfg.defects = DefectSpec(centers, r.number("beta_prime", 0.0), r.number("gamma_prime", 0.0));
    }
    if (root.has("site_coins")) {
        const Json& arr = root.at("site_coins");
        if (!arr.is_array()) throw Error(ErrorKind::SchemaError, "expected an array", "site_coins");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string path = "site_coins[" + std::to_string(i) + "]";
            Reader r(arr[i], path);
            r.allow({"site", "coin"});
            if (!r.has("site") || !r.has("coin")) throw Error(ErrorKind::SchemaError, "site and coin are required", path);
            const Json& c = r.at("coin");
            if (!c.is_array() || c.size() != 4) {
                throw Error(ErrorKind::SchemaError, "coin is [a, b, c, d], row-major", path + ".coin");
            }
            SiteCoin sc;
            sc.site = r.integer("site", 0);
            for (int k = 0; k < 4; ++k) {
                sc.coin(k / 2, k % 2) = detail::parse_complex(c[static_cast<std::size_t>(k)], path + ".coin");
            }
            if (unitarity_defect(sc.coin) > 1e-12) throw Error(ErrorKind::RangeError, "coin is not unitary", path + ".coin");
            cfg.site_coins.push_back(sc);
        }
    }
    if (root.has("perturbation")) {
        Reader r(root.at("perturbation"), "perturbation");
        r.allow({"kind", "M", "rho", "delta", "seed"});
        const std::string kind = r.string("kind", "none");
        if (kind != "none" && kind != "exponential") {
            throw Error(ErrorKind::SchemaError, "kind must be none or exponential", "perturbation.kind");
        }
        PerturbationSpec p;
        p.kind = kind == "none" ? PerturbationKind::none : PerturbationKind::exponential;
        p.M = r.number("M", p.M);
        p.rho = r.number("rho", p.rho);
        p.delta = r.number("delta", p.delta);
        p.seed = r.unsigned_integer("seed", p.seed);
        p.validate();
        cfg.perturbation = p;
    }
    if (root.has("window")) {
        Reader r(root.at("window"), "window");
        r.allow({"L"});
        cfg.L = r.integer("L", cfg.L);
        if (cfg.L < 1) throw Error(ErrorKind::RangeError, "L must be >= 1", "window.L");
    }
    if (root.has("boundary")) cfg.boundary = detail::parse_boundary(root.string("boundary", ""), "boundary");
    if (root.has("initial_state")) {
        Reader r(root.at("initial_state"), "initial_state");
        r.allow({"kind", "site", "sites", "spinor", "amplitudes"});
        InitialStateSpec s;
        const std::string kind = r.string("kind", "site_delta");
        if (kind == "site_delta") {
            s.kind = InitialKind::site_delta;
        } else if (kind == "uniform_on_set") {
            s.kind = InitialKind::uniform_on_set;
        } else if (kind == "custom") {
            s.kind = InitialKind::custom;
        } else {
            throw Error(ErrorKind::SchemaError, "kind must be site_delta, uniform_on_set or custom", "initial_state.kind");
        }
        s.site = r.integer("site", 0);
        if (r.has("sites")) s.sites = detail::parse_sites(r.at("sites"), "initial_state.sites");
        if (r.has("spinor")) {
            const Json& sp = r.at("spinor");
            if (!sp.is_array() || sp.size() != 2) throw Error(ErrorKind::SchemaError, "spinor is [c0, c1]", "initial_state.spinor");
            s.spinor = {detail::parse_complex(sp[0], "initial_state.spinor[0]"),
                        detail::parse_complex(sp[1], "initial_state.spinor[1]")};
        }
        if (r.has("amplitudes")) {
            const Json& arr = r.at("amplitudes");
            if (!arr.is_array()) throw Error(ErrorKind::SchemaError, "expected an array", "initial_state.amplitudes");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const std::string path = "initial_state.amplitudes[" + std::to_string(i) + "]";
                Reader a(arr[i], path);
                a.allow({"x", "a0", "a1"});
                SiteAmplitude sa;
                sa.x = a.integer("x", 0);
                sa.a0 = a.has("a0") ? detail::parse_complex(a.at("a0"), path + ".a0") : Complex{};
                sa.a1 = a.has("a1") ? detail::parse_complex(a.at("a1"), path + ".a1") : Complex{};
                s.amplitudes.push_back(sa);
            }
        }
        if (s.kind == InitialKind::uniform_on_set && s.sites.empty()) {
            throw Error(ErrorKind::SchemaError, "uniform_on_set needs sites", "initial_state.sites");
        }
        cfg.initial_state = s;
    }
    cfg.steps = root.integer("steps", cfg.steps);
    if (cfg.steps < 0) throw Error(ErrorKind::RangeError, "steps must be >= 0", "steps");
    if (root.has("tolerances")) {
        Reader r(root.at("tolerances"), "tolerances");
        r.allow({"circle", "threshold_radius", "band_edge", "localization", "radius", "theta_step", "null_ratio",
                 "stability", "detect_method"});
        ToleranceSpec& t = cfg.tolerances;
        t.circle = r.number("circle", t.circle);
        t.threshold_radius = r.number("threshold_radius", t.threshold_radius);
        if (r.has("band_edge")) t.band_edge = r.number("band_edge", 0.0);
        t.localization = r.number("localization", t.localization);
        t.radius = r.integer("radius", t.radius);
        t.theta_step = r.number("theta_step", t.theta_step);
        t.null_ratio = r.number("null_ratio", t.null_ratio);
        t.stability = r.number("stability", t.stability);
        t.detect_method = detail::parse_method(r.string("detect_method", to_string(t.detect_method)),
                                               "tolerances.detect_method");
        detail::require_positive(t.circle, "tolerances.circle");
        detail::require_positive(t.threshold_radius, "tolerances.threshold_radius");
        detail::require_positive(t.theta_step, "tolerances.theta_step");
        detail::require_positive(t.null_ratio, "tolerances.null_ratio");
        detail::require_positive(t.stability, "tolerances.stability");
        if (t.band_edge && *t.band_edge < 0.0) throw Error(ErrorKind::RangeError, "must be >= 0", "tolerances.band_edge");
        if (!(t.localization > 0.0 && t.localization <= 1.0)) {
            throw Error(ErrorKind::RangeError, "must lie in (0, 1]", "tolerances.localization");
        }
        if (t.radius < 0) throw Error(ErrorKind::RangeError, "must be >= 0", "tolerances.radius");
    }
    cfg.grid = root.integer("grid", cfg.grid);
    if (cfg.grid < 2) throw Error(ErrorKind::RangeError, "grid must be >= 2", "grid");
    if (root.has("output")) {
        Reader r(root.at("output"), "output");
        r.allow({"dir", "formats"});
        cfg.output_dir = r.string("dir", cfg.output_dir);
        if (r.has("formats")) {
            const Json& f = r.at("formats");
            if (!f.is_array()) throw Error(ErrorKind::SchemaError, "expected an array", "output.formats");
            cfg.formats.clear();
            for (const auto& v : f) {
                if (!v.is_string() || !detail::known_formats().count(v.get<std::string>())) {
                    throw Error(ErrorKind::SchemaError, "formats are csv, json, svg", "output.formats");
                }
                cfg.formats.insert(v.get<std::string>());
            }
        }
    }
    return cfg;
}

inline ExperimentConfig parse_config(const std::string& text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::SchemaError, std::string("malformed JSON: ") + e.what(), "$");
    }
    return config_from_json(doc);
}

/// Canonical JSON form with every default spelled out.
inline Json to_json(const ExperimentConfig& c) {
    using detail::complex_json;
    Json j;
    j["model"] = {{"p", c.model.p}, {"alpha", c.model.alpha}, {"beta", c.model.beta}, {"gamma", c.model.gamma}};
    j["defects"] = {{"centers", c.defects.centers},
                    {"beta_prime", c.defects.beta_prime},
                    {"gamma_prime", c.defects.gamma_prime}};
    Json coins = Json::array();
    for (const auto& sc : c.site_coins) {
        coins.push_back({{"site", sc.site},
                         {"coin", Json::array({complex_json(sc.coin(0, 0)), complex_json(sc.coin(0, 1)),
                                               complex_json(sc.coin(1, 0)), complex_json(sc.coin(1, 1))})}});
    }
    j["site_coins"] = coins;
    j["perturbation"] = {{"kind", c.perturbation.kind == PerturbationKind::none ? "none" : "exponential"},
                         {"M", c.perturbation.M},
                         {"rho", c.perturbation.rho},
                         {"delta", c.perturbation.delta},
                         {"seed", c.perturbation.seed}};
    j["window"] = {{"L", c.L}};
    if (c.boundary) j["boundary"] = to_string(*c.boundary);
    const auto& s = c.initial_state;
    Json init;
    init["kind"] = s.kind == InitialKind::site_delta ? "site_delta"
                   : s.kind == InitialKind::uniform_on_set ? "uniform_on_set"
                                                           : "custom";
    init["site"] = s.site;
    init["sites"] = s.sites;
    init["spinor"] = Json::array({complex_json(s.spinor[0]), complex_json(s.spinor[1])});
    Json amps = Json::array();
    for (const auto& a : s.amplitudes) amps.push_back({{"x", a.x}, {"a0", complex_json(a.a0)}, {"a1", complex_json(a.a1)}});
    init["amplitudes"] = amps;
    j["initial_state"] = init;
    j["steps"] = c.steps;
    const auto& t = c.tolerances;
    Json tol = {{"circle", t.circle}, {"threshold_radius", t.threshold_radius}};
    if (t.band_edge) tol["band_edge"] = *t.band_edge;
    tol["localization"] = t.localization;
    tol["radius"] = t.radius;
    tol["theta_step"] = t.theta_step;
    tol["null_ratio"] = t.null_ratio;
    tol["stability"] = t.stability;
    tol["detect_method"] = to_string(t.detect_method);
    j["tolerances"] = tol;
    j["grid"] = c.grid;
    j["output"] = {{"dir", c.output_dir}, {"formats", Json(std::vector<std::string>(c.formats.begin(), c.formats.end()))}};
    return j;
}

inline std::string serialize_config(const ExperimentConfig& c) { return to_json(c).dump(); }

/// FNV-1a over the canonical config text.
inline std::string config_hash(const ExperimentConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : serialize_config(c)) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

// ------------------------------- writers ------------------------------------

/// %.17g
inline std::string fmt17(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

/// Metadata attached to every output file.
struct Metadata {
    std::string version{kVersion};
    std::string hash;
    std::string boundary;
    Json tolerances;
    Json config;

    static Metadata of(const ExperimentConfig& c, Boundary boundary) {
        const ClassifyTolerances ct = c.tolerances.classify(boundary);
        Json tol = {{"circle", ct.circle},
                    {"threshold_radius", ct.threshold_radius},
                    {"band_edge", ct.band_edge},
                    {"localization", ct.localization},
                    {"radius", ct.radius},
                    {"theta_step", c.tolerances.theta_step},
                    {"null_ratio", c.tolerances.null_ratio},
                    {"stability", c.tolerances.stability},
                    {"threshold_equality", kThresholdTolerance}};
        return Metadata{kVersion, config_hash(c), to_string(boundary), tol, to_json(c)};
    }

    std::string comment_lines() const {
        return "# version: " + version + "\n# config_hash: " + hash + "\n# boundary: " + boundary +
               "\n# tolerances: " + tolerances.dump() +
               "\n# config: " + config.dump() + "\n";
    }

    Json json() const {
        return {{"version", version}, {"config_hash", hash}, {"boundary", boundary}, {"tolerances", tolerances}, {"config", config}};
    }
};

/// State snapshot: header `x,re0,im0,re1,im1,prob`, one row per window site.
inline std::string state_csv(const State& s, const std::string& metadata = {}) {
    std::string out = metadata;
    out += "x,re0,im0,re1,im1,prob\n";
    for (long x = s.window.lo; x <= s.window.hi; ++x) {
        const Complex a0 = s(x, 0), a1 = s(x, 1);
        out += std::to_string(x) + "," + fmt17(a0.real()) + "," + fmt17(a0.imag()) + "," + fmt17(a1.real()) + "," +
               fmt17(a1.imag()) + "," + fmt17(std::norm(a0) + std::norm(a1)) + "\n";
    }
    return out;
}

/// Inverse of state_csv; `#` lines are skipped.
inline State parse_state_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    bool header = false;
    std::vector<std::pair<long, std::array<double, 4>>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "x,re0,im0,re1,im1,prob") throw Error(ErrorKind::SchemaError, "unexpected CSV header", "csv");
            header = true;
            continue;
        }
        std::istringstream row(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() != 6) throw Error(ErrorKind::SchemaError, "expected 6 columns", "csv");
        rows.push_back({std::stol(cells[0]),
                        {std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]), std::stod(cells[4])}});
    }
    if (rows.size() < 2) throw Error(ErrorKind::SchemaError, "need at least two rows", "csv");
    State s = State::zero(Window(rows.front().first, rows.back().first));
    for (const auto& [x, v] : rows) {
        s(x, 0) = Complex(v[0], v[1]);
        s(x, 1) = Complex(v[2], v[3]);
    }
    return s;
}

inline Json band_json(const BandStructure& b) {
    Json arcs = Json::array();
    for (const auto& a : b.arcs) arcs.push_back(Json::array({a.lo, a.hi}));
    return {{"arcs", arcs}, {"thresholds", b.thresholds}, {"degenerate", b.degenerate}};
}

inline std::string spectrum_csv(const SpectrumReport& r, const std::string& metadata = {}) {
    std::string out = metadata;
    out += "re,im,phase,modulus,label,loc_measure\n";
    for (std::size_t i = 0; i < r.eigenpairs.size(); ++i) {
        const auto& p = r.eigenpairs[i];
        out += fmt17(p.lambda.real()) + "," + fmt17(p.lambda.imag()) + "," + fmt17(p.phase) + "," +
               fmt17(std::abs(p.lambda)) + "," + to_string(r.labels[i]) + "," + fmt17(r.localization[i]) + "\n";
    }
    return out;
}

inline Json detection_json(const DetectionReport& r) {
    Json ev = Json::array();
    for (const auto& e : r.evidence) {
        ev.push_back({{"lambda", detail::complex_json(e.lambda)},
                      {"kernel_dim", e.kernel_dim},
                      {"support", Json::array({e.x_lo, e.x_hi})}});
    }
    return {{"verdict", r.verdict}, {"method", to_string(r.method)}, {"evidence", ev}, {"band", band_json(r.band)}};
}

namespace svg {

inline std::string header(double w, double h, const std::string& metadata) {
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<!--\n" + metadata + "-->\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt17(w) + "\" height=\"" + fmt17(h) +
           "\" viewBox=\"0 0 " + fmt17(w) + " " + fmt17(h) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    return out;
}

/// Bar chart of P(x).
inline std::string histogram(const std::map<long, double>& dist, const std::string& title, const std::string& metadata) {
    const double w = 800, h = 400, pad = 40;
    double peak = 0.0;
    for (const auto& [x, p] : dist) peak = std::max(peak, p);
    if (peak <= 0.0) peak = 1.0;
    std::string out = header(w, h, metadata);
    out += "<text x=\"" + fmt17(pad) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" + title + "</text>\n";
    const double bar = (w - 2 * pad) / static_cast<double>(std::max<std::size_t>(1, dist.size()));
    std::size_t i = 0;
    for (const auto& [x, p] : dist) {
        const double bh = (h - 2 * pad) * p / peak;
        out += "<rect x=\"" + fmt17(pad + bar * static_cast<double>(i)) + "\" y=\"" + fmt17(h - pad - bh) +
               "\" width=\"" + fmt17(std::max(bar * 0.9, 0.5)) + "\" height=\"" + fmt17(bh) +
               "\" fill=\"steelblue\"><title>x=" + std::to_string(x) + " P=" + fmt17(p) + "</title></rect>\n";
        ++i;
    }
    out += "<line x1=\"" + fmt17(pad) + "\" y1=\"" + fmt17(h - pad) + "\" x2=\"" + fmt17(w - pad) + "\" y2=\"" +
           fmt17(h - pad) + "\" stroke=\"black\"/>\n</svg>\n";
    return out;
}

/// Eigenvalues in the complex plane over the unit circle with the band arcs shaded.
inline std::string circle_scatter(const SpectrumReport& r, const std::string& metadata) {
    const double size = 500, c = 250, rad = 200;
    std::string out = header(size, size, metadata);
    out += "<circle cx=\"250\" cy=\"250\" r=\"200\" fill=\"none\" stroke=\"#bbb\"/>\n";
    auto pt = [&](double theta, double radius) {
        return std::pair{c + radius * std::cos(theta), c - radius * std::sin(theta)};
    };
    if (!r.band.degenerate) {
        for (const auto& a : r.band.arcs) {
            const auto [x0, y0] = pt(a.lo, rad);
            const auto [x1, y1] = pt(a.lo + a.length(), rad);
            out += "<path d=\"M " + fmt17(x0) + " " + fmt17(y0) + " A 200 200 0 " + (a.length() > kPi ? "1" : "0") +
                   " 0 " + fmt17(x1) + " " + fmt17(y1) + "\" fill=\"none\" stroke=\"#f4b183\" stroke-width=\"14\" "
                   "stroke-opacity=\"0.6\"/>\n";
        }
    } else {
        out += "<circle cx=\"250\" cy=\"250\" r=\"200\" fill=\"none\" stroke=\"#f4b183\" stroke-width=\"14\" "
               "stroke-opacity=\"0.6\"/>\n";
    }
    for (std::size_t i = 0; i < r.eigenpairs.size(); ++i) {
        const Complex z = r.eigenpairs[i].lambda;
        const char* color = "#4472c4";
        switch (r.labels[i]) {
            case SpectralLabel::band_localized_embedded: color = "#c00000"; break;
            case SpectralLabel::gap_discrete: color = "#00b050"; break;
            case SpectralLabel::near_threshold: color = "#7f7f7f"; break;
            case SpectralLabel::non_unimodular: color = "#7030a0"; break;
            default: break;
        }
        const bool loud = r.labels[i] == SpectralLabel::band_localized_embedded || r.labels[i] == SpectralLabel::gap_discrete;
        out += "<circle cx=\"" + fmt17(c + rad * z.real()) + "\" cy=\"" + fmt17(c - rad * z.imag()) + "\" r=\"" +
               (loud ? "5" : "2.5") + "\" fill=\"" + color + "\"><title>" + to_string(r.labels[i]) + "</title></circle>\n";
    }
    out += "</svg>\n";
    return out;
}

}  // namespace svg

/// Write via a temporary file and rename.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

// ------------------------------ subcommands ---------------------------------

struct RunResult {
    int exit_code{0};
    std::vector<std::filesystem::path> files;
    Json summary;
};

inline RunResult run_subcommand(const std::string& name, const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    const fs::path dir = cfg.output_dir;
    RunResult result;
    auto emit = [&](const std::string& format, const std::string& file, const std::string& content) {
        if (!cfg.formats.count(format)) return;
        write_atomic(dir / file, content);
        result.files.push_back(dir / file);
    };
    auto with_meta = [](Json body, const Metadata& m) {
        body["metadata"] = m.json();
        return body.dump(2) + "\n";
    };

    if (name == "simulate") {
        const Boundary b = cfg.boundary.value_or(Boundary::padded);
        const Metadata meta = Metadata::of(cfg, b);
        const auto [lo, hi] = cfg.initial_state.extent();
        const long reach = std::max({cfg.L, std::abs(lo) + cfg.steps + 1, std::abs(hi) + cfg.steps + 1});
        const Window state_window = cfg.window();
        const Window field_window = b == Boundary::padded ? Window::symmetric(reach) : state_window;
        const CoinField field = cfg.field_model().assemble(field_window);
        const State psi0 = cfg.initial_state.build(state_window);
        const auto traj = evolve(psi0, field, cfg.steps, b);
        const int digits = static_cast<int>(std::to_string(cfg.steps).size());
        for (std::size_t t = 0; t < traj.size(); ++t) {
            std::ostringstream fname;
            fname << "state_t" << std::setw(std::max(4, digits)) << std::setfill('0') << t << ".csv";
            emit("csv", fname.str(), state_csv(traj[t], meta.comment_lines()));
        }
        const auto dist = position_distribution(traj.back());
        double total = 0.0;
        for (const auto& [x, p] : dist) total += p;
        emit("svg", "distribution.svg",
             svg::histogram(dist, "P(X_t = x), t = " + std::to_string(cfg.steps), meta.comment_lines()));
        result.summary = {{"steps", cfg.steps}, {"total_probability", total}};
        return result;
    }
    if (name == "spectrum") {
        const Boundary b = cfg.boundary.value_or(Boundary::periodic);
        const Metadata meta = Metadata::of(cfg, b);
        const Window w = cfg.window();
        const auto report = analyze_spectrum(cfg.field_model().assemble(w), w, b, cfg.model, cfg.tolerances.classify(b));
        emit("csv", "spectrum.csv", spectrum_csv(report, meta.comment_lines()));
        emit("svg", "spectrum.svg", svg::circle_scatter(report, meta.comment_lines()));
        Json counts;
        for (auto l : {SpectralLabel::band_extended, SpectralLabel::band_localized_embedded, SpectralLabel::gap_discrete,
                       SpectralLabel::near_threshold, SpectralLabel::non_unimodular}) {
            counts[to_string(l)] = report.count(l);
        }
        result.summary = {{"dimension", report.eigenpairs.size()}, {"labels", counts}};
        return result;
    }
    if (name == "bands") {
        const Metadata meta = Metadata::of(cfg, cfg.boundary.value_or(Boundary::periodic));
        result.summary = band_json(essential_band(cfg.model));
        emit("json", "bands.json", with_meta(result.summary, meta));
        return result;
    }
    if (name == "dispersion") {
        const Metadata meta = Metadata::of(cfg, cfg.boundary.value_or(Boundary::periodic));
        std::string out = meta.comment_lines() + "xi,theta,abs_p\n";
        for (long i = 0; i < cfg.grid; ++i) {
            const double xi = kTwoPi * static_cast<double>(i) / static_cast<double>(cfg.grid);
            for (long j = 0; j < cfg.grid; ++j) {
                const double theta = kTwoPi * static_cast<double>(j) / static_cast<double>(cfg.grid);
                out += fmt17(xi) + "," + fmt17(theta) + "," + fmt17(std::abs(dispersion(xi, theta, cfg.model))) + "\n";
            }
        }
        emit("csv", "dispersion.csv", out);
        result.summary = {{"grid", cfg.grid}};
        return result;
    }
    if (name == "eigenfunction") {
        if (cfg.defects.empty()) throw Error(ErrorKind::RangeError, "eigenfunctions need defects", "defects.centers");
        const Metadata meta = Metadata::of(cfg, Boundary::padded);
        const Window w = cfg.window();
        const CoinField field = cfg.field_model().assemble(w);
        Json entries = Json::array();
        for (Sign s : {Sign::plus, Sign::minus}) {
            const auto ef = build_defect_eigenfunction(cfg.defects, s);
            const double res = verify_eigenpair(field, ef.eigenvalue(), ef.state);
            const std::string tag = s == Sign::plus ? "plus" : "minus";
            emit("csv", "eigenfunction_" + tag + ".csv", state_csv(ef.state, meta.comment_lines()));
            entries.push_back({{"sign", tag}, {"lambda", detail::complex_json(ef.eigenvalue())}, {"residual", res}});
        }
        result.summary = {{"eigenfunctions", entries}};
        emit("json", "eigenfunction.json", with_meta(result.summary, meta));
        return result;
    }
    if (name == "detect") {
        const Metadata meta = Metadata::of(cfg, Boundary::periodic);
        const auto report = detect_edge_defects(cfg.field_model(), cfg.window(), cfg.tolerances.detect());
        result.summary = detection_json(report);
        emit("json", "detect.json", with_meta(result.summary, meta));
        return result;
    }
    throw Error(ErrorKind::SchemaError, "unknown subcommand " + name, "subcommand");
}

inline Json error_json(const Error& e) {
    return {{"error", to_string(e.kind())}, {"message", e.what()}, {"path", e.path()}};
}

}  // namespace qws
