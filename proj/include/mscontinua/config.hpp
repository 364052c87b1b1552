/// @file config.hpp
/// @brief Simulation configuration: `key = value` text with [sections], and
/// the built-in presets for the three 2D test problems.
///
/// Sections and keys (anything omitted keeps its default):
///
///   [mesh]        file | nx, ny, domain = xmin ymin xmax ymax,
///                 fracture = x y, x y, ...   (repeatable, one polyline each)
///   [coarse]      nx, ny
///   [physics]     continua, fracture, boundary_value, initial_value, gravity, source
///   [retention.1] model = haverkamp | linear, A, B, C, D, theta_s, theta_r,
///                 capacity, theta_ref          (.2 for continuum 2, .f for fractures)
///   [field.k1]    kind = constant | layers | lognormal | file | proportional
///                 value | breaks, values | seed, contrast, center, correlation |
///                 path | of, factor            (also k2, kf, sigma12)
///   [time]        t_max, steps, picard_tol, picard_max, strict
///   [basis]       policy = fixed | adaptive | simplified, counts, threshold
///   [output]      dir, snapshots, vtk
#pragma once

#include "mscontinua/constitutive.hpp"
#include "mscontinua/mesh.hpp"
#include "mscontinua/solver.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace mscontinua {

struct FieldSpec {
    std::string kind = "constant";
    double value = 10.0;
    std::vector<double> breaks;
    std::vector<double> values;
    unsigned seed = 1;
    double contrast = 100.0;
    double center = 10.0;
    double correlation = 0.1;
    std::string path;
    std::string of; ///< proportional: name of the source field (k1, k2)
    double factor = 1.0;

    static FieldSpec constant(double v) {
        FieldSpec f;
        f.value = v;
        return f;
    }
    static FieldSpec lognormal(unsigned seed, double contrast, double center, double correlation) {
        FieldSpec f;
        f.kind = "lognormal";
        f.seed = seed;
        f.contrast = contrast;
        f.center = center;
        f.correlation = correlation;
        return f;
    }
    static FieldSpec proportional(std::string of, double factor) {
        FieldSpec f;
        f.kind = "proportional";
        f.of = std::move(of);
        f.factor = factor;
        return f;
    }
};

struct BasisPolicy {
    enum class Kind { fixed, adaptive, simplified };
    Kind kind = Kind::fixed;
    std::vector<int> counts{1, 2, 4, 8};
    double threshold = 1e3;
};

inline std::string to_string(BasisPolicy::Kind k) {
    switch (k) {
    case BasisPolicy::Kind::fixed: return "fixed";
    case BasisPolicy::Kind::adaptive: return "adaptive";
    case BasisPolicy::Kind::simplified: return "simplified";
    }
    return "?";
}

struct SimulationConfig {
    // mesh
    std::string mesh_file;
    int nx_fine = 80;
    int ny_fine = 80;
    Rectangle domain{0.0, 0.0, 1.0, 1.0};
    std::vector<Polyline> fractures;
    int coarse_nx = 10;
    int coarse_ny = 10;

    // physics
    int continua = 1;
    bool fracture = true;
    double boundary_value = -20.7;
    double initial_value = -61.5;
    bool gravity = true;
    double source = 0.0;
    std::vector<Retention> retention{HaverkampParams{}, HaverkampParams{}};
    Retention fracture_retention = HaverkampParams{};
    FieldSpec k1;
    FieldSpec k2;
    FieldSpec kf = FieldSpec::constant(1e9);
    FieldSpec sigma12 = FieldSpec::constant(0.0);

    TimeSteppingPlan time;
    BasisPolicy basis;

    std::string output_dir = "out";
    std::vector<int> snapshots{0, 25, 50, 100, 200};
    bool vtk = true;

    void validate() const {
        if (continua != 1 && continua != 2)
            fail("physics.continua must be 1 or 2, got ", continua);
        if (mesh_file.empty() && (nx_fine < 2 || ny_fine < 2))
            fail("mesh.nx and mesh.ny must be >= 2");
        if (coarse_nx < 1 || coarse_ny < 1)
            fail("coarse.nx and coarse.ny must be >= 1");
        for (int m : basis.counts)
            if (m < 1)
                fail("basis.counts entries must be >= 1, got ", m);
        if (basis.kind == BasisPolicy::Kind::fixed && basis.counts.empty())
            fail("basis.counts is empty");
        for (int s : snapshots)
            if (s < 0 || s > time.n_steps)
                fail("output.snapshots entry ", s, " is outside 0..", time.n_steps);
        time.validate();
    }
};

// ============================================================================
// Text formatting helpers
// ============================================================================

namespace detail {

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

template <typename T>
std::string join(const std::vector<T>& v, const char* sep = ", ") {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i)
            out += sep;
        if constexpr (std::is_floating_point_v<T>)
            out += fmt_double(v[i]);
        else
            out += std::to_string(v[i]);
    }
    return out;
}

} // namespace detail

// ============================================================================
// Parser
// ============================================================================

class ConfigParser {
public:
    SimulationConfig parse(std::istream& is, const std::string& name) {
        name_ = name;
        SimulationConfig cfg;
        std::string line, section;
        int lineno = 0;
        bool fractures_seen = false;
        while (std::getline(is, line)) {
            ++lineno;
            line_ = lineno;
            if (const auto hash = line.find('#'); hash != std::string::npos)
                line.erase(hash);
            const std::string t = detail::trim(line);
            if (t.empty())
                continue;
            if (t.front() == '[') {
                if (t.back() != ']')
                    error("malformed section header '", t, "'");
                section = detail::trim(std::string_view(t).substr(1, t.size() - 2));
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                error("expected 'key = value', got '", t, "'");
            const std::string key = detail::trim(std::string_view(t).substr(0, eq));
            const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
            if (section == "mesh" && key == "fracture") {
                if (!fractures_seen)
                    cfg.fractures.clear();
                fractures_seen = true;
                cfg.fractures.push_back(polyline(value));
                continue;
            }
            const std::string full = section + "." + key;
            if (!seen_.insert({full, lineno}).second)
                error("duplicate key '", key, "' in section [", section, "]");
            assign(cfg, section, key, value);
        }
        return cfg;
    }

private:
    template <typename... Args>
    [[noreturn]] void error(const Args&... args) const {
        fail(name_, ":", line_, ": ", args...);
    }

    double number(const std::string& v) const {
        double x = 0;
        const char* b = v.data();
        const char* e = v.data() + v.size();
        const auto [ptr, ec] = std::from_chars(b, e, x);
        if (ec != std::errc() || ptr != e)
            error("not a number: '", v, "'");
        return x;
    }

    int integer(const std::string& v) const {
        int x = 0;
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        if (ec != std::errc() || ptr != v.data() + v.size())
            error("not an integer: '", v, "'");
        return x;
    }

    bool boolean(const std::string& v) const {
        if (v == "true" || v == "yes" || v == "1")
            return true;
        if (v == "false" || v == "no" || v == "0")
            return false;
        error("not a boolean: '", v, "'");
    }

    std::vector<double> numbers(const std::string& v) const {
        std::vector<double> out;
        if (v.empty())
            return out;
        for (const auto& s : detail::split(v, ','))
            out.push_back(number(s));
        return out;
    }

    std::vector<int> integers(const std::string& v) const {
        std::vector<int> out;
        if (v.empty())
            return out;
        for (const auto& s : detail::split(v, ','))
            out.push_back(integer(s));
        return out;
    }

    Polyline polyline(const std::string& v) const {
        Polyline pl;
        for (const auto& pt : detail::split(v, ',')) {
            std::istringstream ps(pt);
            Point p;
            std::string extra;
            if (!(ps >> p.x >> p.y) || (ps >> extra))
                error("fracture vertex must be 'x y', got '", pt, "'");
            pl.push_back(p);
        }
        if (pl.size() < 2)
            error("fracture polyline needs at least two vertices");
        return pl;
    }

    void assign_retention(Retention& r, const std::string& key, const std::string& v) const {
        if (key == "model") {
            if (v == "haverkamp")
                r = HaverkampParams{};
            else if (v == "linear")
                r = LinearRetention{};
            else
                error("unknown retention model '", v, "' (expected haverkamp or linear)");
            return;
        }
        if (auto* h = std::get_if<HaverkampParams>(&r)) {
            double* slot = key == "A"         ? &h->A
                           : key == "B"       ? &h->B
                           : key == "C"       ? &h->C
                           : key == "D"       ? &h->D
                           : key == "theta_s" ? &h->theta_s
                           : key == "theta_r" ? &h->theta_r
                                              : nullptr;
            if (!slot)
                error("unknown Haverkamp key '", key, "' (set 'model' first for other models)");
            *slot = number(v);
        } else {
            auto& l = std::get<LinearRetention>(r);
            if (key == "capacity")
                l.capacity = number(v);
            else if (key == "theta_ref")
                l.theta_ref = number(v);
            else
                error("unknown linear retention key '", key, "'");
        }
    }

    void assign_field(FieldSpec& f, const std::string& key, const std::string& v) const {
        if (key == "kind") {
            if (v != "constant" && v != "layers" && v != "lognormal" && v != "file" && v != "proportional")
                error("unknown field kind '", v, "'");
            f.kind = v;
        } else if (key == "value") {
            f.value = number(v);
        } else if (key == "breaks") {
            f.breaks = numbers(v);
        } else if (key == "values") {
            f.values = numbers(v);
        } else if (key == "seed") {
            f.seed = static_cast<unsigned>(integer(v));
        } else if (key == "contrast") {
            f.contrast = number(v);
        } else if (key == "center") {
            f.center = number(v);
        } else if (key == "correlation") {
            f.correlation = number(v);
        } else if (key == "path") {
            f.path = v;
        } else if (key == "of") {
            f.of = v;
        } else if (key == "factor") {
            f.factor = number(v);
        } else {
            error("unknown field key '", key, "'");
        }
    }

    void assign(SimulationConfig& c, const std::string& section, const std::string& key, const std::string& v) {
        if (section == "mesh") {
            if (key == "file")
                c.mesh_file = v;
            else if (key == "nx")
                c.nx_fine = integer(v);
            else if (key == "ny")
                c.ny_fine = integer(v);
            else if (key == "domain") {
                std::istringstream ds(v);
                Rectangle r;
                if (!(ds >> r.xmin >> r.ymin >> r.xmax >> r.ymax) || !(r.xmax > r.xmin && r.ymax > r.ymin))
                    error("domain must be 'xmin ymin xmax ymax' with positive extent");
                c.domain = r;
            } else
                error("unknown key '", key, "' in [mesh]");
        } else if (section == "coarse") {
            if (key == "nx")
                c.coarse_nx = integer(v);
            else if (key == "ny")
                c.coarse_ny = integer(v);
            else
                error("unknown key '", key, "' in [coarse]");
        } else if (section == "physics") {
            if (key == "continua")
                c.continua = integer(v);
            else if (key == "fracture")
                c.fracture = boolean(v);
            else if (key == "boundary_value")
                c.boundary_value = number(v);
            else if (key == "initial_value")
                c.initial_value = number(v);
            else if (key == "gravity")
                c.gravity = boolean(v);
            else if (key == "source")
                c.source = number(v);
            else
                error("unknown key '", key, "' in [physics]");
        } else if (section == "retention.1") {
            assign_retention(c.retention[0], key, v);
        } else if (section == "retention.2") {
            assign_retention(c.retention[1], key, v);
        } else if (section == "retention.f") {
            assign_retention(c.fracture_retention, key, v);
        } else if (section == "field.k1") {
            assign_field(c.k1, key, v);
        } else if (section == "field.k2") {
            assign_field(c.k2, key, v);
        } else if (section == "field.kf") {
            assign_field(c.kf, key, v);
        } else if (section == "field.sigma12") {
            assign_field(c.sigma12, key, v);
        } else if (section == "time") {
            if (key == "t_max")
                c.time.t_max = number(v);
            else if (key == "steps")
                c.time.n_steps = integer(v);
            else if (key == "picard_tol")
                c.time.picard_tol = number(v);
            else if (key == "picard_max")
                c.time.picard_max = integer(v);
            else if (key == "strict")
                c.time.strict = boolean(v);
            else
                error("unknown key '", key, "' in [time]");
        } else if (section == "basis") {
            if (key == "policy") {
                if (v == "fixed")
                    c.basis.kind = BasisPolicy::Kind::fixed;
                else if (v == "adaptive")
                    c.basis.kind = BasisPolicy::Kind::adaptive;
                else if (v == "simplified")
                    c.basis.kind = BasisPolicy::Kind::simplified;
                else
                    error("unknown basis policy '", v, "'");
            } else if (key == "counts")
                c.basis.counts = integers(v);
            else if (key == "threshold")
                c.basis.threshold = number(v);
            else
                error("unknown key '", key, "' in [basis]");
        } else if (section == "output") {
            if (key == "dir")
                c.output_dir = v;
            else if (key == "snapshots")
                c.snapshots = integers(v);
            else if (key == "vtk")
                c.vtk = boolean(v);
            else
                error("unknown key '", key, "' in [output]");
        } else if (section.empty()) {
            error("key '", key, "' outside of any section");
        } else {
            error("unknown section [", section, "]");
        }
    }

    std::string name_;
    int line_ = 0;
    std::map<std::string, int> seen_;
};

inline SimulationConfig parse_config(std::istream& is, const std::string& name = "<config>") {
    SimulationConfig cfg = ConfigParser{}.parse(is, name);
    cfg.validate();
    return cfg;
}

inline SimulationConfig parse_config_string(const std::string& text) {
    std::istringstream is(text);
    return parse_config(is);
}

inline SimulationConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        fail("cannot open config file '", path, "'");
    return parse_config(is, path);
}

// ============================================================================
// Writer
// ============================================================================

namespace detail {

inline void write_retention(std::ostream& os, const char* name, const Retention& r) {
    os << '[' << name << "]\n";
    if (const auto* h = std::get_if<HaverkampParams>(&r)) {
        os << "model = haverkamp\nA = " << fmt_double(h->A) << "\nB = " << fmt_double(h->B)
           << "\nC = " << fmt_double(h->C) << "\nD = " << fmt_double(h->D) << "\ntheta_s = " << fmt_double(h->theta_s)
           << "\ntheta_r = " << fmt_double(h->theta_r) << "\n\n";
    } else {
        const auto& l = std::get<LinearRetention>(r);
        os << "model = linear\ncapacity = " << fmt_double(l.capacity) << "\ntheta_ref = " << fmt_double(l.theta_ref)
           << "\n\n";
    }
}

inline void write_field(std::ostream& os, const char* name, const FieldSpec& f) {
    os << '[' << name << "]\nkind = " << f.kind << '\n';
    if (f.kind == "constant")
        os << "value = " << fmt_double(f.value) << '\n';
    else if (f.kind == "layers")
        os << "breaks = " << join(f.breaks) << "\nvalues = " << join(f.values) << '\n';
    else if (f.kind == "lognormal")
        os << "seed = " << f.seed << "\ncontrast = " << fmt_double(f.contrast) << "\ncenter = " << fmt_double(f.center)
           << "\ncorrelation = " << fmt_double(f.correlation) << '\n';
    else if (f.kind == "file")
        os << "path = " << f.path << '\n';
    else if (f.kind == "proportional")
        os << "of = " << f.of << "\nfactor = " << fmt_double(f.factor) << '\n';
    os << '\n';
}

} // namespace detail

/// Sections describing geometry and physics only; used for the offline fingerprint.
inline void write_model_sections(std::ostream& os, const SimulationConfig& c) {
    using detail::fmt_double;
    os << "[mesh]\n";
    if (!c.mesh_file.empty())
        os << "file = " << c.mesh_file << '\n';
    os << "nx = " << c.nx_fine << "\nny = " << c.ny_fine << "\ndomain = " << fmt_double(c.domain.xmin) << ' '
       << fmt_double(c.domain.ymin) << ' ' << fmt_double(c.domain.xmax) << ' ' << fmt_double(c.domain.ymax) << '\n';
    for (const auto& pl : c.fractures) {
        os << "fracture = ";
        for (std::size_t k = 0; k < pl.size(); ++k)
            os << (k ? ", " : "") << fmt_double(pl[k].x) << ' ' << fmt_double(pl[k].y);
        os << '\n';
    }
    os << "\n[coarse]\nnx = " << c.coarse_nx << "\nny = " << c.coarse_ny << "\n\n";
    os << "[physics]\ncontinua = " << c.continua << "\nfracture = " << (c.fracture ? "true" : "false")
       << "\nboundary_value = " << fmt_double(c.boundary_value) << "\ninitial_value = " << fmt_double(c.initial_value)
       << "\ngravity = " << (c.gravity ? "true" : "false") << "\nsource = " << fmt_double(c.source) << "\n\n";
    detail::write_retention(os, "retention.1", c.retention[0]);
    if (c.continua > 1)
        detail::write_retention(os, "retention.2", c.retention[1]);
    if (c.fracture)
        detail::write_retention(os, "retention.f", c.fracture_retention);
    detail::write_field(os, "field.k1", c.k1);
    if (c.continua > 1) {
        detail::write_field(os, "field.k2", c.k2);
        detail::write_field(os, "field.sigma12", c.sigma12);
    }
    if (c.fracture)
        detail::write_field(os, "field.kf", c.kf);
}

inline void write_config(std::ostream& os, const SimulationConfig& c) {
    using detail::fmt_double;
    write_model_sections(os, c);
    os << "[time]\nt_max = " << fmt_double(c.time.t_max) << "\nsteps = " << c.time.n_steps
       << "\npicard_tol = " << fmt_double(c.time.picard_tol) << "\npicard_max = " << c.time.picard_max
       << "\nstrict = " << (c.time.strict ? "true" : "false") << "\n\n";
    os << "[basis]\npolicy = " << to_string(c.basis.kind) << "\ncounts = " << detail::join(c.basis.counts)
       << "\nthreshold = " << fmt_double(c.basis.threshold) << "\n\n";
    os << "[output]\ndir = " << c.output_dir << "\nsnapshots = " << detail::join(c.snapshots)
       << "\nvtk = " << (c.vtk ? "true" : "false") << '\n';
}

inline std::string config_to_string(const SimulationConfig& c) {
    std::ostringstream os;
    write_config(os, c);
    return os.str();
}

/// FNV-1a of the geometry/physics sections, hex encoded.
inline std::string model_fingerprint(const SimulationConfig& c, std::string_view extra = {}) {
    std::ostringstream os;
    write_model_sections(os, c);
    os << extra;
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : os.str()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ============================================================================
// Presets
// ============================================================================

/// Fracture network of the 2D tests. The published geometry exists only as a
/// figure; these polylines are an approximation drawn on a 0.025 lattice so
/// they conform to criss-cross meshes whose cell count per side is a
/// multiple of 40, stay off the 10x10 coarse lines and away from the top
/// boundary. Crossings are shared polyline vertices.
inline std::vector<Polyline> test_fracture_network() {
    return {
        {{0.125, 0.725}, {0.325, 0.725}, {0.625, 0.725}},
        {{0.325, 0.425}, {0.325, 0.725}, {0.325, 0.875}},
        {{0.475, 0.125}, {0.625, 0.275}, {0.875, 0.525}},
        {{0.575, 0.275}, {0.625, 0.275}, {0.925, 0.275}},
        {{0.125, 0.325}, {0.275, 0.175}},
    };
}

inline SimulationConfig preset(std::string_view id) {
    SimulationConfig c;
    c.fractures = test_fracture_network();
    c.k1 = FieldSpec::constant(10.0);
    c.kf = FieldSpec::constant(1e9);
    c.time.n_steps = 200;
    if (id == "test1") {
        c.continua = 1;
        c.time.t_max = 66e-4;
    } else if (id == "test2") {
        c.continua = 1;
        c.time.t_max = 11e-4;
        c.k1 = FieldSpec::lognormal(2, 100.0, 10.0, 0.1);
    } else if (id == "test3") {
        c.continua = 2;
        c.time.t_max = 1e-4;
        c.k1 = FieldSpec::lognormal(3, 100.0, 10.0, 0.1);
        c.k2 = FieldSpec::lognormal(4, 100.0, 1.0, 0.05);
        c.sigma12 = FieldSpec::proportional("k2", 1.0);
    } else {
        fail("unknown preset '", id, "' (expected test1, test2 or test3)");
    }
    c.output_dir = std::string("out_") + std::string(id);
    return c;
}

} // namespace mscontinua
