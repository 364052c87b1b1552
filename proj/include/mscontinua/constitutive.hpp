/// @file constitutive.hpp
/// @brief Haverkamp retention/conductivity relations and coefficient fields.
#pragma once

#include "mscontinua/coarse_grid.hpp"
#include "mscontinua/common.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace mscontinua {

/// Theta(p) = A (theta_s - theta_r) / (A + |p|^B) + theta_r
/// k_r(p)   = C / (C + |p|^D)
struct HaverkampParams {
    double A = 1.511e6;
    double B = 3.96;
    double C = 1.175e6;
    double D = 4.74;
    double theta_s = 0.287;
    double theta_r = 0.075;

    void validate() const {
        if (!(A > 0 && B > 0 && C > 0 && D > 0))
            fail("Haverkamp coefficients A, B, C, D must be positive");
        if (!(theta_s > theta_r && theta_r >= 0))
            fail("Haverkamp water contents need theta_s > theta_r >= 0");
    }
    friend bool operator==(const HaverkampParams&, const HaverkampParams&) = default;
};

/// Linear limit used for verification: Theta = theta_ref + capacity * p, k_r = 1.
struct LinearRetention {
    double capacity = 1.0;
    double theta_ref = 0.0;

    void validate() const {
        if (!(capacity >= 0))
            fail("linear retention capacity must be nonnegative");
    }
    friend bool operator==(const LinearRetention&, const LinearRetention&) = default;
};

using Retention = std::variant<HaverkampParams, LinearRetention>;

inline double theta(const HaverkampParams& h, double p) {
    return h.A * (h.theta_s - h.theta_r) / (h.A + std::pow(std::abs(p), h.B)) + h.theta_r;
}

/// dTheta/dp. At p = 0 the derivative of |p|^B is taken as 0.
inline double capacity(const HaverkampParams& h, double p) {
    if (p == 0.0)
        return 0.0;
    const double a = std::abs(p);
    const double pb = std::pow(a, h.B);
    const double denom = h.A + pb;
    const double dpb = h.B * pb / a * (p < 0 ? -1.0 : 1.0);
    return -h.A * (h.theta_s - h.theta_r) * dpb / (denom * denom);
}

inline double k_relative(const HaverkampParams& h, double p) { return h.C / (h.C + std::pow(std::abs(p), h.D)); }

inline double theta(const LinearRetention& l, double p) { return l.theta_ref + l.capacity * p; }
inline double capacity(const LinearRetention& l, double) { return l.capacity; }
inline double k_relative(const LinearRetention&, double) { return 1.0; }

inline double theta(const Retention& r, double p) {
    return std::visit([p](const auto& m) { return theta(m, p); }, r);
}
inline double capacity(const Retention& r, double p) {
    return std::visit([p](const auto& m) { return capacity(m, p); }, r);
}
inline double k_relative(const Retention& r, double p) {
    return std::visit([p](const auto& m) { return k_relative(m, p); }, r);
}
inline void validate(const Retention& r) {
    std::visit([](const auto& m) { m.validate(); }, r);
}

// ============================================================================
// Piecewise-constant coefficient fields
// ============================================================================

/// Saturated conductivity, one value per triangle (background continua) or per
/// fracture edge (fracture continuum).
struct ConductivityField {
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }

    void validate(std::size_t expected, std::string_view what) const {
        if (values.size() != expected)
            fail(what, " has ", values.size(), " values, expected ", expected);
        for (std::size_t i = 0; i < values.size(); ++i)
            if (!(values[i] > 0.0) || !std::isfinite(values[i]))
                fail(what, " value ", i, " must be positive and finite, got ", values[i]);
    }
    friend bool operator==(const ConductivityField&, const ConductivityField&) = default;
};

/// Transfer coefficients. `background[{a,b}]` holds sigma_ab per triangle for
/// a < b; `fracture[a]` holds sigma_af per fracture edge (empty means zero).
struct ExchangeField {
    struct Pair {
        int a = 0;
        int b = 1;
        std::vector<double> values;
    };
    std::vector<Pair> background;
    std::vector<std::vector<double>> fracture;

    void validate(int continua, std::size_t triangles, std::size_t fracture_edges) const {
        for (const auto& pr : background) {
            if (pr.a < 0 || pr.b >= continua || pr.a >= pr.b)
                fail("exchange pair (", pr.a, ", ", pr.b, ") is invalid for ", continua, " continua");
            if (pr.values.size() != triangles)
                fail("exchange field (", pr.a, ", ", pr.b, ") has ", pr.values.size(), " values, expected ", triangles);
            for (double s : pr.values)
                if (!(s >= 0.0) || !std::isfinite(s))
                    fail("exchange coefficient must be nonnegative and finite, got ", s);
        }
        for (const auto& f : fracture) {
            if (!f.empty() && f.size() != fracture_edges)
                fail("fracture exchange field has ", f.size(), " values, expected ", fracture_edges);
            for (double s : f)
                if (!(s >= 0.0))
                    fail("exchange coefficient must be nonnegative, got ", s);
        }
    }
};

inline ConductivityField constant_field(std::size_t n, double value) { return {std::vector<double>(n, value)}; }

/// Horizontal bands: values[k] applies for y in [breaks[k-1], breaks[k]).
inline ConductivityField layered_field(const std::vector<Point>& centroids, const std::vector<double>& breaks,
                                       const std::vector<double>& values) {
    if (values.size() != breaks.size() + 1)
        fail("layered field needs one more value than breaks");
    ConductivityField f;
    f.values.reserve(centroids.size());
    for (const auto& c : centroids) {
        std::size_t k = 0;
        while (k < breaks.size() && c.y >= breaks[k])
            ++k;
        f.values.push_back(values[k]);
    }
    return f;
}

/// Smooth log-normal surrogate: a seeded sum of random cosine modes, mapped
/// so that max/min = contrast and the geometric midpoint equals `center`.
inline ConductivityField lognormal_field(const std::vector<Point>& centroids, unsigned seed, double contrast,
                                         double center, double correlation = 0.1, int modes = 64) {
    if (!(contrast >= 1.0))
        fail("lognormal field contrast must be >= 1");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    struct Mode {
        double kx, ky, phase;
    };
    std::vector<Mode> ms;
    for (int m = 0; m < modes; ++m) {
        const double angle = 2.0 * std::numbers::pi * uni(rng);
        // Radial wavenumber ~ Rayleigh: Gaussian covariance with the given correlation length.
        const double r = std::sqrt(-2.0 * std::log(1.0 - uni(rng))) / correlation;
        ms.push_back({r * std::cos(angle), r * std::sin(angle), 2.0 * std::numbers::pi * uni(rng)});
    }
    std::vector<double> g(centroids.size(), 0.0);
    for (std::size_t e = 0; e < centroids.size(); ++e)
        for (const auto& m : ms)
            g[e] += std::cos(m.kx * centroids[e].x + m.ky * centroids[e].y + m.phase);
    const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
    const double gmin = g.empty() ? 0.0 : *lo, span = g.empty() ? 1.0 : std::max(*hi - *lo, 1e-300);
    ConductivityField f;
    f.values.reserve(g.size());
    for (double v : g)
        f.values.push_back(center * std::pow(contrast, (v - gmin) / span - 0.5));
    return f;
}

inline std::vector<Point> triangle_centroids(const FineMesh& mesh) {
    std::vector<Point> c;
    c.reserve(mesh.triangles.size());
    for (const auto& [a, b, d] : mesh.triangles)
        c.push_back({(mesh.nodes[a].x + mesh.nodes[b].x + mesh.nodes[d].x) / 3.0,
                     (mesh.nodes[a].y + mesh.nodes[b].y + mesh.nodes[d].y) / 3.0});
    return c;
}

/// Field file: `field <n_values>` then one value per line; '#' comments.
inline ConductivityField load_field(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        fail("cannot open field file '", path, "'");
    ConductivityField f;
    std::string line;
    long expected = -1;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok))
            continue;
        if (expected < 0) {
            if (tok != "field" || !(ls >> expected) || expected < 0)
                fail(path, ":", lineno, ": expected header 'field <n_values>'");
            continue;
        }
        try {
            std::size_t used = 0;
            f.values.push_back(std::stod(tok, &used));
            if (used != tok.size())
                throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            fail(path, ":", lineno, ": not a number: '", tok, "'");
        }
    }
    if (expected < 0)
        fail(path, ": missing 'field' header");
    if (static_cast<long>(f.values.size()) != expected)
        fail(path, ": header declares ", expected, " values but file has ", f.values.size());
    return f;
}

inline void save_field(const std::string& path, const ConductivityField& f) {
    std::ofstream os(path);
    if (!os)
        fail("cannot open field file '", path, "' for writing");
    os << "field " << f.values.size() << '\n' << std::setprecision(17);
    for (double v : f.values)
        os << v << '\n';
}

} // namespace mscontinua
