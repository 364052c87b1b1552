/// @file fem.hpp
/// @brief P1 finite-element assembly of the coupled multicontinua system with
///        an edge-based discrete fracture continuum.
///
/// Unknowns are nodal pressure heads, stacked continuum-major: dof(a, v) = a*N + v.
/// The fracture continuum lives on mesh edges and shares the background nodes;
/// it is folded into continuum 0 by eliminate_fracture() under p_0 = p_f.
///
/// Conventions:
///  - nonlinear coefficients are frozen per element at the centroid value
///    (mean of the vertex heads), per fracture edge at the midpoint value;
///  - capacity, mass and exchange matrices are row-sum lumped;
///  - gravity acts along +y: F_i = -int k d(phi_i)/dy, the weak form of the
///    d k/dz source with zero total flux on the Neumann sides.
#pragma once

#include "mscontinua/constitutive.hpp"
#include "mscontinua/mesh.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace mscontinua {

struct ContinuumSpec {
    Retention retention = HaverkampParams{};
    ConductivityField k_sat; ///< per triangle
    double source = 0.0;
    std::vector<double> source_field; ///< optional per-triangle source, added to `source`
};

struct FractureSpec {
    Retention retention = HaverkampParams{};
    ConductivityField k_sat; ///< per fracture edge
    double source = 0.0;
};

/// Everything that defines the fine-scale problem apart from time stepping.
struct MulticontinuaProblem {
    FineMesh mesh;
    std::vector<ContinuumSpec> continua;
    std::optional<FractureSpec> fracture;
    ExchangeField exchange;
    double boundary_value = -20.7;
    bool gravity = true;

    [[nodiscard]] int continuum_count() const { return static_cast<int>(continua.size()); }
    [[nodiscard]] int node_count() const { return mesh.node_count(); }
    [[nodiscard]] int dof_count() const { return continuum_count() * node_count(); }
    [[nodiscard]] bool has_fracture() const { return fracture.has_value() && mesh.fracture_edge_count() > 0; }

    void validate() const {
        if (continua.empty())
            fail("problem needs at least one continuum");
        for (int a = 0; a < continuum_count(); ++a) {
            mscontinua::validate(continua[a].retention);
            continua[a].k_sat.validate(mesh.triangles.size(), concat("k_sat of continuum ", a + 1));
            if (!continua[a].source_field.empty() && continua[a].source_field.size() != mesh.triangles.size())
                fail("source field of continuum ", a + 1, " has ", continua[a].source_field.size(),
                     " values, expected ", mesh.triangles.size());
        }
        if (fracture) {
            mscontinua::validate(fracture->retention);
            fracture->k_sat.validate(mesh.fracture_edges.size(), "fracture k_sat");
        }
        exchange.validate(continuum_count(), mesh.triangles.size(), mesh.fracture_edges.size());
    }
};

/// Per-continuum nodal pressure heads at one time level, stacked continuum-major.
/// Fracture heads are the continuum-0 values at fracture nodes.
struct ContinuaState {
    int continua = 0;
    int nodes = 0;
    Vector values;

    static ContinuaState constant(int continua, int nodes, double value) {
        return {continua, nodes, Vector::Constant(static_cast<Eigen::Index>(continua) * nodes, value)};
    }
    [[nodiscard]] auto continuum(int a) const { return values.segment(static_cast<Eigen::Index>(a) * nodes, nodes); }
    auto continuum(int a) { return values.segment(static_cast<Eigen::Index>(a) * nodes, nodes); }
};

// ============================================================================
// Element geometry and coefficient sampling
// ============================================================================

struct TriangleGeometry {
    double area = 0.0;
    std::array<double, 3> dx{}; ///< d(phi_k)/dx
    std::array<double, 3> dy{}; ///< d(phi_k)/dy
};

inline TriangleGeometry triangle_geometry(const FineMesh& mesh, int t) {
    const auto& [a, b, c] = mesh.triangles[t];
    const Point &pa = mesh.nodes[a], &pb = mesh.nodes[b], &pc = mesh.nodes[c];
    const double det = (pb.x - pa.x) * (pc.y - pa.y) - (pc.x - pa.x) * (pb.y - pa.y);
    if (!(det > 0.0))
        fail("degenerate or inverted triangle ", t, " (twice signed area ", det, ")");
    TriangleGeometry g;
    g.area = 0.5 * det;
    g.dx = {(pb.y - pc.y) / det, (pc.y - pa.y) / det, (pa.y - pb.y) / det};
    g.dy = {(pc.x - pb.x) / det, (pa.x - pc.x) / det, (pb.x - pa.x) / det};
    return g;
}

inline double fracture_edge_length(const FineMesh& mesh, int e) {
    const double len = mesh.edge_length(e);
    if (!(len > 0.0))
        fail("zero-length fracture edge ", e);
    return len;
}

/// Head at the element centroid, the mean of the vertex values.
inline double centroid_value(const FineMesh& mesh, int t, const Eigen::Ref<const Vector>& p) {
    const auto& [a, b, c] = mesh.triangles[t];
    return (p[a] + p[b] + p[c]) / 3.0;
}

inline double midpoint_value(const FineMesh& mesh, int e, const Eigen::Ref<const Vector>& p) {
    return 0.5 * (p[mesh.fracture_edges[e][0]] + p[mesh.fracture_edges[e][1]]);
}

/// k_r(p at centroid) * k_s per triangle.
inline std::vector<double> element_conductivity(const FineMesh& mesh, const ConductivityField& k_sat,
                                                const Eigen::Ref<const Vector>& p, const Retention& r) {
    std::vector<double> k(mesh.triangles.size());
    for (int t = 0; t < mesh.triangle_count(); ++t)
        k[t] = k_relative(r, centroid_value(mesh, t, p)) * k_sat[t];
    return k;
}

inline std::vector<double> element_capacity(const FineMesh& mesh, const Eigen::Ref<const Vector>& p,
                                            const Retention& r) {
    std::vector<double> c(mesh.triangles.size());
    for (int t = 0; t < mesh.triangle_count(); ++t)
        c[t] = capacity(r, centroid_value(mesh, t, p));
    return c;
}

inline std::vector<double> edge_conductivity(const FineMesh& mesh, const ConductivityField& k_sat,
                                             const Eigen::Ref<const Vector>& p, const Retention& r) {
    std::vector<double> k(mesh.fracture_edges.size());
    for (int e = 0; e < mesh.fracture_edge_count(); ++e)
        k[e] = k_relative(r, midpoint_value(mesh, e, p)) * k_sat[e];
    return k;
}

inline std::vector<double> edge_capacity(const FineMesh& mesh, const Eigen::Ref<const Vector>& p, const Retention& r) {
    std::vector<double> c(mesh.fracture_edges.size());
    for (int e = 0; e < mesh.fracture_edge_count(); ++e)
        c[e] = capacity(r, midpoint_value(mesh, e, p));
    return c;
}

// ============================================================================
// Entry kernels. `items` restricts assembly to a subset of triangles/edges
// (empty = all). The sink receives (row, col, value) in mesh node numbering.
// ============================================================================

namespace detail {

template <typename F>
void for_items(std::span<const int> items, int count, F&& f) {
    if (items.empty())
        for (int i = 0; i < count; ++i)
            f(i);
    else
        for (int i : items)
            f(i);
}

} // namespace detail

template <typename Sink>
void stiffness_entries(const FineMesh& mesh, std::span<const double> coef, std::span<const int> items, Sink&& sink) {
    detail::for_items(items, mesh.triangle_count(), [&](int t) {
        const auto g = triangle_geometry(mesh, t);
        const auto& tri = mesh.triangles[t];
        const double s = coef[t] * g.area;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                sink(tri[i], tri[j], s * (g.dx[i] * g.dx[j] + g.dy[i] * g.dy[j]));
    });
}

template <typename Sink>
void fracture_stiffness_entries(const FineMesh& mesh, std::span<const double> coef, std::span<const int> items,
                                Sink&& sink) {
    detail::for_items(items, mesh.fracture_edge_count(), [&](int e) {
        const double s = coef[e] / fracture_edge_length(mesh, e);
        const auto [a, b] = mesh.fracture_edges[e];
        sink(a, a, s);
        sink(b, b, s);
        sink(a, b, -s);
        sink(b, a, -s);
    });
}

template <typename Sink>
void consistent_mass_entries(const FineMesh& mesh, std::span<const double> weight, std::span<const int> items,
                             Sink&& sink) {
    detail::for_items(items, mesh.triangle_count(), [&](int t) {
        const auto g = triangle_geometry(mesh, t);
        const auto& tri = mesh.triangles[t];
        const double s = weight[t] * g.area / 12.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                sink(tri[i], tri[j], i == j ? 2.0 * s : s);
    });
}

/// Row-sum lumped P1 mass weighted by a per-triangle coefficient: sum w*area/3.
inline void add_lumped_mass(Eigen::Ref<Vector> out, const FineMesh& mesh, std::span<const double> weight,
                            std::span<const int> items = {}) {
    detail::for_items(items, mesh.triangle_count(), [&](int t) {
        const double s = weight[t] * triangle_geometry(mesh, t).area / 3.0;
        for (int v : mesh.triangles[t])
            out[v] += s;
    });
}

/// Lumped 1D mass along fracture edges: sum w*len/2.
inline void add_lumped_edge_mass(Eigen::Ref<Vector> out, const FineMesh& mesh, std::span<const double> weight,
                                 std::span<const int> items = {}) {
    detail::for_items(items, mesh.fracture_edge_count(), [&](int e) {
        const double s = weight[e] * fracture_edge_length(mesh, e) / 2.0;
        out[mesh.fracture_edges[e][0]] += s;
        out[mesh.fracture_edges[e][1]] += s;
    });
}

inline SparseMatrix diagonal_matrix(const Vector& d) {
    SparseMatrix m(d.size(), d.size());
    m.reserve(Eigen::VectorXi::Constant(d.size(), 1));
    for (Eigen::Index i = 0; i < d.size(); ++i)
        m.insert(i, i) = d[i];
    m.makeCompressed();
    return m;
}

inline SparseMatrix from_triplets(Eigen::Index n, const std::vector<Triplet>& triplets) {
    SparseMatrix m(n, n);
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    return m;
}

// ============================================================================
// Single-block operators (N x N)
// ============================================================================

/// P1 stiffness with a given per-triangle coefficient.
inline SparseMatrix assemble_stiffness(const FineMesh& mesh, std::span<const double> coef) {
    std::vector<Triplet> trip;
    trip.reserve(9 * mesh.triangles.size());
    stiffness_entries(mesh, coef, {}, [&](int i, int j, double v) { trip.emplace_back(i, j, v); });
    return from_triplets(mesh.node_count(), trip);
}

/// Picard-frozen stiffness of one continuum at head p.
inline SparseMatrix assemble_stiffness(const FineMesh& mesh, const ConductivityField& k_sat,
                                       const Eigen::Ref<const Vector>& p, const Retention& r) {
    return assemble_stiffness(mesh, element_conductivity(mesh, k_sat, p, r));
}

inline SparseMatrix assemble_fracture_stiffness(const FineMesh& mesh, std::span<const double> coef) {
    std::vector<Triplet> trip;
    trip.reserve(4 * mesh.fracture_edges.size());
    fracture_stiffness_entries(mesh, coef, {}, [&](int i, int j, double v) { trip.emplace_back(i, j, v); });
    return from_triplets(mesh.node_count(), trip);
}

inline SparseMatrix assemble_fracture_stiffness(const FineMesh& mesh, const ConductivityField& k_fs,
                                                const Eigen::Ref<const Vector>& p, const Retention& r) {
    return assemble_fracture_stiffness(mesh, edge_conductivity(mesh, k_fs, p, r));
}

/// Lumped capacity C(p at centroid) * area/3, as a diagonal matrix.
inline SparseMatrix assemble_capacity(const FineMesh& mesh, const Eigen::Ref<const Vector>& p, const Retention& r) {
    Vector d = Vector::Zero(mesh.node_count());
    add_lumped_mass(d, mesh, element_capacity(mesh, p, r));
    return diagonal_matrix(d);
}

inline SparseMatrix assemble_fracture_capacity(const FineMesh& mesh, const Eigen::Ref<const Vector>& p,
                                               const Retention& r) {
    Vector d = Vector::Zero(mesh.node_count());
    add_lumped_edge_mass(d, mesh, edge_capacity(mesh, p, r));
    return diagonal_matrix(d);
}

/// Lumped exchange matrix Q for one pair; the same matrix serves Q_ab and Q_ba.
inline SparseMatrix assemble_exchange(const FineMesh& mesh, std::span<const double> sigma) {
    if (sigma.size() != mesh.triangles.size())
        fail("exchange field has ", sigma.size(), " values, expected ", mesh.triangles.size());
    for (std::size_t t = 0; t < sigma.size(); ++t)
        if (!(sigma[t] >= 0.0))
            fail("negative exchange coefficient ", sigma[t], " on triangle ", t);
    Vector d = Vector::Zero(mesh.node_count());
    add_lumped_mass(d, mesh, sigma);
    return diagonal_matrix(d);
}

inline SparseMatrix assemble_consistent_mass(const FineMesh& mesh, std::span<const double> weight) {
    std::vector<Triplet> trip;
    trip.reserve(9 * mesh.triangles.size());
    consistent_mass_entries(mesh, weight, {}, [&](int i, int j, double v) { trip.emplace_back(i, j, v); });
    return from_triplets(mesh.node_count(), trip);
}

/// Gravity load -int k d(phi_i)/dy with a per-triangle conductivity.
inline void add_gravity(Eigen::Ref<Vector> out, const FineMesh& mesh, std::span<const double> k,
                        std::span<const int> items = {}) {
    detail::for_items(items, mesh.triangle_count(), [&](int t) {
        const auto g = triangle_geometry(mesh, t);
        const auto& tri = mesh.triangles[t];
        for (int i = 0; i < 3; ++i)
            out[tri[i]] -= k[t] * g.area * g.dy[i];
    });
}

/// Gravity load along fracture edges: -int k_f (dz/ds)(d phi_i/ds) ds.
inline void add_fracture_gravity(Eigen::Ref<Vector> out, const FineMesh& mesh, std::span<const double> k,
                                 std::span<const int> items = {}) {
    detail::for_items(items, mesh.fracture_edge_count(), [&](int e) {
        const auto [a, b] = mesh.fracture_edges[e];
        const double s = k[e] * (mesh.nodes[b].y - mesh.nodes[a].y) / fracture_edge_length(mesh, e);
        out[a] += s;
        out[b] -= s;
    });
}

inline Vector assemble_gravity_rhs(const FineMesh& mesh, const ConductivityField& k_sat,
                                   const Eigen::Ref<const Vector>& p, const Retention& r) {
    Vector f = Vector::Zero(mesh.node_count());
    add_gravity(f, mesh, element_conductivity(mesh, k_sat, p, r));
    return f;
}

// ============================================================================
// Coupled system
// ============================================================================

/// Fine system at one Picard iterate:
///   diag(capacity) (p - p^m)/tau + stiffness p = rhs - (storage(p^m) - storage(p^n))/tau
/// `storage` is the lumped water volume M*Theta(p) per dof.
struct AssembledSystem {
    int continua = 0;
    int nodes = 0;
    Vector capacity;
    SparseMatrix stiffness;
    Vector rhs;
    Vector storage;
    double penalty = 0.0; ///< Dirichlet penalty once applied, 0 otherwise

    [[nodiscard]] Eigen::Index dof(int a, int node) const { return static_cast<Eigen::Index>(a) * nodes + node; }
    [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(continua) * nodes; }
    [[nodiscard]] SparseMatrix capacity_matrix() const { return diagonal_matrix(capacity); }
};

/// Fracture continuum blocks in node numbering (N x N, supported on fracture nodes).
struct FractureBlocks {
    Vector capacity;
    SparseMatrix stiffness;
    Vector rhs;
    Vector storage;
};

/// Background continua with exchange; no fracture contribution.
inline AssembledSystem assemble_background(const MulticontinuaProblem& pb, const Vector& p) {
    const FineMesh& mesh = pb.mesh;
    const int L = pb.continuum_count(), N = pb.node_count();
    if (p.size() != static_cast<Eigen::Index>(L) * N)
        fail("state has ", p.size(), " entries, expected ", L * N);
    AssembledSystem sys;
    sys.continua = L;
    sys.nodes = N;
    sys.capacity = Vector::Zero(L * N);
    sys.rhs = Vector::Zero(L * N);
    sys.storage = Vector::Zero(L * N);
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(9 * L) * mesh.triangles.size() + 4 * pb.exchange.background.size() * N);
    const std::vector<double> ones(mesh.triangles.size(), 1.0);
    Vector mass = Vector::Zero(N);
    add_lumped_mass(mass, mesh, ones);
    for (int a = 0; a < L; ++a) {
        const auto& spec = pb.continua[a];
        const auto pa = p.segment(static_cast<Eigen::Index>(a) * N, N);
        const auto k = element_conductivity(mesh, spec.k_sat, pa, spec.retention);
        const Eigen::Index off = static_cast<Eigen::Index>(a) * N;
        stiffness_entries(mesh, k, {}, [&](int i, int j, double v) { trip.emplace_back(off + i, off + j, v); });
        add_lumped_mass(sys.capacity.segment(off, N), mesh, element_capacity(mesh, pa, spec.retention));
        for (int v = 0; v < N; ++v)
            sys.storage[off + v] = mass[v] * theta(spec.retention, pa[v]);
        if (spec.source != 0.0)
            sys.rhs.segment(off, N) += spec.source * mass;
        if (!spec.source_field.empty())
            add_lumped_mass(sys.rhs.segment(off, N), mesh, spec.source_field);
        if (pb.gravity)
            add_gravity(sys.rhs.segment(off, N), mesh, k);
    }
    for (const auto& pair : pb.exchange.background) {
        Vector q = Vector::Zero(N);
        add_lumped_mass(q, mesh, pair.values);
        const Eigen::Index oa = static_cast<Eigen::Index>(pair.a) * N, ob = static_cast<Eigen::Index>(pair.b) * N;
        for (int v = 0; v < N; ++v) {
            if (q[v] == 0.0)
                continue;
            trip.emplace_back(oa + v, oa + v, q[v]);
            trip.emplace_back(ob + v, ob + v, q[v]);
            trip.emplace_back(oa + v, ob + v, -q[v]);
            trip.emplace_back(ob + v, oa + v, -q[v]);
        }
    }
    sys.stiffness = from_triplets(static_cast<Eigen::Index>(L) * N, trip);
    return sys;
}

/// Fracture blocks at the continuum-0 head (fracture heads coincide with it).
inline FractureBlocks assemble_fracture(const MulticontinuaProblem& pb, const Vector& p) {
    const FineMesh& mesh = pb.mesh;
    const int N = pb.node_count();
    FractureBlocks fb;
    fb.capacity = Vector::Zero(N);
    fb.rhs = Vector::Zero(N);
    fb.storage = Vector::Zero(N);
    if (!pb.has_fracture()) {
        fb.stiffness = SparseMatrix(N, N);
        return fb;
    }
    const auto& spec = *pb.fracture;
    const auto p0 = p.head(N);
    const auto k = edge_conductivity(mesh, spec.k_sat, p0, spec.retention);
    fb.stiffness = assemble_fracture_stiffness(mesh, k);
    add_lumped_edge_mass(fb.capacity, mesh, edge_capacity(mesh, p0, spec.retention));
    Vector len_mass = Vector::Zero(N);
    add_lumped_edge_mass(len_mass, mesh, std::vector<double>(mesh.fracture_edges.size(), 1.0));
    for (int v = 0; v < N; ++v)
        if (len_mass[v] != 0.0)
            fb.storage[v] = len_mass[v] * theta(spec.retention, p0[v]);
    if (spec.source != 0.0)
        fb.rhs += spec.source * len_mass;
    if (pb.gravity)
        add_fracture_gravity(fb.rhs, mesh, k);
    return fb;
}

/// Superposition reduction: with sigma_bf = 0 for b > 0 and p_0 = p_f, the
/// fracture capacity, stiffness, load and storage add into continuum 0.
inline AssembledSystem eliminate_fracture(AssembledSystem sys, const FractureBlocks& fb, const ExchangeField& ex) {
    for (std::size_t b = 1; b < ex.fracture.size(); ++b)
        for (double s : ex.fracture[b])
            if (s != 0.0)
                fail("fracture elimination requires zero matrix-fracture exchange for continuum ", b + 1,
                     " (got sigma = ", s, ")");
    const int N = sys.nodes;
    if (fb.stiffness.rows() != N || fb.capacity.size() != N)
        fail("fracture blocks have size ", fb.capacity.size(), ", expected ", N);
    sys.capacity.head(N) += fb.capacity;
    sys.rhs.head(N) += fb.rhs;
    sys.storage.head(N) += fb.storage;
    if (fb.stiffness.nonZeros() > 0) {
        SparseMatrix lift(sys.size(), sys.size());
        std::vector<Triplet> trip;
        trip.reserve(fb.stiffness.nonZeros());
        for (int k = 0; k < fb.stiffness.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(fb.stiffness, k); it; ++it)
                trip.emplace_back(it.row(), it.col(), it.value());
        lift.setFromTriplets(trip.begin(), trip.end());
        sys.stiffness += lift;
        sys.stiffness.makeCompressed();
    }
    return sys;
}

/// Background + eliminated fracture at iterate p.
inline AssembledSystem assemble_system(const MulticontinuaProblem& pb, const Vector& p) {
    auto sys = assemble_background(pb, p);
    if (pb.has_fracture())
        sys = eliminate_fracture(std::move(sys), assemble_fracture(pb, p), pb.exchange);
    return sys;
}

/// Penalty Dirichlet data on every continuum at DIRICHLET_TOP nodes:
/// A_ii += P and F_i += P g with P = 1e10 * max diag(A).
inline AssembledSystem apply_dirichlet(AssembledSystem sys, const FineMesh& mesh, double g) {
    const auto nodes = mesh.dirichlet_nodes();
    if (nodes.empty()) {
        warn("no Dirichlet nodes: the system is singular up to constants");
        return sys;
    }
    const double maxdiag = sys.stiffness.size() > 0 ? sys.stiffness.diagonal().cwiseAbs().maxCoeff() : 0.0;
    const double P = 1e10 * (maxdiag > 0.0 ? maxdiag : 1.0);
    for (int a = 0; a < sys.continua; ++a)
        for (int v : nodes) {
            const auto d = sys.dof(a, v);
            sys.stiffness.coeffRef(d, d) += P;
            sys.rhs[d] += P * g;
        }
    sys.penalty = P;
    return sys;
}

/// A p for an operator whose rows sum to zero (stiffness, exchange, eliminated
/// fracture), evaluated as sum_j A_ij (p_j - p_i). Constants map to exactly
/// zero; the plain product leaves eps * |A| * |p| behind, which with fracture
/// conductivities of 1e9 is far above the fixed-point tolerance.
inline Vector apply_kernel_exact(const SparseMatrix& A, const Vector& p) {
    Vector out = Vector::Zero(A.rows());
    for (Eigen::Index j = 0; j < A.outerSize(); ++j)
        for (SparseMatrix::InnerIterator it(A, j); it; ++it)
            if (it.row() != it.col())
                out[it.row()] += it.value() * (p[it.col()] - p[it.row()]);
    return out;
}

} // namespace mscontinua
