/// @file msfem.hpp
/// @brief Coupled multiscale basis construction and the coarse (projected) solve.
///
/// Offline, per coarse node i:
///   1. assemble saturated operators on omega_i (stiffness + exchange A^s and
///      the conductivity-weighted lumped mass S^s, fracture folded into
///      continuum 0);
///   2. snapshots: one coupled local solve per boundary node l of omega_i with
///      data delta_l on every continuum;
///   3. spectral problem A_snap x = lambda S_snap x on the snapshot span; the
///      eigenvectors with the smallest eigenvalues are the local bases Psi;
///   4. R^T columns are chi_i * Psi (partition-of-unity weighted).
/// Online, the fine Picard system is projected, K_c = R K R^T, b_c = R b, and
/// the fine field is recovered as R^T p_c.
#pragma once

#include "mscontinua/coarse_grid.hpp"
#include "mscontinua/fem.hpp"
#include "mscontinua/linear_solver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

namespace mscontinua {

// ============================================================================
// Patch operators
// ============================================================================

/// Fracture edges belonging to omega_i (edges of at least one patch triangle).
inline std::vector<std::vector<int>> patch_fracture_edges(const FineMesh& mesh, const CoarseGrid& grid) {
    std::vector<std::vector<int>> out(grid.node_count());
    if (mesh.fracture_edges.empty())
        return out;
    const auto edges = edge_triangle_map(mesh);
    std::vector<std::vector<int>> tri_patches(mesh.triangles.size());
    for (int i = 0; i < grid.node_count(); ++i)
        for (int t : grid.patch_triangles[i])
            tri_patches[t].push_back(i);
    for (int e = 0; e < mesh.fracture_edge_count(); ++e) {
        std::vector<int> ps;
        for (int t : edges.at(sorted_edge(mesh.fracture_edges[e][0], mesh.fracture_edges[e][1])))
            ps.insert(ps.end(), tri_patches[t].begin(), tri_patches[t].end());
        std::sort(ps.begin(), ps.end());
        ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
        for (int i : ps)
            out[i].push_back(e);
    }
    return out;
}

/// Saturated local operators on omega_i in local numbering dof = a*n + j,
/// j indexing CoarseGrid::patch_nodes[i].
struct PatchOperators {
    int patch = 0;
    int continua = 1;
    std::vector<int> nodes;
    std::vector<int> boundary; ///< local node indices on the boundary of omega_i
    std::vector<int> interior;
    DenseMatrix stiffness; ///< A^s
    Vector mass;           ///< diagonal of S^s
    std::vector<std::vector<int>> fracture_components; ///< local node lists

    [[nodiscard]] int node_count() const { return static_cast<int>(nodes.size()); }
    [[nodiscard]] int local_size() const { return continua * node_count(); }
    [[nodiscard]] int boundary_count() const { return static_cast<int>(boundary.size()); }
};

inline PatchOperators assemble_patch_operators(const MulticontinuaProblem& pb, const CoarseGrid& grid, int patch,
                                               const std::vector<int>& fracture_edges) {
    const FineMesh& mesh = pb.mesh;
    PatchOperators op;
    op.patch = patch;
    op.continua = pb.continuum_count();
    op.nodes = grid.patch_nodes[patch];
    const int n = op.node_count(), L = op.continua;
    std::vector<int> local(mesh.node_count(), -1);
    for (int j = 0; j < n; ++j)
        local[op.nodes[j]] = j;
    {
        std::size_t b = 0;
        const auto& bnd = grid.patch_boundary_nodes[patch];
        for (int j = 0; j < n; ++j) {
            if (b < bnd.size() && bnd[b] == op.nodes[j]) {
                op.boundary.push_back(j);
                ++b;
            } else {
                op.interior.push_back(j);
            }
        }
    }
    const std::span<const int> tris = grid.patch_triangles[patch];
    op.stiffness = DenseMatrix::Zero(L * n, L * n);
    op.mass = Vector::Zero(L * n);
    Vector full = Vector::Zero(mesh.node_count());
    for (int a = 0; a < L; ++a) {
        const auto& k = pb.continua[a].k_sat.values;
        const int off = a * n;
        stiffness_entries(mesh, k, tris,
                          [&](int r, int c, double v) { op.stiffness(off + local[r], off + local[c]) += v; });
        full.setZero();
        add_lumped_mass(full, mesh, k, tris);
        for (int j = 0; j < n; ++j)
            op.mass[off + j] = full[op.nodes[j]];
    }
    for (const auto& pair : pb.exchange.background) {
        full.setZero();
        add_lumped_mass(full, mesh, pair.values, tris);
        for (int j = 0; j < n; ++j) {
            const double q = full[op.nodes[j]];
            const int ia = pair.a * n + j, ib = pair.b * n + j;
            op.stiffness(ia, ia) += q;
            op.stiffness(ib, ib) += q;
            op.stiffness(ia, ib) -= q;
            op.stiffness(ib, ia) -= q;
        }
    }
    if (pb.has_fracture() && !fracture_edges.empty()) {
        const auto& kf = pb.fracture->k_sat.values;
        fracture_stiffness_entries(mesh, kf, fracture_edges,
                                   [&](int r, int c, double v) { op.stiffness(local[r], local[c]) += v; });
        full.setZero();
        add_lumped_edge_mass(full, mesh, kf, fracture_edges);
        for (int j = 0; j < n; ++j)
            op.mass[j] += full[op.nodes[j]];

        // connected components of the fracture graph inside the patch
        std::vector<int> parent(n);
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](int x) {
            while (parent[x] != x)
                x = parent[x] = parent[parent[x]];
            return x;
        };
        std::vector<char> on_fracture(n, 0);
        for (int e : fracture_edges) {
            const int a = local[mesh.fracture_edges[e][0]], b = local[mesh.fracture_edges[e][1]];
            on_fracture[a] = on_fracture[b] = 1;
            parent[find(a)] = find(b);
        }
        std::map<int, std::vector<int>> comps;
        for (int j = 0; j < n; ++j)
            if (on_fracture[j])
                comps[find(j)].push_back(j);
        std::vector<std::vector<int>> ordered;
        for (auto& [root, nodes] : comps)
            ordered.push_back(std::move(nodes));
        std::sort(ordered.begin(), ordered.end());
        op.fracture_components = std::move(ordered);
    }
    op.stiffness = 0.5 * (op.stiffness + op.stiffness.transpose());
    return op;
}

/// Solves A x = 0 on the unconstrained dofs with x prescribed on `fixed`
/// (one column of prescribed values per right-hand side).
inline DenseMatrix local_extension(const PatchOperators& op, const std::vector<int>& fixed, const DenseMatrix& values) {
    const int m = op.local_size();
    std::vector<char> is_fixed(m, 0);
    for (int d : fixed)
        is_fixed[d] = 1;
    std::vector<int> free;
    for (int d = 0; d < m; ++d)
        if (!is_fixed[d])
            free.push_back(d);
    const int nf = static_cast<int>(free.size()), nb = static_cast<int>(fixed.size());
    DenseMatrix out = DenseMatrix::Zero(m, values.cols());
    for (int k = 0; k < nb; ++k)
        out.row(fixed[k]) = values.row(k);
    if (nf == 0)
        return out;
    DenseMatrix Aff(nf, nf), Afb(nf, nb);
    for (int r = 0; r < nf; ++r) {
        for (int c = 0; c < nf; ++c)
            Aff(r, c) = op.stiffness(free[r], free[c]);
        for (int c = 0; c < nb; ++c)
            Afb(r, c) = op.stiffness(free[r], fixed[c]);
    }
    Eigen::LLT<DenseMatrix> llt(Aff);
    if (llt.info() != Eigen::Success)
        fail("singular local system on patch ", op.patch,
             " (an interior component is not connected to prescribed data)");
    const DenseMatrix xf = llt.solve(-Afb * values);
    for (int r = 0; r < nf; ++r)
        out.row(free[r]) = xf.row(r);
    return out;
}

// ============================================================================
// Snapshots and local spectral problem
// ============================================================================

/// Columns are the coupled snapshots phi^{i,l}, l over boundary nodes of omega_i.
struct SnapshotSpace {
    int patch = 0;
    DenseMatrix snapshots; ///< (L n) x J
};

inline SnapshotSpace build_snapshots(const PatchOperators& op) {
    const int n = op.node_count(), L = op.continua, J = op.boundary_count();
    std::vector<int> fixed;
    fixed.reserve(L * J);
    DenseMatrix data = DenseMatrix::Zero(L * J, J);
    for (int a = 0; a < L; ++a)
        for (int l = 0; l < J; ++l) {
            fixed.push_back(a * n + op.boundary[l]);
            data(a * J + l, l) = 1.0;
        }
    return {op.patch, local_extension(op, fixed, data)};
}

/// Local basis of one patch. `vectors` holds every available basis vector in
/// fine-node form; the first `count` are selected.
struct PatchBasis {
    int patch = 0;
    Vector eigenvalues;       ///< ascending; empty for simplified bases
    DenseMatrix coefficients; ///< snapshot-coefficient form, J x K (empty for simplified)
    DenseMatrix vectors;      ///< (L n) x K
    int count = 0;

    [[nodiscard]] int available() const { return static_cast<int>(vectors.cols()); }
};

struct SpectralBasis {
    std::vector<PatchBasis> patches;

    [[nodiscard]] int total() const {
        int s = 0;
        for (const auto& p : patches)
            s += p.count;
        return s;
    }
    [[nodiscard]] std::vector<int> counts() const {
        std::vector<int> c;
        for (const auto& p : patches)
            c.push_back(p.count);
        return c;
    }
};

inline PatchBasis solve_local_spectral(const SnapshotSpace& snap, const PatchOperators& op) {
    const DenseMatrix& X = snap.snapshots;
    DenseMatrix A = X.transpose() * op.stiffness * X;
    DenseMatrix S = X.transpose() * op.mass.asDiagonal() * X;
    A = 0.5 * (A + A.transpose()).eval();
    S = 0.5 * (S + S.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<DenseMatrix> es;
    es.compute(A, S, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    if (es.info() != Eigen::Success) {
        warn("patch ", op.patch, ": snapshot mass matrix is numerically singular, regularizing");
        S.diagonal().array() += 1e-12 * S.trace();
        es.compute(A, S, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
        if (es.info() != Eigen::Success)
            fail("local spectral problem did not converge on patch ", op.patch);
    }
    PatchBasis b;
    b.patch = op.patch;
    b.eigenvalues = es.eigenvalues();
    b.coefficients = es.eigenvectors();
    b.vectors = X * b.coefficients;
    b.count = static_cast<int>(b.eigenvalues.size());
    // The constant is the exact lambda = 0 eigenvector (no Dirichlet rows, the
    // snapshots sum to one) but comes back only to cond * eps; with stiff
    // fractures that is enough to drift a constant state. Snap it.
    if (b.count > 0) {
        const Vector v0 = b.vectors.col(0);
        const double mean = v0.mean();
        if (mean != 0.0 && (v0.array() - mean).abs().maxCoeff() < 1e-3 * std::abs(mean)) {
            // X * 1 = 1, so the snapshot coefficients of the constant are all equal
            DenseMatrix& C = b.coefficients;
            C.col(0).setOnes();
            C.col(0) /= std::sqrt(C.col(0).dot(S * C.col(0)));
            const Vector Sc0 = S * C.col(0);
            for (Eigen::Index k = 1; k < C.cols(); ++k) {
                C.col(k) -= Sc0.dot(C.col(k)) * C.col(0);
                C.col(k) /= std::sqrt(C.col(k).dot(S * C.col(k)));
            }
            b.vectors = X * C;
            b.vectors.col(0).setConstant(1.0 / std::sqrt(op.mass.sum()));
        }
    }
    return b;
}

/// Keep the first min(M, available) eigenvectors on every patch.
inline SpectralBasis select_fixed(SpectralBasis basis, int M) {
    if (M < 1)
        fail("number of basis functions per patch must be >= 1, got ", M);
    for (auto& p : basis.patches)
        p.count = std::min(M, p.available());
    return basis;
}

/// Keep eigenpairs with lambda < threshold, at least one and at most J per patch.
inline SpectralBasis select_adaptive(SpectralBasis basis, double threshold) {
    for (auto& p : basis.patches) {
        int m = 0;
        while (m < p.eigenvalues.size() && p.eigenvalues[m] < threshold)
            ++m;
        p.count = std::clamp(m, 1, std::max(1, p.available()));
    }
    return basis;
}

/// Basis without an eigensolve: one coupled extension of constant boundary
/// data per continuum, plus one extension per fracture component of its
/// indicator on boundary fracture nodes. A component that does not reach the
/// patch boundary is prescribed 1 on its own nodes instead.
inline PatchBasis build_simplified_basis(const PatchOperators& op) {
    const int n = op.node_count(), L = op.continua, J = op.boundary_count();
    std::vector<DenseMatrix> cols;
    {
        std::vector<int> fixed;
        DenseMatrix data = DenseMatrix::Zero(L * J, L);
        for (int a = 0; a < L; ++a)
            for (int l = 0; l < J; ++l) {
                fixed.push_back(a * n + op.boundary[l]);
                data(a * J + l, a) = 1.0;
            }
        cols.push_back(local_extension(op, fixed, data));
    }
    std::vector<char> is_boundary(n, 0);
    for (int j : op.boundary)
        is_boundary[j] = 1;
    for (const auto& comp : op.fracture_components) {
        std::vector<char> in_comp(n, 0);
        bool touches = false;
        for (int j : comp) {
            in_comp[j] = 1;
            touches = touches || is_boundary[j];
        }
        std::vector<int> fixed;
        std::vector<double> vals;
        for (int a = 0; a < L; ++a)
            for (int j : op.boundary) {
                fixed.push_back(a * n + j);
                vals.push_back(a == 0 && in_comp[j] ? 1.0 : 0.0);
            }
        if (!touches)
            for (int j : comp) {
                fixed.push_back(j);
                vals.push_back(1.0);
            }
        cols.push_back(local_extension(op, fixed, Eigen::Map<const Vector>(vals.data(), vals.size())));
    }
    PatchBasis b;
    b.patch = op.patch;
    int k = 0;
    for (const auto& c : cols)
        k += static_cast<int>(c.cols());
    b.vectors.resize(L * n, k);
    k = 0;
    for (const auto& c : cols) {
        b.vectors.middleCols(k, c.cols()) = c;
        k += static_cast<int>(c.cols());
    }
    b.count = k;
    return b;
}

// ============================================================================
// Offline driver
// ============================================================================

/// Patch operators for every coarse node.
inline std::vector<PatchOperators> assemble_all_patches(const MulticontinuaProblem& pb, const CoarseGrid& grid) {
    const auto edges = patch_fracture_edges(pb.mesh, grid);
    std::vector<PatchOperators> ops;
    ops.reserve(grid.node_count());
    for (int i = 0; i < grid.node_count(); ++i)
        ops.push_back(assemble_patch_operators(pb, grid, i, edges[i]));
    return ops;
}

/// Full local eigen-decomposition on every patch (all J eigenpairs kept).
inline SpectralBasis compute_spectral_bases(const std::vector<PatchOperators>& ops) {
    SpectralBasis basis;
    basis.patches.reserve(ops.size());
    for (const auto& op : ops)
        basis.patches.push_back(solve_local_spectral(build_snapshots(op), op));
    return basis;
}

inline SpectralBasis compute_simplified_bases(const std::vector<PatchOperators>& ops) {
    SpectralBasis basis;
    basis.patches.reserve(ops.size());
    for (const auto& op : ops)
        basis.patches.push_back(build_simplified_basis(op));
    return basis;
}

// ============================================================================
// Projection operator
// ============================================================================

struct ProjectionOperator {
    SparseMatrix R; ///< (sum M_i) x (L N)
    std::vector<std::pair<int, int>> owner; ///< coarse row -> (patch, basis index)

    [[nodiscard]] int coarse_dofs() const { return static_cast<int>(R.rows()); }
    [[nodiscard]] int fine_dofs() const { return static_cast<int>(R.cols()); }
};

inline ProjectionOperator assemble_projection(const SpectralBasis& basis, const CoarseGrid& grid,
                                              const PartitionOfUnity& pou, int continua, int fine_nodes) {
    if (basis.patches.size() != static_cast<std::size_t>(grid.node_count()))
        fail("basis has ", basis.patches.size(), " patches, coarse grid has ", grid.node_count(), " nodes");
    ProjectionOperator P;
    std::vector<Triplet> trip;
    int row = 0;
    for (const auto& pbas : basis.patches) {
        const int i = pbas.patch;
        const auto& nodes = grid.patch_nodes[i];
        const auto& chi = pou.values[i];
        const int n = static_cast<int>(nodes.size());
        if (pbas.vectors.rows() != continua * n)
            fail("basis of patch ", i, " has ", pbas.vectors.rows(), " rows, expected ", continua * n);
        for (int k = 0; k < pbas.count; ++k, ++row) {
            for (const auto& [pi, pk] : P.owner)
                if (pi == i && pk == k)
                    fail("duplicate multiscale basis (patch ", i, ", index ", k, ")");
            P.owner.emplace_back(i, k);
            for (int a = 0; a < continua; ++a)
                for (int j = 0; j < n; ++j) {
                    const double v = chi[j] * pbas.vectors(a * n + j, k);
                    if (v != 0.0)
                        trip.emplace_back(row, static_cast<Eigen::Index>(a) * fine_nodes + nodes[j], v);
                }
        }
    }
    P.R.resize(row, static_cast<Eigen::Index>(continua) * fine_nodes);
    P.R.setFromTriplets(trip.begin(), trip.end());
    P.R.makeCompressed();
    return P;
}

// ============================================================================
// Online coarse solve
// ============================================================================

struct CoarseSolution {
    Vector coarse;
    Vector fine; ///< R^T p_c
};

/// Dirichlet data for the coarse solve: fine dofs held at a common value.
struct CoarseConstraint {
    std::vector<Eigen::Index> dofs;
    double value = 0.0;
};

/// Galerkin solve of K p = b in the span of R^T.
///
/// With a constraint, the solve is the limit of the penalty method as the
/// penalty grows: the coarse coefficients first minimize the misfit
/// ||(R^T y)_D - g|| and the remaining freedom (null space of that map) is
/// determined by the Galerkin system. Projecting a penalized fine matrix
/// directly mixes ~1e21 penalty entries with O(1e-2) entries in a dense
/// coarse block and loses positive definiteness in floating point.
class CoarseSolver {
public:
    explicit CoarseSolver(const ProjectionOperator& P) : P_(&P), Rt_(P.R.transpose()) {}

    CoarseSolution solve(const SparseMatrix& K, const Vector& b, double scale = 0.0) {
        const SparseMatrix Kc = (P_->R * (K * Rt_)).pruned();
        const Vector bc = P_->R * b;
        CoarseSolution s;
        try {
            s.coarse = spd_.solve(Kc, bc, "coarse system: ", scale);
        } catch (const Error& e) {
            fail(e.what(), diagnose(Kc));
        }
        s.fine = Rt_ * s.coarse;
        return s;
    }

    CoarseSolution solve(const SparseMatrix& K, const Vector& b, const CoarseConstraint& c) {
        if (c.dofs.empty())
            return solve(K, b);
        return solve(K, b, c.dofs, Vector::Constant(static_cast<Eigen::Index>(c.dofs.size()), c.value));
    }

    /// Constrained solve with per-dof data (data[k] belongs to dofs[k]). For an
    /// increment solve, `reference` is the full fine right side the residual
    /// contract is measured against.
    CoarseSolution solve(const SparseMatrix& K, const Vector& b, const std::vector<Eigen::Index>& dofs,
                         const Vector& data, const Vector& reference = {}) {
        if (dofs.empty())
            return solve(K, b, reference.size() > 0 ? (P_->R * reference).norm() : 0.0);
        if (dofs != constrained_)
            setup(dofs);
        const SparseMatrix Kc = (P_->R * (K * Rt_)).pruned();
        const Vector y0 = lift(data);
        const Vector rhs = Tt_ * (P_->R * b - Kc * y0);
        const SparseMatrix KT = Kc * T_;
        const SparseMatrix Kr = (Tt_ * KT).pruned();
        CoarseSolution s;
        try {
            const double scale = reference.size() > 0 ? (Tt_ * (P_->R * reference)).norm() : 0.0;
            s.coarse = y0 + T_ * spd_.solve(Kr, rhs, "coarse system: ", scale);
        } catch (const Error& e) {
            fail(e.what(), diagnose(Kc));
        }
        s.fine = Rt_ * s.coarse;
        return s;
    }

    /// Number of coarse directions fixed by the constraint (0 before use).
    [[nodiscard]] Eigen::Index constrained_rank() const { return rank_; }

private:
    void setup(const std::vector<Eigen::Index>& given) {
        constrained_ = given;
        std::vector<Eigen::Index> dofs = given;
        std::sort(dofs.begin(), dofs.end());
        const Eigen::Index nc = P_->coarse_dofs();
        // coarse dofs whose functions touch the constrained fine dofs
        std::vector<char> touched(nc, 0);
        std::vector<char> is_dof(Rt_.rows(), 0);
        for (auto d : dofs)
            is_dof[d] = 1;
        for (Eigen::Index r = 0; r < P_->R.outerSize(); ++r)
            for (SparseMatrix::InnerIterator it(P_->R, r); it; ++it)
                if (is_dof[it.col()] && it.value() != 0.0)
                    touched[it.row()] = 1;
        std::vector<Eigen::Index> S, free;
        for (Eigen::Index j = 0; j < nc; ++j)
            (touched[j] ? S : free).push_back(j);
        std::vector<Eigen::Index> col_of(nc, -1);
        for (std::size_t k = 0; k < S.size(); ++k)
            col_of[S[k]] = static_cast<Eigen::Index>(k);
        const auto nd = static_cast<Eigen::Index>(dofs.size()), ns = static_cast<Eigen::Index>(S.size());
        DenseMatrix B = DenseMatrix::Zero(nd, ns);
        for (Eigen::Index j = 0; j < ns; ++j)
            for (SparseMatrix::InnerIterator it(Rt_, S[j]); it; ++it)
                if (is_dof[it.row()]) {
                    const auto r = std::lower_bound(dofs.begin(), dofs.end(), it.row()) - dofs.begin();
                    B(r, j) = it.value();
                }
        Eigen::JacobiSVD<DenseMatrix> svd(B, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Vector& sv = svd.singularValues();
        const double tol = sv.size() > 0 ? 1e-8 * sv[0] : 0.0;
        rank_ = 0;
        while (rank_ < sv.size() && sv[rank_] > tol)
            ++rank_;
        sorted_ = dofs;
        touched_ = S;
        Ur_ = svd.matrixU().leftCols(rank_);
        Vr_ = svd.matrixV().leftCols(rank_);
        sv_ = sv.head(rank_);
        // free coordinates: untouched coarse dofs, then the null space of B
        const DenseMatrix V0 = svd.matrixV().rightCols(ns - rank_);
        std::vector<Triplet> trip;
        Eigen::Index col = 0;
        for (auto j : free)
            trip.emplace_back(j, col++, 1.0);
        for (Eigen::Index k = 0; k < V0.cols(); ++k, ++col)
            for (Eigen::Index j = 0; j < ns; ++j)
                if (V0(j, k) != 0.0)
                    trip.emplace_back(S[j], col, V0(j, k));
        T_.resize(nc, col);
        T_.setFromTriplets(trip.begin(), trip.end());
        T_.makeCompressed();
        Tt_ = T_.transpose();
    }

    /// Minimum-norm least-squares coefficients y with (R^T y)_D closest to data.
    [[nodiscard]] Vector lift(const Vector& data) const {
        Vector d(static_cast<Eigen::Index>(sorted_.size()));
        for (std::size_t k = 0; k < constrained_.size(); ++k) {
            const auto r = std::lower_bound(sorted_.begin(), sorted_.end(), constrained_[k]) - sorted_.begin();
            d[r] = data[static_cast<Eigen::Index>(k)];
        }
        Vector y = Vector::Zero(P_->coarse_dofs());
        if (rank_ == 0)
            return y;
        const Vector w = Vr_ * (Ur_.transpose() * d).cwiseQuotient(sv_);
        for (std::size_t j = 0; j < touched_.size(); ++j)
            y[touched_[j]] = w[static_cast<Eigen::Index>(j)];
        return y;
    }

    std::string diagnose(const SparseMatrix& Kc) const {
        Eigen::Index worst = 0;
        const Vector d = Kc.diagonal();
        for (Eigen::Index r = 1; r < d.size(); ++r)
            if (d[r] < d[worst])
                worst = r;
        if (d.size() == 0)
            return " (empty coarse space)";
        const auto [patch, k] = P_->owner[worst];
        return concat(" (smallest coarse diagonal ", d[worst], " at row ", worst, " = patch ", patch, " basis ", k,
                      "; the basis set is probably rank deficient)");
    }

    const ProjectionOperator* P_;
    SparseMatrix Rt_;
    SpdSolver spd_;
    std::vector<Eigen::Index> constrained_;
    Eigen::Index rank_ = 0;
    std::vector<Eigen::Index> sorted_, touched_;
    DenseMatrix Ur_, Vr_;
    Vector sv_;
    SparseMatrix T_;
    SparseMatrix Tt_;
};

inline CoarseSolution coarse_solve(const ProjectionOperator& P, const SparseMatrix& K, const Vector& b) {
    CoarseSolver s(P);
    return s.solve(K, b);
}

/// Euclidean least-squares coefficients y with R^T y closest to v.
inline Vector project(const ProjectionOperator& P, const Vector& v) {
    const SparseMatrix G = P.R * SparseMatrix(P.R.transpose());
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(G);
    if (ldlt.info() != Eigen::Success)
        fail("projection Gram matrix is singular");
    return ldlt.solve(P.R * v);
}

inline Vector reconstruct(const ProjectionOperator& P, const Vector& coarse) { return P.R.transpose() * coarse; }

// ============================================================================
// Offline archive (text, full precision)
//   mscontinua-offline 1
//   fingerprint <hex>
//   patches <n>
//   patch <i> <M_i> <n_eig> <eigenvalues...>
//   R <rows> <cols> <nnz>
//   o <patch> <k>            one per row
//   r <row> <col> <value>    one per nonzero
// ============================================================================

struct OfflineArchive {
    std::string fingerprint;
    std::vector<int> counts;
    std::vector<Vector> eigenvalues;
    ProjectionOperator projection;
};

inline void save_offline(const std::string& path, const OfflineArchive& ar) {
    std::ofstream os(path);
    if (!os)
        fail("cannot open offline archive '", path, "' for writing");
    os << "mscontinua-offline 1\nfingerprint " << ar.fingerprint << "\npatches " << ar.counts.size() << '\n';
    os << std::setprecision(17);
    for (std::size_t i = 0; i < ar.counts.size(); ++i) {
        const Vector& ev = i < ar.eigenvalues.size() ? ar.eigenvalues[i] : Vector();
        os << "patch " << i << ' ' << ar.counts[i] << ' ' << ev.size();
        for (Eigen::Index k = 0; k < ev.size(); ++k)
            os << ' ' << ev[k];
        os << '\n';
    }
    const auto& R = ar.projection.R;
    os << "R " << R.rows() << ' ' << R.cols() << ' ' << R.nonZeros() << '\n';
    for (const auto& [p, k] : ar.projection.owner)
        os << "o " << p << ' ' << k << '\n';
    for (int c = 0; c < R.outerSize(); ++c)
        for (SparseMatrix::InnerIterator it(R, c); it; ++it)
            os << "r " << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    if (!os)
        fail("failed writing offline archive '", path, "'");
}

inline OfflineArchive load_offline(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        fail("cannot open offline archive '", path, "'");
    OfflineArchive ar;
    std::string tag;
    int version = 0;
    if (!(is >> tag >> version) || tag != "mscontinua-offline" || version != 1)
        fail(path, ": not an offline archive");
    std::size_t patches = 0;
    if (!(is >> tag >> ar.fingerprint) || tag != "fingerprint" || !(is >> tag >> patches) || tag != "patches")
        fail(path, ": malformed archive header");
    ar.counts.resize(patches);
    ar.eigenvalues.resize(patches);
    for (std::size_t i = 0; i < patches; ++i) {
        std::size_t idx = 0;
        int neig = 0;
        if (!(is >> tag >> idx >> ar.counts[i] >> neig) || tag != "patch" || idx != i || neig < 0)
            fail(path, ": malformed patch record ", i);
        ar.eigenvalues[i].resize(neig);
        for (int k = 0; k < neig; ++k)
            is >> ar.eigenvalues[i][k];
    }
    Eigen::Index rows = 0, cols = 0, nnz = 0;
    if (!(is >> tag >> rows >> cols >> nnz) || tag != "R")
        fail(path, ": missing projection matrix");
    ar.projection.owner.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r)
        if (!(is >> tag >> ar.projection.owner[r].first >> ar.projection.owner[r].second) || tag != "o")
            fail(path, ": malformed row owner ", r);
    std::vector<Triplet> trip;
    trip.reserve(nnz);
    for (Eigen::Index k = 0; k < nnz; ++k) {
        Eigen::Index r = 0, c = 0;
        double v = 0;
        if (!(is >> tag >> r >> c >> v) || tag != "r" || r < 0 || r >= rows || c < 0 || c >= cols)
            fail(path, ": malformed projection entry ", k);
        trip.emplace_back(r, c, v);
    }
    ar.projection.R.resize(rows, cols);
    ar.projection.R.setFromTriplets(trip.begin(), trip.end());
    ar.projection.R.makeCompressed();
    return ar;
}

} // namespace mscontinua
