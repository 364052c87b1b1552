/// @file solver.hpp
/// @brief Backward Euler + Picard time stepping on the fine or multiscale path,
/// and relative error metrics between two solutions.
#pragma once

#include "mscontinua/fem.hpp"
#include "mscontinua/linear_solver.hpp"
#include "mscontinua/msfem.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

namespace mscontinua {

struct TimeSteppingPlan {
    double t_max = 66e-4;
    int n_steps = 200;
    double picard_tol = 1e-6;
    int picard_max = 20;
    bool strict = false; ///< abort instead of warning when Picard hits the cap

    [[nodiscard]] double tau() const { return t_max / n_steps; }

    void validate() const {
        if (n_steps < 0)
            fail("number of time steps must be nonnegative, got ", n_steps);
        if (n_steps > 0 && !(t_max > 0.0))
            fail("final time must be positive, got ", t_max);
        if (!(picard_tol > 0.0))
            fail("Picard tolerance must be positive, got ", picard_tol);
        if (picard_max < 1)
            fail("Picard iteration cap must be >= 1, got ", picard_max);
    }
};

// ============================================================================
// Picard system
// ============================================================================

/// Linearized system of one Picard iteration:
///   (C/tau + A) p^{m+1} = F + (C/tau) p^m - (W(p^m) - W(p^n))/tau
/// with all coefficients frozen at p^m and W the lumped water volume.
/// At convergence this is backward Euler for the mass-conservative form.
/// Dirichlet data are kept separate so each linear path can impose them in
/// the way that is stable for it.
struct PicardSystem {
    SparseMatrix matrix; ///< without Dirichlet penalty
    Vector rhs;          ///< without Dirichlet penalty
    Vector state;        ///< iterate p^m the system was built at
    Vector residual;     ///< rhs - matrix * state, kernel-exact, without penalty
    std::vector<Eigen::Index> dirichlet;
    double boundary_value = 0.0;
    double penalty = 0.0;

    /// Additive penalty form: A_ii += P, F_i += P g.
    [[nodiscard]] std::pair<SparseMatrix, Vector> penalized() const {
        SparseMatrix K = matrix;
        Vector b = rhs;
        for (auto d : dirichlet) {
            K.coeffRef(d, d) += penalty;
            b[d] += penalty * boundary_value;
        }
        K.makeCompressed();
        return {std::move(K), std::move(b)};
    }
};

inline PicardSystem picard_system(const MulticontinuaProblem& pb, const Vector& storage_n, const Vector& p_m,
                                  double tau) {
    const auto sys = assemble_system(pb, p_m);
    PicardSystem ps;
    const Vector c = sys.capacity / tau;
    ps.matrix = sys.stiffness;
    for (Eigen::Index i = 0; i < c.size(); ++i)
        if (c[i] != 0.0)
            ps.matrix.coeffRef(i, i) += c[i];
    ps.matrix.makeCompressed();
    const Vector change = (sys.storage - storage_n) / tau;
    ps.rhs = sys.rhs + c.cwiseProduct(p_m) - change;
    // the capacity terms cancel analytically
    ps.residual = sys.rhs - change - apply_kernel_exact(sys.stiffness, p_m);
    ps.state = p_m;
    const auto nodes = pb.mesh.dirichlet_nodes();
    for (int a = 0; a < sys.continua; ++a)
        for (int v : nodes)
            ps.dirichlet.push_back(sys.dof(a, v));
    ps.boundary_value = pb.boundary_value;
    const double maxdiag = sys.stiffness.size() > 0 ? sys.stiffness.diagonal().cwiseAbs().maxCoeff() : 0.0;
    ps.penalty = 1e10 * (maxdiag > 0.0 ? maxdiag : 1.0);
    return ps;
}

/// Lumped water volume per dof (fracture volume folded into continuum 0).
inline Vector storage_of(const MulticontinuaProblem& pb, const Vector& p) { return assemble_system(pb, p).storage; }

// ============================================================================
// Linear paths
// ============================================================================

/// Solves one Picard system, either directly or in a coarse space.
class LinearPath {
public:
    virtual ~LinearPath() = default;
    virtual Vector solve(const PicardSystem& ps) = 0;
    [[nodiscard]] virtual Eigen::Index dofs(Eigen::Index fine) const = 0;
};

/// Fine grid: penalized system, sparse LDL^T, solved for the increment so a
/// fixed point is reproduced exactly.
class FinePath final : public LinearPath {
public:
    Vector solve(const PicardSystem& ps) override {
        const auto [K, b] = ps.penalized();
        if (ps.state.size() != K.rows())
            return spd_.solve(K, b);
        Vector r = ps.residual;
        for (auto d : ps.dirichlet)
            r[d] += ps.penalty * (ps.boundary_value - ps.state[d]);
        return ps.state + spd_.solve(K, r, {}, b.norm());
    }
    [[nodiscard]] Eigen::Index dofs(Eigen::Index fine) const override { return fine; }

private:
    SpdSolver spd_;
};

/// Coarse space spanned by R^T; Dirichlet data in the penalty limit. Solves for
/// a coarse increment from the current iterate's coarse coefficients.
class MultiscalePath final : public LinearPath {
public:
    explicit MultiscalePath(const ProjectionOperator& P) : P_(&P), coarse_(P) {}

    Vector solve(const PicardSystem& ps) override {
        const CoarseConstraint none;
        if (ps.state.size() != P_->fine_dofs()) {
            auto s = coarse_.solve(ps.matrix, ps.rhs, {ps.dirichlet, ps.boundary_value});
            last_coarse_ = std::move(s.coarse);
            return std::move(s.fine);
        }
        // coefficients of the iterate: our own last answer, else a projection;
        // a state the coarse space reproduces to rounding is kept as is
        Vector base = ps.state, r = ps.residual;
        if (last_fine_.size() != ps.state.size() || last_fine_ != ps.state) {
            last_coarse_ = project(*P_, ps.state);
            const Vector fit = reconstruct(*P_, last_coarse_);
            if ((fit - ps.state).cwiseAbs().maxCoeff() > 1e-12 * ps.state.cwiseAbs().maxCoeff()) {
                base = fit;
                r -= ps.matrix * (base - ps.state);
            }
        }
        Vector data(ps.dirichlet.size());
        for (std::size_t k = 0; k < ps.dirichlet.size(); ++k)
            data[static_cast<Eigen::Index>(k)] = ps.boundary_value - base[ps.dirichlet[k]];
        const auto s = coarse_.solve(ps.matrix, r, ps.dirichlet, data, ps.rhs);
        last_coarse_ += s.coarse;
        last_fine_ = base + s.fine;
        return last_fine_;
    }
    [[nodiscard]] Eigen::Index dofs(Eigen::Index) const override { return P_->coarse_dofs(); }
    [[nodiscard]] const Vector& last_coarse() const { return last_coarse_; }

private:
    const ProjectionOperator* P_;
    CoarseSolver coarse_;
    Vector last_coarse_;
    Vector last_fine_;
};

inline Vector picard_step(const MulticontinuaProblem& pb, const Vector& storage_n, const Vector& p_m, double tau,
                          LinearPath& path) {
    return path.solve(picard_system(pb, storage_n, p_m, tau));
}

struct StepStats {
    int step = 0;
    int iterations = 0;
    double increment = 0.0; ///< final relative increment
    bool converged = true;
};

/// States at the requested step indices (index 0 = initial state).
struct Trajectory {
    std::vector<int> indices;
    std::vector<Vector> states;
    std::vector<StepStats> stats;
    Eigen::Index dofs = 0;

    [[nodiscard]] const Vector& at(int index) const {
        for (std::size_t k = 0; k < indices.size(); ++k)
            if (indices[k] == index)
                return states[k];
        fail("trajectory has no state at step ", index);
    }
    [[nodiscard]] int total_iterations() const {
        int s = 0;
        for (const auto& st : stats)
            s += st.iterations;
        return s;
    }
    [[nodiscard]] int unconverged_steps() const {
        return static_cast<int>(std::count_if(stats.begin(), stats.end(), [](const auto& s) { return !s.converged; }));
    }
};

/// Called after every completed step with (step index, state).
using StepObserver = std::function<void(int, const Vector&)>;

inline Trajectory advance(const MulticontinuaProblem& pb, const TimeSteppingPlan& plan, const Vector& initial,
                          LinearPath& path, std::vector<int> record, const StepObserver& observer = {}) {
    plan.validate();
    if (initial.size() != pb.dof_count())
        fail("initial state has ", initial.size(), " entries, expected ", pb.dof_count());
    std::sort(record.begin(), record.end());
    record.erase(std::unique(record.begin(), record.end()), record.end());
    for (int r : record)
        if (r < 0 || r > plan.n_steps)
            fail("requested snapshot index ", r, " is outside 0..", plan.n_steps);
    Trajectory traj;
    traj.dofs = path.dofs(pb.dof_count());
    auto keep = [&](int n, const Vector& p) {
        if (std::binary_search(record.begin(), record.end(), n)) {
            traj.indices.push_back(n);
            traj.states.push_back(p);
        }
    };
    Vector p = initial;
    keep(0, p);
    const double tau = plan.n_steps > 0 ? plan.tau() : 0.0;
    for (int n = 1; n <= plan.n_steps; ++n) {
        const Vector storage_n = storage_of(pb, p);
        Vector pm = p;
        StepStats st{n, 0, 0.0, false};
        while (st.iterations < plan.picard_max) {
            Vector next;
            try {
                next = picard_step(pb, storage_n, pm, tau, path);
            } catch (const Error& e) {
                fail("step ", n, ", Picard iteration ", st.iterations + 1, ": ", e.what());
            }
            ++st.iterations;
            const double denom = pm.norm();
            st.increment = (next - pm).norm() / (denom > 0.0 ? denom : 1.0);
            pm = std::move(next);
            if (st.increment < plan.picard_tol) {
                st.converged = true;
                break;
            }
        }
        if (!st.converged) {
            if (plan.strict)
                fail("step ", n, ": Picard iteration did not converge in ", plan.picard_max,
                     " iterations (relative increment ", st.increment, ")");
            warn("step ", n, ": Picard iteration stopped at the cap of ", plan.picard_max,
                 " iterations (relative increment ", st.increment, ")");
        }
        p = std::move(pm);
        traj.stats.push_back(st);
        keep(n, p);
        if (observer)
            observer(n, p);
    }
    return traj;
}

// ============================================================================
// Error metrics
// ============================================================================

/// Relative errors in percent at one time index.
struct ErrorSample {
    int index = 0;
    std::vector<double> l2;     ///< per continuum
    std::vector<double> energy; ///< per continuum
    double q = 0.0;             ///< coupled multicontinuum norm
};

struct ErrorReport {
    std::vector<ErrorSample> samples;
    Eigen::Index dof_fine = 0;
    Eigen::Index dof_coarse = 0;
};

namespace detail {

inline double relative_percent(double err2, double ref2) {
    const double e = std::sqrt(std::max(err2, 0.0)), r = std::sqrt(std::max(ref2, 0.0));
    if (r == 0.0)
        return e == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return 100.0 * e / r;
}

} // namespace detail

/// Norm operators at the reference state: consistent mass, per-continuum
/// nonlinear stiffness (background only), and the full coupled operator
/// (stiffness + exchange + eliminated fracture, no Dirichlet penalty).
struct NormOperators {
    SparseMatrix mass;
    std::vector<SparseMatrix> energy;
    SparseMatrix coupled;
};

inline NormOperators norm_operators(const MulticontinuaProblem& pb, const Vector& reference) {
    const FineMesh& mesh = pb.mesh;
    const int N = pb.node_count();
    NormOperators ops;
    ops.mass = assemble_consistent_mass(mesh, std::vector<double>(mesh.triangles.size(), 1.0));
    for (int a = 0; a < pb.continuum_count(); ++a) {
        const auto& spec = pb.continua[a];
        ops.energy.push_back(assemble_stiffness(mesh, spec.k_sat, reference.segment(static_cast<Eigen::Index>(a) * N, N),
                                                spec.retention));
    }
    ops.coupled = assemble_system(pb, reference).stiffness;
    return ops;
}

inline ErrorSample compare_states(const MulticontinuaProblem& pb, const Vector& reference, const Vector& approx,
                                  int index = 0) {
    if (reference.size() != pb.dof_count() || approx.size() != pb.dof_count())
        fail("error metrics: states have ", reference.size(), " and ", approx.size(), " entries, expected ",
             pb.dof_count());
    const int N = pb.node_count();
    const auto ops = norm_operators(pb, reference);
    const Vector diff = reference - approx;
    ErrorSample s;
    s.index = index;
    for (int a = 0; a < pb.continuum_count(); ++a) {
        const auto r = reference.segment(static_cast<Eigen::Index>(a) * N, N);
        const auto d = diff.segment(static_cast<Eigen::Index>(a) * N, N);
        s.l2.push_back(detail::relative_percent(d.dot(ops.mass * d), r.dot(ops.mass * r)));
        s.energy.push_back(detail::relative_percent(d.dot(ops.energy[a] * d), r.dot(ops.energy[a] * r)));
    }
    s.q = detail::relative_percent(diff.dot(ops.coupled * diff), reference.dot(ops.coupled * reference));
    return s;
}

inline ErrorReport compute_errors(const MulticontinuaProblem& pb, const Trajectory& fine, const Trajectory& ms) {
    if (fine.indices != ms.indices)
        fail("error metrics: trajectories are recorded at different time indices");
    ErrorReport rep;
    rep.dof_fine = fine.dofs;
    rep.dof_coarse = ms.dofs;
    for (std::size_t k = 0; k < fine.indices.size(); ++k)
        rep.samples.push_back(compare_states(pb, fine.states[k], ms.states[k], fine.indices[k]));
    return rep;
}

} // namespace mscontinua
