/// @file linear_solver.hpp
/// @brief Sparse SPD solves with a fixed relative-residual contract.
#pragma once

#include "mscontinua/common.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <vector>
#include <string>

namespace mscontinua {

inline constexpr double linear_residual_tolerance = 1e-10;

/// LDL^T factorization (fill-reducing AMD ordering) with iterative refinement.
/// Reuses the symbolic analysis while the sparsity pattern is unchanged, which
/// is the case across Picard iterations.
class SpdSolver {
public:
    /// With scale > 0 the residual is measured relative to max(||b||, scale):
    /// for an increment solve pass the norm of the full system's right side.
    Vector solve(const SparseMatrix& A, const Vector& b, std::string_view context = {}, double scale = 0.0) {
        if (A.rows() != A.cols() || A.rows() != b.size())
            fail(context, "linear solve: matrix is ", A.rows(), "x", A.cols(), ", right side has ", b.size(),
                 " entries");
        if (b.norm() == 0.0)
            return Vector::Zero(b.size());
        const double bnorm = std::max(b.norm(), scale);
        if (!same_pattern(A)) {
            ldlt_.analyzePattern(A);
            outer_.assign(A.outerIndexPtr(), A.outerIndexPtr() + A.outerSize() + 1);
            inner_.assign(A.innerIndexPtr(), A.innerIndexPtr() + A.nonZeros());
        }
        ldlt_.factorize(A);
        if (ldlt_.info() != Eigen::Success)
            fail(context, "linear solve: factorization failed (matrix is singular or not SPD)");
        const Vector& d = ldlt_.vectorD();
        for (Eigen::Index i = 0; i < d.size(); ++i)
            if (!(d[i] > 0.0) || !std::isfinite(d[i]))
                fail(context, "linear solve: matrix is not positive definite (pivot ", i, " = ", d[i], ")");
        Vector x = ldlt_.solve(b);
        double rel = (b - A * x).norm() / bnorm;
        for (int it = 0; it < 3 && rel > linear_residual_tolerance; ++it) {
            x += ldlt_.solve(Vector(b - A * x));
            rel = (b - A * x).norm() / bnorm;
        }
        if (!(rel <= linear_residual_tolerance))
            fail(context, "linear solve: relative residual ", rel, " exceeds ", linear_residual_tolerance);
        last_residual_ = rel;
        return x;
    }

    [[nodiscard]] double last_residual() const { return last_residual_; }

private:
    bool same_pattern(const SparseMatrix& A) const {
        return A.isCompressed() && static_cast<std::size_t>(A.outerSize() + 1) == outer_.size() &&
               static_cast<std::size_t>(A.nonZeros()) == inner_.size() &&
               std::equal(outer_.begin(), outer_.end(), A.outerIndexPtr()) &&
               std::equal(inner_.begin(), inner_.end(), A.innerIndexPtr());
    }

    Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
    std::vector<SparseMatrix::StorageIndex> outer_;
    std::vector<SparseMatrix::StorageIndex> inner_;
    double last_residual_ = 0.0;
};

/// One-shot solve; relative residual ||Ax - b|| / ||b|| <= 1e-10 or Error.
inline Vector solve_linear(const SparseMatrix& A, const Vector& b) {
    SpdSolver s;
    return s.solve(A, b);
}

} // namespace mscontinua
