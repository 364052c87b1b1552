/// @file test_linear_solver.cpp
/// @brief Sparse SPD solver: small exact cases, random SPD, failure detection.
#include "mscontinua/linear_solver.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace mscontinua;

namespace {

SparseMatrix sparse(const DenseMatrix& d) { return d.sparseView(); }

} // namespace

TEST(SpdSolver, Identity) {
    const Vector b = oracle::random_vector(7, 1);
    const SparseMatrix I = sparse(DenseMatrix::Identity(7, 7));
    EXPECT_LT((solve_linear(I, b) - b).norm(), 1e-15);
}

TEST(SpdSolver, TwoByTwo) {
    DenseMatrix A(2, 2);
    A << 4, 1, 1, 3;
    Vector b(2);
    b << 1, 2;
    const Vector x = solve_linear(sparse(A), b);
    EXPECT_NEAR(x[0], 1.0 / 11.0, 1e-15);
    EXPECT_NEAR(x[1], 7.0 / 11.0, 1e-15);
}

TEST(SpdSolver, RandomSpdAgainstGaussianElimination) {
    const DenseMatrix A = oracle::random_spd(50, 3);
    const Vector b = oracle::random_vector(50, 4);
    SpdSolver s;
    const Vector x = s.solve(sparse(A), b);
    const Vector ref = oracle::dense_solve(A, b);
    EXPECT_LT((x - ref).norm() / ref.norm(), 1e-12);
    EXPECT_LE(s.last_residual(), linear_residual_tolerance);
}

TEST(SpdSolver, ReusesPatternAcrossValues) {
    DenseMatrix A = oracle::random_spd(20, 5);
    const Vector b = oracle::random_vector(20, 6);
    SpdSolver s;
    const Vector x1 = s.solve(sparse(A), b);
    A *= 2.0;
    const Vector x2 = s.solve(sparse(A), b);
    EXPECT_LT((x1 - 2.0 * x2).norm() / x1.norm(), 1e-12);
}

TEST(SpdSolver, ZeroRightSide) {
    const Vector x = solve_linear(sparse(oracle::random_spd(5, 7)), Vector::Zero(5));
    EXPECT_EQ(x, Vector::Zero(5));
}

TEST(SpdSolver, DetectsIndefinite) {
    DenseMatrix A(2, 2);
    A << 1, 2, 2, 1;
    try {
        solve_linear(sparse(A), Vector::Ones(2));
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("positive definite"), std::string::npos) << e.what();
    }
}

TEST(SpdSolver, DetectsSingular) {
    DenseMatrix A(2, 2);
    A << 1, 1, 1, 1;
    EXPECT_THROW(solve_linear(sparse(A), Vector::Ones(2)), Error);
}

TEST(SpdSolver, DimensionMismatch) { EXPECT_THROW(solve_linear(sparse(DenseMatrix::Identity(3, 3)), Vector::Ones(2)), Error); }
