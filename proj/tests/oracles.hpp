// Independent reference computations for the test suite. Nothing here calls
// the library's assembly kernels or its solvers: P1 shape functions come from
// inverting the vertex Vandermonde matrix, integrals from explicit quadrature
// rules, and eigenvalues from a cyclic Jacobi sweep.
#pragma once

#include "mscontinua/mscontinua.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using mscontinua::DenseMatrix;
using mscontinua::FineMesh;
using mscontinua::Point;
using mscontinua::Vector;

// P1 basis on one triangle: phi_k(x, y) = c[k][0] + c[k][1] x + c[k][2] y.
struct P1 {
    std::array<std::array<double, 3>, 3> c{};
    double area = 0.0;
    std::array<Point, 3> v{};

    [[nodiscard]] double phi(int k, Point p) const { return c[k][0] + c[k][1] * p.x + c[k][2] * p.y; }
};

inline P1 p1(const FineMesh& mesh, int t) {
    P1 e;
    for (int k = 0; k < 3; ++k)
        e.v[k] = mesh.nodes[mesh.triangles[t][k]];
    // Gauss-Jordan on [V | I], V rows (1, x_k, y_k); columns of V^{-1} are the coefficients.
    double a[3][6];
    for (int r = 0; r < 3; ++r) {
        a[r][0] = 1.0;
        a[r][1] = e.v[r].x;
        a[r][2] = e.v[r].y;
        for (int s = 0; s < 3; ++s)
            a[r][3 + s] = r == s ? 1.0 : 0.0;
    }
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col]))
                piv = r;
        for (int s = 0; s < 6; ++s)
            std::swap(a[col][s], a[piv][s]);
        const double d = a[col][col];
        for (int s = 0; s < 6; ++s)
            a[col][s] /= d;
        for (int r = 0; r < 3; ++r)
            if (r != col) {
                const double f = a[r][col];
                for (int s = 0; s < 6; ++s)
                    a[r][s] -= f * a[col][s];
            }
    }
    for (int k = 0; k < 3; ++k)
        for (int m = 0; m < 3; ++m)
            e.c[k][m] = a[m][3 + k];
    e.area = 0.5 * std::abs((e.v[1].x - e.v[0].x) * (e.v[2].y - e.v[0].y) -
                            (e.v[2].x - e.v[0].x) * (e.v[1].y - e.v[0].y));
    return e;
}

/// Edge-midpoint rule, exact for quadratics on a triangle.
inline std::array<Point, 3> midpoints(const P1& e) {
    return {Point{0.5 * (e.v[0].x + e.v[1].x), 0.5 * (e.v[0].y + e.v[1].y)},
            Point{0.5 * (e.v[1].x + e.v[2].x), 0.5 * (e.v[1].y + e.v[2].y)},
            Point{0.5 * (e.v[2].x + e.v[0].x), 0.5 * (e.v[2].y + e.v[0].y)}};
}

inline Point centroid(const P1& e) {
    return {(e.v[0].x + e.v[1].x + e.v[2].x) / 3.0, (e.v[0].y + e.v[1].y + e.v[2].y) / 3.0};
}

/// Value of the P1 interpolant of nodal values `p` at point q of triangle t.
inline double interpolate(const FineMesh& mesh, const P1& e, int t, const Vector& p, Point q) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k)
        s += p[mesh.triangles[t][k]] * e.phi(k, q);
    return s;
}

/// int coef * grad phi_i . grad phi_j over every triangle (dense N x N).
inline DenseMatrix stiffness(const FineMesh& mesh, const std::function<double(int)>& coef) {
    DenseMatrix A = DenseMatrix::Zero(mesh.node_count(), mesh.node_count());
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto e = p1(mesh, t);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                A(mesh.triangles[t][i], mesh.triangles[t][j]) +=
                    coef(t) * e.area * (e.c[i][1] * e.c[j][1] + e.c[i][2] * e.c[j][2]);
    }
    return A;
}

/// int w phi_i phi_j with the edge-midpoint rule.
inline DenseMatrix consistent_mass(const FineMesh& mesh, const std::function<double(int)>& w) {
    DenseMatrix M = DenseMatrix::Zero(mesh.node_count(), mesh.node_count());
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto e = p1(mesh, t);
        for (const auto& q : midpoints(e))
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    M(mesh.triangles[t][i], mesh.triangles[t][j]) += w(t) * e.area / 3.0 * e.phi(i, q) * e.phi(j, q);
    }
    return M;
}

/// Vertex (trapezoidal) rule for int w phi_i phi_j, which is diagonal.
inline Vector lumped_mass(const FineMesh& mesh, const std::function<double(int)>& w) {
    Vector d = Vector::Zero(mesh.node_count());
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto e = p1(mesh, t);
        for (int k = 0; k < 3; ++k)
            for (int i = 0; i < 3; ++i)
                d[mesh.triangles[t][i]] += w(t) * e.area / 3.0 * e.phi(i, e.v[k]) * e.phi(i, e.v[k]);
    }
    return d;
}

/// -int k d(phi_i)/dy: gravity load with z pointing up.
inline Vector gravity(const FineMesh& mesh, const std::function<double(int)>& k) {
    Vector f = Vector::Zero(mesh.node_count());
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto e = p1(mesh, t);
        for (int i = 0; i < 3; ++i)
            f[mesh.triangles[t][i]] -= k(t) * e.area * e.c[i][2];
    }
    return f;
}

/// 1D fracture stiffness int k dphi/ds dphi/ds with two-point Gauss.
inline DenseMatrix fracture_stiffness(const FineMesh& mesh, const std::function<double(int)>& k) {
    DenseMatrix A = DenseMatrix::Zero(mesh.node_count(), mesh.node_count());
    const double g = 1.0 / std::sqrt(3.0);
    for (int f = 0; f < mesh.fracture_edge_count(); ++f) {
        const auto [a, b] = mesh.fracture_edges[f];
        const double len = std::hypot(mesh.nodes[b].x - mesh.nodes[a].x, mesh.nodes[b].y - mesh.nodes[a].y);
        const int idx[2] = {a, b};
        const double dphi[2] = {-1.0 / len, 1.0 / len};
        for (double s : {-g, g}) {
            (void)s; // derivatives are constant along the edge
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    A(idx[i], idx[j]) += 0.5 * len * k(f) * dphi[i] * dphi[j];
        }
    }
    return A;
}

/// 1D lumped mass (trapezoid) on fracture edges.
inline Vector fracture_lumped_mass(const FineMesh& mesh, const std::function<double(int)>& w) {
    Vector d = Vector::Zero(mesh.node_count());
    for (int f = 0; f < mesh.fracture_edge_count(); ++f) {
        const auto [a, b] = mesh.fracture_edges[f];
        const double len = std::hypot(mesh.nodes[b].x - mesh.nodes[a].x, mesh.nodes[b].y - mesh.nodes[a].y);
        d[a] += 0.5 * len * w(f);
        d[b] += 0.5 * len * w(f);
    }
    return d;
}

/// -int k_f (dz/ds)(dphi_i/ds) along fracture edges.
inline Vector fracture_gravity(const FineMesh& mesh, const std::function<double(int)>& k) {
    Vector f = Vector::Zero(mesh.node_count());
    for (int e = 0; e < mesh.fracture_edge_count(); ++e) {
        const auto [a, b] = mesh.fracture_edges[e];
        const double len = std::hypot(mesh.nodes[b].x - mesh.nodes[a].x, mesh.nodes[b].y - mesh.nodes[a].y);
        const double dzds = (mesh.nodes[b].y - mesh.nodes[a].y) / len;
        f[a] -= k(e) * dzds * (-1.0 / len) * len;
        f[b] -= k(e) * dzds * (1.0 / len) * len;
    }
    return f;
}

// ----------------------------------------------------------------------------
// Dense linear algebra
// ----------------------------------------------------------------------------

/// Cyclic Jacobi eigenvalues of a symmetric matrix, ascending.
inline std::vector<double> jacobi_eigenvalues(DenseMatrix a) {
    const int n = static_cast<int>(a.rows());
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0, total = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                total += a(i, j) * a(i, j);
                if (i != j)
                    off += a(i, j) * a(i, j);
            }
        if (off <= 1e-30 * total)
            break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (a(p, q) == 0.0)
                    continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(n);
    for (int i = 0; i < n; ++i)
        ev[i] = a(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

/// Lower Cholesky factor by the textbook recurrence.
inline DenseMatrix cholesky(const DenseMatrix& s) {
    const int n = static_cast<int>(s.rows());
    DenseMatrix l = DenseMatrix::Zero(n, n);
    for (int j = 0; j < n; ++j) {
        double d = s(j, j);
        for (int k = 0; k < j; ++k)
            d -= l(j, k) * l(j, k);
        l(j, j) = std::sqrt(d);
        for (int i = j + 1; i < n; ++i) {
            double v = s(i, j);
            for (int k = 0; k < j; ++k)
                v -= l(i, k) * l(j, k);
            l(i, j) = v / l(j, j);
        }
    }
    return l;
}

/// Eigenvalues of A x = lambda S x via L^{-1} A L^{-T} and Jacobi.
inline std::vector<double> generalized_eigenvalues(const DenseMatrix& A, const DenseMatrix& S) {
    const DenseMatrix L = cholesky(S);
    const int n = static_cast<int>(A.rows());
    // forward substitution on columns: X = L^{-1} A, then C = X L^{-T} = (L^{-1} X^T)^T
    auto lsolve = [&](const DenseMatrix& B) {
        DenseMatrix X = B;
        for (int c = 0; c < B.cols(); ++c)
            for (int i = 0; i < n; ++i) {
                double v = X(i, c);
                for (int k = 0; k < i; ++k)
                    v -= L(i, k) * X(k, c);
                X(i, c) = v / L(i, i);
            }
        return X;
    };
    const DenseMatrix X = lsolve(A);
    DenseMatrix C = lsolve(X.transpose()).transpose();
    C = 0.5 * (C + C.transpose()).eval();
    return jacobi_eigenvalues(C);
}

/// Gaussian elimination with partial pivoting.
inline Vector dense_solve(DenseMatrix a, Vector b) {
    const int n = static_cast<int>(a.rows());
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col)))
                piv = r;
        a.row(col).swap(a.row(piv));
        std::swap(b[col], b[piv]);
        for (int r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            if (f == 0.0)
                continue;
            a.row(r) -= f * a.row(col);
            b[r] -= f * b[col];
        }
    }
    Vector x(n);
    for (int i = n - 1; i >= 0; --i) {
        double v = b[i];
        for (int k = i + 1; k < n; ++k)
            v -= a(i, k) * x[k];
        x[i] = v / a(i, i);
    }
    return x;
}

/// Damped Newton with a forward-difference Jacobian on the free unknowns;
/// `fixed` entries of x keep their initial values.
inline Vector newton(const std::function<Vector(const Vector&)>& residual, Vector x, const std::vector<int>& fixed,
                     double tol = 1e-12, int max_iter = 50) {
    std::vector<char> is_fixed(x.size(), 0);
    for (int d : fixed)
        is_fixed[d] = 1;
    std::vector<int> free;
    for (int i = 0; i < x.size(); ++i)
        if (!is_fixed[i])
            free.push_back(i);
    const int n = static_cast<int>(free.size());
    auto restrict = [&](const Vector& r) {
        Vector out(n);
        for (int i = 0; i < n; ++i)
            out[i] = r[free[i]];
        return out;
    };
    Vector r = restrict(residual(x));
    for (int it = 0; it < max_iter && r.norm() > tol; ++it) {
        DenseMatrix J(n, n);
        for (int j = 0; j < n; ++j) {
            const double h = 1e-7 * std::max(1.0, std::abs(x[free[j]]));
            Vector xp = x;
            xp[free[j]] += h;
            J.col(j) = (restrict(residual(xp)) - r) / h;
        }
        const Vector dx = dense_solve(J, -r);
        double step = 1.0;
        for (int ls = 0; ls < 30; ++ls, step *= 0.5) {
            Vector trial = x;
            for (int i = 0; i < n; ++i)
                trial[free[i]] += step * dx[i];
            const Vector rt = restrict(residual(trial));
            if (rt.norm() < r.norm() || ls == 29) {
                x = trial;
                r = rt;
                break;
            }
        }
    }
    return x;
}

inline DenseMatrix random_spd(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> nd;
    DenseMatrix B(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            B(i, j) = nd(rng);
    return B * B.transpose() + n * DenseMatrix::Identity(n, n);
}

inline Vector random_vector(int n, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector v(n);
    for (int i = 0; i < n; ++i)
        v[i] = u(rng);
    return v;
}

} // namespace oracle
