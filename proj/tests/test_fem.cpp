/// @file test_fem.cpp
/// @brief Assembly kernels against element-loop quadrature; fracture elimination
/// against the constrained three-field system.
#include "mscontinua/fem.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mscontinua;

namespace {

constexpr double third = 1.0 / 3.0;

// 3x3 criss-cross (36 triangles) with a horizontal and a diagonal fracture.
FineMesh small_mesh() {
    const std::vector<Polyline> f{{{0.0, third}, {third, third}, {2 * third, third}},
                                  {{third, 2 * third}, {0.5, 0.5}, {2 * third, third}}};
    return generate_structured_mesh(3, 3, Rectangle{0, 0, 1, 1}, f);
}

std::vector<double> random_values(std::size_t n, double lo, double hi, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v)
        x = u(rng);
    return v;
}

Vector random_heads(int n, unsigned seed) {
    const auto v = random_values(n, -80.0, -10.0, seed);
    return Eigen::Map<const Vector>(v.data(), n);
}

void expect_matrix_near(const SparseMatrix& got, const DenseMatrix& want, double rel, const char* what) {
    const DenseMatrix g(got);
    ASSERT_EQ(g.rows(), want.rows()) << what;
    const double scale = std::max(1.0, want.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = 0; j < g.cols(); ++j)
            ASSERT_NEAR(g(i, j), want(i, j), rel * scale) << what << " (" << i << ", " << j << ")";
}

void expect_vector_near(const Vector& got, const Vector& want, double rel, const char* what) {
    ASSERT_EQ(got.size(), want.size()) << what;
    const double scale = std::max(1.0, want.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < got.size(); ++i)
        ASSERT_NEAR(got[i], want[i], rel * scale) << what << " [" << i << "]";
}

// Coefficients sampled at the element centroid through the oracle's own P1 interpolation.
double centroid_head(const FineMesh& m, int t, const Vector& p) {
    const auto e = oracle::p1(m, t);
    return oracle::interpolate(m, e, t, p, oracle::centroid(e));
}

double midpoint_head(const FineMesh& m, int e, const Vector& p) {
    return 0.5 * (p[m.fracture_edges[e][0]] + p[m.fracture_edges[e][1]]);
}

struct TwoContinua {
    MulticontinuaProblem pb;
    std::vector<double> k1, k2, sigma, kf;
};

TwoContinua make_problem(const FineMesh& mesh, bool fracture) {
    TwoContinua s;
    s.pb.mesh = mesh;
    s.k1 = random_values(mesh.triangles.size(), 1.0, 10.0, 1);
    s.k2 = random_values(mesh.triangles.size(), 0.1, 1.0, 2);
    s.sigma = random_values(mesh.triangles.size(), 0.5, 2.0, 3);
    s.kf = random_values(mesh.fracture_edges.size(), 50.0, 100.0, 4);
    HaverkampParams h2;
    h2.theta_s = 0.35;
    s.pb.continua.push_back({HaverkampParams{}, {s.k1}, 0.0, {}});
    s.pb.continua.push_back({h2, {s.k2}, 0.0, {}});
    s.pb.exchange.background.push_back({0, 1, s.sigma});
    if (fracture)
        s.pb.fracture = FractureSpec{HaverkampParams{}, {s.kf}, 0.0};
    s.pb.validate();
    return s;
}

} // namespace

TEST(FemOracle, MeshIsSmall) {
    const auto m = small_mesh();
    EXPECT_LE(m.triangle_count(), 50);
    EXPECT_GE(m.fracture_edge_count(), 4);
}

TEST(FemOracle, Stiffness) {
    const auto m = small_mesh();
    const auto k = random_values(m.triangles.size(), 0.5, 20.0, 11);
    expect_matrix_near(assemble_stiffness(m, k), oracle::stiffness(m, [&](int t) { return k[t]; }), 1e-12,
                       "stiffness");
}

TEST(FemOracle, NonlinearStiffnessAtState) {
    const auto m = small_mesh();
    const auto ks = random_values(m.triangles.size(), 0.5, 20.0, 12);
    const Vector p = random_heads(m.node_count(), 13);
    const HaverkampParams h;
    const auto got = assemble_stiffness(m, ConductivityField{ks}, p, h);
    const auto want = oracle::stiffness(m, [&](int t) { return ks[t] * k_relative(h, centroid_head(m, t, p)); });
    expect_matrix_near(got, want, 1e-12, "nonlinear stiffness");
}

TEST(FemOracle, ConsistentMass) {
    const auto m = small_mesh();
    const auto w = random_values(m.triangles.size(), 0.5, 2.0, 14);
    expect_matrix_near(assemble_consistent_mass(m, w), oracle::consistent_mass(m, [&](int t) { return w[t]; }), 1e-12,
                       "consistent mass");
}

TEST(FemOracle, LumpedCapacityAndExchange) {
    const auto m = small_mesh();
    const Vector p = random_heads(m.node_count(), 15);
    const HaverkampParams h;
    const Vector want = oracle::lumped_mass(m, [&](int t) { return capacity(h, centroid_head(m, t, p)); });
    expect_matrix_near(assemble_capacity(m, p, h), DenseMatrix(want.asDiagonal()), 1e-12, "capacity");
    const auto sigma = random_values(m.triangles.size(), 0.0, 3.0, 16);
    const Vector q = oracle::lumped_mass(m, [&](int t) { return sigma[t]; });
    expect_matrix_near(assemble_exchange(m, sigma), DenseMatrix(q.asDiagonal()), 1e-12, "exchange");
}

TEST(FemOracle, Gravity) {
    const auto m = small_mesh();
    const auto ks = random_values(m.triangles.size(), 0.5, 20.0, 17);
    const Vector p = random_heads(m.node_count(), 18);
    const HaverkampParams h;
    const Vector got = assemble_gravity_rhs(m, ConductivityField{ks}, p, h);
    const Vector want = oracle::gravity(m, [&](int t) { return ks[t] * k_relative(h, centroid_head(m, t, p)); });
    expect_vector_near(got, want, 1e-12, "gravity");
    // Rows of a conforming stiffness annihilate constants, gravity loads sum to zero.
    EXPECT_NEAR(got.sum(), 0.0, 1e-12);
}

TEST(FemOracle, FractureKernels) {
    const auto m = small_mesh();
    const auto kf = random_values(m.fracture_edges.size(), 1.0, 1e3, 19);
    const Vector p = random_heads(m.node_count(), 20);
    const HaverkampParams h;
    auto keff = [&](int e) { return kf[e] * k_relative(h, midpoint_head(m, e, p)); };
    expect_matrix_near(assemble_fracture_stiffness(m, ConductivityField{kf}, p, h), oracle::fracture_stiffness(m, keff),
                       1e-12, "fracture stiffness");
    const Vector cap = oracle::fracture_lumped_mass(m, [&](int e) { return capacity(h, midpoint_head(m, e, p)); });
    expect_matrix_near(assemble_fracture_capacity(m, p, h), DenseMatrix(cap.asDiagonal()), 1e-12, "fracture capacity");
    Vector g = Vector::Zero(m.node_count());
    std::vector<double> kv(m.fracture_edges.size());
    for (int e = 0; e < m.fracture_edge_count(); ++e)
        kv[e] = keff(e);
    add_fracture_gravity(g, m, kv);
    expect_vector_near(g, oracle::fracture_gravity(m, keff), 1e-12, "fracture gravity");
}

TEST(FemOracle, CoupledSystemBlocks) {
    const auto m = small_mesh();
    auto s = make_problem(m, true);
    const int N = m.node_count();
    Vector p(2 * N);
    p << random_heads(N, 21), random_heads(N, 22);
    const auto sys = assemble_system(s.pb, p);
    const auto p1 = p.head(N), p2 = p.tail(N);
    const HaverkampParams h1;
    const HaverkampParams h2 = std::get<HaverkampParams>(s.pb.continua[1].retention);

    auto k1 = [&](int t) { return s.k1[t] * k_relative(h1, centroid_head(m, t, p1)); };
    auto k2 = [&](int t) { return s.k2[t] * k_relative(h2, centroid_head(m, t, p2)); };
    auto kf = [&](int e) { return s.kf[e] * k_relative(h1, midpoint_head(m, e, p1)); };
    const Vector q = oracle::lumped_mass(m, [&](int t) { return s.sigma[t]; });

    DenseMatrix A = DenseMatrix::Zero(2 * N, 2 * N);
    A.topLeftCorner(N, N) = oracle::stiffness(m, k1) + oracle::fracture_stiffness(m, kf);
    A.topLeftCorner(N, N) += DenseMatrix(q.asDiagonal());
    A.bottomRightCorner(N, N) = oracle::stiffness(m, k2) + DenseMatrix(q.asDiagonal());
    A.topRightCorner(N, N) = -DenseMatrix(q.asDiagonal());
    A.bottomLeftCorner(N, N) = -DenseMatrix(q.asDiagonal());
    expect_matrix_near(sys.stiffness, A, 1e-12, "coupled stiffness");

    Vector F(2 * N);
    F << oracle::gravity(m, k1) + oracle::fracture_gravity(m, kf), oracle::gravity(m, k2);
    expect_vector_near(sys.rhs, F, 1e-12, "coupled rhs");

    Vector C(2 * N);
    C << oracle::lumped_mass(m, [&](int t) { return capacity(h1, centroid_head(m, t, p1)); }) +
             oracle::fracture_lumped_mass(m, [&](int e) { return capacity(h1, midpoint_head(m, e, p1)); }),
        oracle::lumped_mass(m, [&](int t) { return capacity(h2, centroid_head(m, t, p2)); });
    expect_vector_near(sys.capacity, C, 1e-12, "coupled capacity");

    const Vector area = oracle::lumped_mass(m, [](int) { return 1.0; });
    const Vector len = oracle::fracture_lumped_mass(m, [](int) { return 1.0; });
    Vector W(2 * N);
    for (int v = 0; v < N; ++v) {
        W[v] = area[v] * theta(h1, p1[v]) + len[v] * theta(h1, p1[v]);
        W[N + v] = area[v] * theta(h2, p2[v]);
    }
    expect_vector_near(sys.storage, W, 1e-12, "storage");
}

TEST(FemOracle, SourceTerms) {
    const auto m = small_mesh();
    MulticontinuaProblem pb;
    pb.mesh = m;
    pb.gravity = false;
    const auto f = random_values(m.triangles.size(), -1.0, 1.0, 23);
    pb.continua.push_back({LinearRetention{}, constant_field(m.triangles.size(), 1.0), 0.5, f});
    pb.validate();
    const auto sys = assemble_system(pb, Vector::Zero(m.node_count()));
    const Vector want = oracle::lumped_mass(m, [&](int t) { return 0.5 + f[t]; });
    expect_vector_near(sys.rhs, want, 1e-12, "source");
}

TEST(FemOracle, DirichletPenaltyIsAdditive) {
    const auto m = small_mesh();
    auto s = make_problem(m, false);
    const Vector p = Vector::Constant(2 * m.node_count(), -30.0);
    const auto sys = assemble_system(s.pb, p);
    const auto pen = apply_dirichlet(sys, m, -20.7);
    const double P = 1e10 * sys.stiffness.diagonal().cwiseAbs().maxCoeff();
    EXPECT_DOUBLE_EQ(pen.penalty, P);
    for (int a = 0; a < 2; ++a)
        for (int v : m.dirichlet_nodes()) {
            const auto d = sys.dof(a, v);
            EXPECT_DOUBLE_EQ(pen.stiffness.coeff(d, d), sys.stiffness.coeff(d, d) + P);
            EXPECT_DOUBLE_EQ(pen.rhs[d], sys.rhs[d] + P * -20.7);
        }
}

TEST(FemOracle, KernelExactProduct) {
    const auto m = small_mesh();
    auto s = make_problem(m, true);
    const int n = 2 * m.node_count();
    const Vector p = Vector::LinSpaced(n, -60.0, -15.0);
    const auto sys = assemble_system(s.pb, p);
    const Vector x = Vector::LinSpaced(n, -1.0, 2.0).array().sin();
    const Vector ref = sys.stiffness * x;
    EXPECT_LT((apply_kernel_exact(sys.stiffness, x) - ref).cwiseAbs().maxCoeff(), 1e-12 * ref.cwiseAbs().maxCoeff());
    EXPECT_EQ(apply_kernel_exact(sys.stiffness, Vector::Constant(n, -20.7)), Vector::Zero(n));
}

// The eliminated system (fracture folded into continuum 1) against the full
// three-field system with p_f = p_1 enforced by Lagrange multipliers.
TEST(FractureElimination, MatchesConstrainedThreeFieldSolve) {
    const std::vector<Polyline> f{{{0.0, 0.5}, {0.5, 0.5}, {1.0, 0.5}}};
    const auto m = generate_structured_mesh(2, 2, Rectangle{0, 0, 1, 1}, f);
    const int N = m.node_count();
    ASSERT_EQ(m.fracture_edge_count(), 2);
    std::vector<int> fnodes;
    for (const auto& [a, b] : m.fracture_edges)
        for (int v : {a, b})
            if (std::find(fnodes.begin(), fnodes.end(), v) == fnodes.end())
                fnodes.push_back(v);
    const int nf = static_cast<int>(fnodes.size());
    ASSERT_LE(2 * N + nf, 30);

    auto s = make_problem(m, true);
    Vector p(2 * N);
    p << random_heads(N, 31), random_heads(N, 32);
    const double tau = 1e-3;
    const HaverkampParams h1;
    const HaverkampParams h2 = std::get<HaverkampParams>(s.pb.continua[1].retention);
    const auto p1 = p.head(N), p2 = p.tail(N);

    // Reduced operator from the library: (C/tau + A), rhs F + C p / tau.
    const auto sys = assemble_system(s.pb, p);
    DenseMatrix Kr = DenseMatrix(sys.stiffness);
    Kr.diagonal() += sys.capacity / tau;
    Vector br = sys.rhs + sys.capacity.cwiseProduct(p) / tau;

    // Oracle three-field blocks: [p1 (N), p2 (N), pf (nf)].
    auto k1 = [&](int t) { return s.k1[t] * k_relative(h1, centroid_head(m, t, p1)); };
    auto k2 = [&](int t) { return s.k2[t] * k_relative(h2, centroid_head(m, t, p2)); };
    auto kf = [&](int e) { return s.kf[e] * k_relative(h1, midpoint_head(m, e, p1)); };
    const Vector q = oracle::lumped_mass(m, [&](int t) { return s.sigma[t]; });
    const Vector c1 = oracle::lumped_mass(m, [&](int t) { return capacity(h1, centroid_head(m, t, p1)); });
    const Vector c2 = oracle::lumped_mass(m, [&](int t) { return capacity(h2, centroid_head(m, t, p2)); });
    const Vector cf = oracle::fracture_lumped_mass(m, [&](int e) { return capacity(h1, midpoint_head(m, e, p1)); });
    const DenseMatrix Af = oracle::fracture_stiffness(m, kf);
    const Vector Ff = oracle::fracture_gravity(m, kf);

    const int n3 = 2 * N + nf, nk = n3 + nf;
    DenseMatrix K = DenseMatrix::Zero(nk, nk);
    Vector b = Vector::Zero(nk);
    K.block(0, 0, N, N) = oracle::stiffness(m, k1) + DenseMatrix(q.asDiagonal());
    K.block(0, 0, N, N).diagonal() += c1 / tau;
    K.block(N, N, N, N) = oracle::stiffness(m, k2) + DenseMatrix(q.asDiagonal());
    K.block(N, N, N, N).diagonal() += c2 / tau;
    K.block(0, N, N, N) = -DenseMatrix(q.asDiagonal());
    K.block(N, 0, N, N) = -DenseMatrix(q.asDiagonal());
    b.head(N) = oracle::gravity(m, k1) + c1.cwiseProduct(p1) / tau;
    b.segment(N, N) = oracle::gravity(m, k2) + c2.cwiseProduct(p2) / tau;
    for (int i = 0; i < nf; ++i) {
        for (int j = 0; j < nf; ++j)
            K(2 * N + i, 2 * N + j) = Af(fnodes[i], fnodes[j]);
        K(2 * N + i, 2 * N + i) += cf[fnodes[i]] / tau;
        b[2 * N + i] = Ff[fnodes[i]] + cf[fnodes[i]] * p1[fnodes[i]] / tau;
        // constraint row: p1(v) - pf(v) = 0, multiplier column symmetric
        K(n3 + i, fnodes[i]) = 1.0;
        K(n3 + i, 2 * N + i) = -1.0;
        K(fnodes[i], n3 + i) = 1.0;
        K(2 * N + i, n3 + i) = -1.0;
    }

    // Strong Dirichlet data on both systems at the top nodes.
    const double g = -20.7;
    auto pin = [&](DenseMatrix& A, Vector& r, int d) {
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
            if (j != d) {
                r[j] -= A(j, d) * g;
                A(j, d) = 0.0;
            }
        }
        A.row(d).setZero();
        A(d, d) = 1.0;
        r[d] = g;
    };
    for (int a = 0; a < 2; ++a)
        for (int v : m.dirichlet_nodes()) {
            pin(Kr, br, a * N + v);
            pin(K, b, a * N + v);
        }

    const Vector xr = oracle::dense_solve(Kr, br);
    const Vector x3 = oracle::dense_solve(K, b);
    const double scale = x3.head(2 * N).cwiseAbs().maxCoeff();
    for (int i = 0; i < 2 * N; ++i)
        EXPECT_NEAR(xr[i], x3[i], 1e-10 * scale) << "dof " << i;
    for (int i = 0; i < nf; ++i)
        EXPECT_NEAR(x3[2 * N + i], x3[fnodes[i]], 1e-10 * scale);
}

TEST(FractureElimination, RejectsExchangeWithOtherContinua) {
    const std::vector<Polyline> f{{{0.0, 0.5}, {1.0, 0.5}}};
    const auto m = generate_structured_mesh(2, 2, Rectangle{0, 0, 1, 1}, f);
    auto s = make_problem(m, true);
    s.pb.exchange.fracture = {{}, std::vector<double>(m.fracture_edges.size(), 1.0)};
    const Vector p = Vector::Constant(2 * m.node_count(), -30.0);
    EXPECT_THROW(assemble_system(s.pb, p), Error);
}

TEST(ProblemValidation, SizeMismatches) {
    const auto m = small_mesh();
    MulticontinuaProblem pb;
    pb.mesh = m;
    pb.continua.push_back({HaverkampParams{}, constant_field(3, 1.0), 0.0, {}});
    EXPECT_THROW(pb.validate(), Error);
    pb.continua[0].k_sat = constant_field(m.triangles.size(), 1.0);
    EXPECT_NO_THROW(pb.validate());
    EXPECT_THROW(assemble_system(pb, Vector::Zero(3)), Error);
}
