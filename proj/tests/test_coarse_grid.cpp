/// @file test_coarse_grid.cpp
/// @brief Coarse grid local domains and the bilinear partition of unity.
#include "mscontinua/coarse_grid.hpp"
#include "mscontinua/config.hpp"
#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace mscontinua;

namespace {

bool inside(const Rectangle& r, Point p, double tol = 1e-12) {
    return p.x >= r.xmin - tol && p.x <= r.xmax + tol && p.y >= r.ymin - tol && p.y <= r.ymax + tol;
}

bool on_edge(const Rectangle& r, Point p, double tol = 1e-12) {
    return inside(r, p, tol) && (std::abs(p.x - r.xmin) <= tol || std::abs(p.x - r.xmax) <= tol ||
                                 std::abs(p.y - r.ymin) <= tol || std::abs(p.y - r.ymax) <= tol);
}

class CoarseGridTest : public ::testing::Test {
protected:
    FineMesh mesh = generate_structured_mesh(20, 20, Rectangle{0, 0, 1, 1}, fixture::coarse_network());
    CoarseGrid grid = build_coarse_grid(mesh, 10, 10);
};

} // namespace

TEST_F(CoarseGridTest, NodeCount) {
    EXPECT_EQ(grid.node_count(), 121);
    EXPECT_EQ(grid.cell_count(), 100);
    EXPECT_EQ(grid.patch_nodes.size(), 121u);
}

TEST_F(CoarseGridTest, CornerPatchIsOneCell) {
    const auto r = grid.patch_rect(0);
    EXPECT_DOUBLE_EQ(r.xmax, 0.1);
    EXPECT_DOUBLE_EQ(r.ymax, 0.1);
    // One coarse cell on a 20x20 criss-cross: 2x2 fine squares.
    EXPECT_EQ(grid.patch_triangles[0].size(), 16u);
    const auto& c = grid.patch_nodes[grid.node_index(5, 5)];
    EXPECT_EQ(grid.patch_triangles[grid.node_index(5, 5)].size(), 64u);
    EXPECT_EQ(c.size(), 41u);
}

TEST_F(CoarseGridTest, PatchNodesMatchBruteForce) {
    for (int i = 0; i < grid.node_count(); ++i) {
        const auto r = grid.patch_rect(i);
        std::vector<int> nodes, boundary;
        for (int v = 0; v < mesh.node_count(); ++v) {
            if (inside(r, mesh.nodes[v]))
                nodes.push_back(v);
            if (on_edge(r, mesh.nodes[v]))
                boundary.push_back(v);
        }
        EXPECT_EQ(grid.patch_nodes[i], nodes) << "patch " << i;
        EXPECT_EQ(grid.patch_boundary_nodes[i], boundary) << "patch " << i;
        for (int t : grid.patch_triangles[i])
            for (int v : mesh.triangles[t])
                EXPECT_TRUE(inside(r, mesh.nodes[v]));
    }
}

TEST_F(CoarseGridTest, EveryTriangleInOneCellAndFourPatchesAtMost) {
    std::vector<int> hits(mesh.triangle_count(), 0);
    for (const auto& tris : grid.patch_triangles)
        for (int t : tris)
            ++hits[t];
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        EXPECT_GE(grid.cell_of_triangle[t], 0);
        EXPECT_LT(grid.cell_of_triangle[t], grid.cell_count());
        // every cell has exactly four corner nodes, so each triangle is in four patches
        EXPECT_EQ(hits[t], 4) << "triangle " << t;
    }
}

TEST_F(CoarseGridTest, PartitionOfUnity) {
    const auto pou = evaluate_pou(grid, mesh);
    std::vector<double> sum(mesh.node_count(), 0.0);
    for (int i = 0; i < grid.node_count(); ++i) {
        ASSERT_EQ(pou.values[i].size(), grid.patch_nodes[i].size());
        for (std::size_t k = 0; k < grid.patch_nodes[i].size(); ++k) {
            EXPECT_GE(pou.values[i][k], 0.0);
            sum[grid.patch_nodes[i][k]] += pou.values[i][k];
        }
    }
    for (int v = 0; v < mesh.node_count(); ++v)
        EXPECT_NEAR(sum[v], 1.0, 1e-12) << "node " << v;
}

TEST_F(CoarseGridTest, HatValues) {
    const int i = grid.node_index(3, 4);
    EXPECT_DOUBLE_EQ(grid.hat(i, grid.coarse_nodes[i]), 1.0);
    EXPECT_NEAR(grid.hat(i, {0.35, 0.45}), 0.25, 1e-14);
    EXPECT_DOUBLE_EQ(grid.hat(i, {0.5, 0.4}), 0.0);
    EXPECT_DOUBLE_EQ(grid.hat(grid.node_index(2, 4), grid.coarse_nodes[i]), 0.0);
}

TEST(CoarseGrid, NonSquareDomain) {
    const auto mesh = generate_structured_mesh(12, 6, Rectangle{1, -1, 4, 0.5});
    const auto grid = build_coarse_grid(mesh, 4, 2);
    EXPECT_EQ(grid.node_count(), 15);
    EXPECT_DOUBLE_EQ(grid.hx, 0.75);
    EXPECT_DOUBLE_EQ(grid.hy, 0.75);
    const auto pou = evaluate_pou(grid, mesh);
    std::vector<double> sum(mesh.node_count(), 0.0);
    for (int i = 0; i < grid.node_count(); ++i)
        for (std::size_t k = 0; k < grid.patch_nodes[i].size(); ++k)
            sum[grid.patch_nodes[i][k]] += pou.values[i][k];
    for (double s : sum)
        EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(CoarseGrid, RejectsMisalignedFineMesh) {
    // 5 fine cells cannot be grouped into 2 coarse cells.
    const auto mesh = generate_structured_mesh(5, 4, Rectangle{0, 0, 1, 1});
    EXPECT_THROW(build_coarse_grid(mesh, 2, 2), Error);
}
