/// @file coarse_grid.hpp
/// @brief Structured coarse grid, local domains and bilinear partition of unity.
///
/// The local domain of coarse node i is the union of the (up to four) coarse
/// cells sharing that node, i.e. the support of its bilinear hat function.
/// Local domains at the domain boundary are truncated at the boundary.
#pragma once

#include "mscontinua/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mscontinua {

struct CoarseGrid {
    Rectangle domain;
    int nx = 0;
    int ny = 0;
    double hx = 0.0;
    double hy = 0.0;
    std::vector<Point> coarse_nodes; ///< (nx+1)(ny+1), index iy*(nx+1)+ix
    std::vector<int> cell_of_triangle;
    std::vector<std::vector<int>> patch_triangles;      ///< omega_i as fine triangles
    std::vector<std::vector<int>> patch_nodes;          ///< fine nodes in closure of omega_i, sorted
    std::vector<std::vector<int>> patch_boundary_nodes; ///< fine nodes on the boundary of omega_i, sorted

    [[nodiscard]] int node_count() const { return static_cast<int>(coarse_nodes.size()); }
    [[nodiscard]] int cell_count() const { return nx * ny; }
    [[nodiscard]] int node_index(int ix, int iy) const { return iy * (nx + 1) + ix; }

    /// Rectangle covered by omega_i.
    [[nodiscard]] Rectangle patch_rect(int i) const {
        const int ix = i % (nx + 1), iy = i / (nx + 1);
        return {domain.xmin + std::max(ix - 1, 0) * hx, domain.ymin + std::max(iy - 1, 0) * hy,
                ix == nx ? domain.xmax : domain.xmin + std::min(ix + 1, nx) * hx,
                iy == ny ? domain.ymax : domain.ymin + std::min(iy + 1, ny) * hy};
    }

    /// Bilinear hat of coarse node i evaluated at p.
    [[nodiscard]] double hat(int i, Point p) const {
        const Point c = coarse_nodes[i];
        const double wx = std::max(0.0, 1.0 - std::abs(p.x - c.x) / hx);
        const double wy = std::max(0.0, 1.0 - std::abs(p.y - c.y) / hy);
        return wx * wy;
    }
};

namespace detail {

// Cell index along one axis; ties on interfaces go to the lower cell.
inline int bin_axis(double v, double lo, double h, int n, double tol) {
    if (v < lo - tol || v > lo + n * h + tol)
        return -1;
    const double s = (v - lo) / h;
    int k = static_cast<int>(std::floor(s));
    if (k > 0 && std::abs(s - k) * h <= tol)
        --k;
    return std::clamp(k, 0, n - 1);
}

} // namespace detail

inline CoarseGrid build_coarse_grid(const FineMesh& mesh, int nx, int ny) {
    if (nx < 1 || ny < 1)
        fail("coarse grid needs at least one cell per direction, got ", nx, "x", ny);
    constexpr double tol = 1e-10;
    CoarseGrid g;
    g.domain = mesh.bounds();
    g.nx = nx;
    g.ny = ny;
    g.hx = g.domain.width() / nx;
    g.hy = g.domain.height() / ny;
    for (int iy = 0; iy <= ny; ++iy)
        for (int ix = 0; ix <= nx; ++ix)
            g.coarse_nodes.push_back({ix == nx ? g.domain.xmax : g.domain.xmin + ix * g.hx,
                                      iy == ny ? g.domain.ymax : g.domain.ymin + iy * g.hy});

    for (int v = 0; v < mesh.node_count(); ++v) {
        const Point p = mesh.nodes[v];
        if (detail::bin_axis(p.x, g.domain.xmin, g.hx, nx, tol) < 0 ||
            detail::bin_axis(p.y, g.domain.ymin, g.hy, ny, tol) < 0)
            fail("fine node ", v, " at (", p.x, ", ", p.y, ") lies outside every coarse cell");
    }

    g.cell_of_triangle.resize(mesh.triangle_count());
    std::vector<std::vector<int>> cell_triangles(nx * ny);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Point c{(mesh.nodes[tri[0]].x + mesh.nodes[tri[1]].x + mesh.nodes[tri[2]].x) / 3.0,
                      (mesh.nodes[tri[0]].y + mesh.nodes[tri[1]].y + mesh.nodes[tri[2]].y) / 3.0};
        const int cx = detail::bin_axis(c.x, g.domain.xmin, g.hx, nx, 0.0);
        const int cy = detail::bin_axis(c.y, g.domain.ymin, g.hy, ny, 0.0);
        const double x0 = g.domain.xmin + cx * g.hx, y0 = g.domain.ymin + cy * g.hy;
        for (int v : tri) {
            const Point p = mesh.nodes[v];
            if (p.x < x0 - tol || p.x > x0 + g.hx + tol || p.y < y0 - tol || p.y > y0 + g.hy + tol)
                fail("fine triangle ", t, " crosses the boundary of coarse cell (", cx, ", ", cy,
                     "); the fine mesh must nest in the coarse grid");
        }
        g.cell_of_triangle[t] = cy * nx + cx;
        cell_triangles[cy * nx + cx].push_back(t);
    }

    const int nc = g.node_count();
    g.patch_triangles.resize(nc);
    g.patch_nodes.resize(nc);
    g.patch_boundary_nodes.resize(nc);
    for (int iy = 0; iy <= ny; ++iy)
        for (int ix = 0; ix <= nx; ++ix) {
            const int i = g.node_index(ix, iy);
            auto& tris = g.patch_triangles[i];
            for (int cy = iy - 1; cy <= iy; ++cy)
                for (int cx = ix - 1; cx <= ix; ++cx)
                    if (cx >= 0 && cx < nx && cy >= 0 && cy < ny) {
                        const auto& ct = cell_triangles[cy * nx + cx];
                        tris.insert(tris.end(), ct.begin(), ct.end());
                    }
            std::sort(tris.begin(), tris.end());
            auto& nodes = g.patch_nodes[i];
            for (int t : tris)
                nodes.insert(nodes.end(), mesh.triangles[t].begin(), mesh.triangles[t].end());
            std::sort(nodes.begin(), nodes.end());
            nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
            const Rectangle r = g.patch_rect(i);
            for (int v : nodes) {
                const Point p = mesh.nodes[v];
                if (std::abs(p.x - r.xmin) <= tol || std::abs(p.x - r.xmax) <= tol || std::abs(p.y - r.ymin) <= tol ||
                    std::abs(p.y - r.ymax) <= tol)
                    g.patch_boundary_nodes[i].push_back(v);
            }
        }
    return g;
}

/// chi_i sampled at the fine nodes of omega_i, aligned with CoarseGrid::patch_nodes.
struct PartitionOfUnity {
    std::vector<std::vector<double>> values;
};

inline PartitionOfUnity evaluate_pou(const CoarseGrid& grid, const FineMesh& mesh) {
    PartitionOfUnity pou;
    pou.values.resize(grid.node_count());
    for (int i = 0; i < grid.node_count(); ++i) {
        auto& vals = pou.values[i];
        vals.reserve(grid.patch_nodes[i].size());
        for (int v : grid.patch_nodes[i])
            vals.push_back(grid.hat(i, mesh.nodes[v]));
    }
    return pou;
}

} // namespace mscontinua
