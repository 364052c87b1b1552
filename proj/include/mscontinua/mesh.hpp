/// @file mesh.hpp
/// @brief Conforming 2D triangulation with embedded fracture edges.
///
/// Fractures are lower-dimensional: each one is a chain of mesh edges, so the
/// fracture continuum shares its nodes with the background triangulation.
/// The built-in generator produces criss-cross meshes (every grid rectangle is
/// split into four triangles about its center), which contain axis-aligned
/// and cell-diagonal edges. Fractures along other directions need an
/// externally generated mesh read through load_mesh().
#pragma once

#include "mscontinua/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace mscontinua {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

struct Rectangle {
    double xmin = 0.0;
    double ymin = 0.0;
    double xmax = 1.0;
    double ymax = 1.0;

    [[nodiscard]] double width() const { return xmax - xmin; }
    [[nodiscard]] double height() const { return ymax - ymin; }
    friend bool operator==(const Rectangle&, const Rectangle&) = default;
};

using Polyline = std::vector<Point>;

enum class BoundaryTag : int { interior = 0, dirichlet_top = 1, neumann = 2 };

using TriangleNodes = std::array<int, 3>;
using EdgeNodes = std::array<int, 2>;

struct FineMesh {
    std::vector<Point> nodes;
    std::vector<TriangleNodes> triangles;
    std::vector<EdgeNodes> fracture_edges;
    std::vector<BoundaryTag> tags; ///< one per node

    [[nodiscard]] int node_count() const { return static_cast<int>(nodes.size()); }
    [[nodiscard]] int triangle_count() const { return static_cast<int>(triangles.size()); }
    [[nodiscard]] int fracture_edge_count() const { return static_cast<int>(fracture_edges.size()); }

    [[nodiscard]] Rectangle bounds() const {
        Rectangle r{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
                    std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
        for (const auto& p : nodes) {
            r.xmin = std::min(r.xmin, p.x);
            r.ymin = std::min(r.ymin, p.y);
            r.xmax = std::max(r.xmax, p.x);
            r.ymax = std::max(r.ymax, p.y);
        }
        return r;
    }

    [[nodiscard]] double signed_area(int t) const {
        const auto& [a, b, c] = triangles[t];
        const Point &pa = nodes[a], &pb = nodes[b], &pc = nodes[c];
        return 0.5 * ((pb.x - pa.x) * (pc.y - pa.y) - (pc.x - pa.x) * (pb.y - pa.y));
    }

    [[nodiscard]] double edge_length(int e) const {
        const Point &a = nodes[fracture_edges[e][0]], &b = nodes[fracture_edges[e][1]];
        return std::hypot(b.x - a.x, b.y - a.y);
    }

    [[nodiscard]] std::vector<int> dirichlet_nodes() const {
        std::vector<int> out;
        for (int i = 0; i < node_count(); ++i)
            if (tags[i] == BoundaryTag::dirichlet_top)
                out.push_back(i);
        return out;
    }

    friend bool operator==(const FineMesh&, const FineMesh&) = default;
};

inline EdgeNodes sorted_edge(int a, int b) { return a < b ? EdgeNodes{a, b} : EdgeNodes{b, a}; }

/// Undirected edge -> incident triangles.
inline std::map<EdgeNodes, std::vector<int>> edge_triangle_map(const FineMesh& mesh) {
    std::map<EdgeNodes, std::vector<int>> edges;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        for (int k = 0; k < 3; ++k)
            edges[sorted_edge(tri[k], tri[(k + 1) % 3])].push_back(t);
    }
    return edges;
}

/// Throws on any broken invariant except unreferenced nodes, which only warn.
/// `line_of_triangle` / `line_of_fracture` map items to source lines for messages.
inline void validate_mesh(const FineMesh& mesh, const std::vector<int>& line_of_triangle = {},
                          const std::vector<int>& line_of_fracture = {}) {
    auto where = [](const std::vector<int>& lines, int i) {
        return i < static_cast<int>(lines.size()) ? concat(" (line ", lines[i], ")") : std::string{};
    };
    if (mesh.triangles.empty())
        fail("mesh has no elements");
    if (mesh.tags.size() != mesh.nodes.size())
        fail("mesh has ", mesh.nodes.size(), " nodes but ", mesh.tags.size(), " boundary tags");
    const int n = mesh.node_count();
    std::vector<char> referenced(n, 0);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        for (int v : mesh.triangles[t]) {
            if (v < 0 || v >= n)
                fail("triangle ", t, where(line_of_triangle, t), " references node ", v, " out of range [0, ", n, ")");
            referenced[v] = 1;
        }
        const double area = mesh.signed_area(t);
        if (!(area > 0.0))
            fail("triangle ", t, where(line_of_triangle, t), " is degenerate or negatively oriented (signed area ",
                 area, ")");
    }
    const auto edges = edge_triangle_map(mesh);
    for (int e = 0; e < mesh.fracture_edge_count(); ++e) {
        const auto [a, b] = mesh.fracture_edges[e];
        if (a < 0 || a >= n || b < 0 || b >= n)
            fail("fracture edge ", e, where(line_of_fracture, e), " references a node out of range");
        if (!edges.contains(sorted_edge(a, b)))
            fail("fracture edge ", e, where(line_of_fracture, e), " (", a, ", ", b,
                 ") is not an edge of any triangle");
    }
    const auto unused = std::count(referenced.begin(), referenced.end(), 0);
    if (unused > 0)
        warn("mesh has ", unused, " node(s) not referenced by any triangle");
}

// ============================================================================
// Structured criss-cross generator
// ============================================================================

namespace detail {

class MeshBuilder {
public:
    MeshBuilder(FineMesh& mesh, Rectangle domain)
        : mesh_(mesh), domain_(domain), tol_(1e-10 * std::max(domain.width(), domain.height())) {
        node_tris_.resize(mesh_.nodes.size());
        for (int t = 0; t < mesh_.triangle_count(); ++t)
            for (int v : mesh_.triangles[t])
                node_tris_[v].push_back(t);
    }

    void insert_segment(Point from, Point to) {
        int cur = locate(from);
        const int target = locate(to);
        int guard = 0;
        while (cur != target) {
            if (++guard > 4 * mesh_.node_count())
                fail("fracture walk did not terminate between (", from.x, ", ", from.y, ") and (", to.x, ", ",
                     to.y, ")");
            const Point pc = mesh_.nodes[cur];
            const double dx = to.x - pc.x, dy = to.y - pc.y;
            const double remaining = std::hypot(dx, dy);
            int next = -1;
            for (int t : node_tris_[cur]) {
                for (int v : mesh_.triangles[t]) {
                    if (v == cur)
                        continue;
                    const double ex = mesh_.nodes[v].x - pc.x, ey = mesh_.nodes[v].y - pc.y;
                    const double len = std::hypot(ex, ey);
                    if (std::abs(ex * dy - ey * dx) > tol_ * (len + remaining) || ex * dx + ey * dy <= 0.0)
                        continue;
                    next = v;
                    break;
                }
                if (next >= 0)
                    break;
            }
            if (next < 0)
                fail("fracture segment (", from.x, ", ", from.y, ") -> (", to.x, ", ", to.y,
                     ") is not aligned with mesh edges; generate a conforming mesh externally and use load_mesh");
            mark_fracture(cur, next);
            cur = next;
        }
    }

private:
    // Node at p; splits the containing edge when p lies strictly inside one.
    int locate(Point p) {
        for (int i = 0; i < mesh_.node_count(); ++i)
            if (std::hypot(mesh_.nodes[i].x - p.x, mesh_.nodes[i].y - p.y) <= tol_)
                return i;
        for (int t = 0; t < mesh_.triangle_count(); ++t) {
            const auto tri = mesh_.triangles[t];
            for (int k = 0; k < 3; ++k) {
                const int a = tri[k], b = tri[(k + 1) % 3];
                if (on_open_segment(mesh_.nodes[a], mesh_.nodes[b], p))
                    return split_edge(a, b, p);
            }
        }
        fail("fracture vertex (", p.x, ", ", p.y,
             ") lies inside a triangle, not on a mesh edge; the criss-cross generator only supports fractures "
             "along grid lines and cell diagonals");
    }

    bool on_open_segment(Point a, Point b, Point p) const {
        const double ex = b.x - a.x, ey = b.y - a.y;
        const double len = std::hypot(ex, ey);
        const double cross = ex * (p.y - a.y) - ey * (p.x - a.x);
        if (std::abs(cross) > tol_ * len)
            return false;
        const double s = (ex * (p.x - a.x) + ey * (p.y - a.y)) / (len * len);
        return s * len > tol_ && (1.0 - s) * len > tol_;
    }

    int split_edge(int a, int b, Point p) {
        const int m = mesh_.node_count();
        mesh_.nodes.push_back(p);
        mesh_.tags.push_back(tag_for(p));
        node_tris_.emplace_back();
        const std::vector<int> around = node_tris_[a];
        for (int t : around) {
            auto& tri = mesh_.triangles[t];
            int k = 0;
            for (; k < 3; ++k) {
                const int u = tri[k], v = tri[(k + 1) % 3];
                if ((u == a && v == b) || (u == b && v == a))
                    break;
            }
            if (k == 3)
                continue;
            const int u = tri[k], v = tri[(k + 1) % 3], w = tri[(k + 2) % 3];
            tri = {u, m, w};
            const int added = mesh_.triangle_count();
            mesh_.triangles.push_back({m, v, w});
            auto& vt = node_tris_[v];
            vt.erase(std::remove(vt.begin(), vt.end(), t), vt.end());
            vt.push_back(added);
            node_tris_[w].push_back(added);
            node_tris_[m].push_back(t);
            node_tris_[m].push_back(added);
        }
        const auto key = sorted_edge(a, b);
        for (std::size_t e = 0; e < mesh_.fracture_edges.size(); ++e) {
            if (sorted_edge(mesh_.fracture_edges[e][0], mesh_.fracture_edges[e][1]) == key) {
                mesh_.fracture_edges[e] = {a, m};
                mesh_.fracture_edges.push_back({m, b});
                break;
            }
        }
        return m;
    }

    BoundaryTag tag_for(Point p) const {
        if (std::abs(p.y - domain_.ymax) <= tol_)
            return BoundaryTag::dirichlet_top;
        if (std::abs(p.x - domain_.xmin) <= tol_ || std::abs(p.x - domain_.xmax) <= tol_ ||
            std::abs(p.y - domain_.ymin) <= tol_)
            return BoundaryTag::neumann;
        return BoundaryTag::interior;
    }

    void mark_fracture(int a, int b) {
        const auto key = sorted_edge(a, b);
        for (const auto& e : mesh_.fracture_edges)
            if (sorted_edge(e[0], e[1]) == key)
                return;
        mesh_.fracture_edges.push_back({a, b});
    }

    FineMesh& mesh_;
    Rectangle domain_;
    double tol_;
    std::vector<std::vector<int>> node_tris_;
};

inline double cross(Point o, Point a, Point b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

// Rejects segments meeting at a point interior to both (an unresolved crossing).
inline void check_crossings(const std::vector<Polyline>& fractures, double tol) {
    struct Seg {
        Point a, b;
        int poly;
    };
    std::vector<Seg> segs;
    for (int f = 0; f < static_cast<int>(fractures.size()); ++f)
        for (std::size_t k = 0; k + 1 < fractures[f].size(); ++k)
            segs.push_back({fractures[f][k], fractures[f][k + 1], f});
    for (std::size_t i = 0; i < segs.size(); ++i) {
        for (std::size_t j = i + 1; j < segs.size(); ++j) {
            const auto &s = segs[i], &r = segs[j];
            const double d1 = cross(s.a, s.b, r.a), d2 = cross(s.a, s.b, r.b);
            const double d3 = cross(r.a, r.b, s.a), d4 = cross(r.a, r.b, s.b);
            const double ls = std::hypot(s.b.x - s.a.x, s.b.y - s.a.y);
            const double lr = std::hypot(r.b.x - r.a.x, r.b.y - r.a.y);
            const double eps = tol * ls * lr;
            if (((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) &&
                ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))) {
                const double t = d3 / (d3 - d4);
                fail("fracture segments of polylines ", s.poly, " and ", r.poly, " cross at (",
                     s.a.x + t * (s.b.x - s.a.x), ", ", s.a.y + t * (s.b.y - s.a.y),
                     ") which is not a polyline vertex; add the intersection as a vertex of both");
            }
        }
    }
}

} // namespace detail

/// Criss-cross triangulation of `domain` with nx_fine x ny_fine rectangles,
/// refined along the given fracture polylines. Top side (y = ymax) is tagged
/// Dirichlet, the rest of the boundary Neumann.
inline FineMesh generate_structured_mesh(int nx_fine, int ny_fine, Rectangle domain,
                                         const std::vector<Polyline>& fractures = {}) {
    if (nx_fine < 2 || ny_fine < 2)
        fail("structured mesh needs at least 2x2 cells, got ", nx_fine, "x", ny_fine);
    if (!(domain.width() > 0.0 && domain.height() > 0.0))
        fail("domain rectangle is empty");
    const double tol = 1e-10 * std::max(domain.width(), domain.height());
    for (int f = 0; f < static_cast<int>(fractures.size()); ++f) {
        if (fractures[f].size() < 2)
            fail("fracture polyline ", f, " needs at least two vertices");
        for (const auto& p : fractures[f])
            if (p.x < domain.xmin - tol || p.x > domain.xmax + tol || p.y < domain.ymin - tol ||
                p.y > domain.ymax + tol)
                fail("fracture polyline ", f, " exits the domain at vertex (", p.x, ", ", p.y, ")");
    }
    detail::check_crossings(fractures, 1e-12);

    FineMesh mesh;
    const double hx = domain.width() / nx_fine, hy = domain.height() / ny_fine;
    const int nv = (nx_fine + 1) * (ny_fine + 1);
    mesh.nodes.reserve(nv + nx_fine * ny_fine);
    for (int j = 0; j <= ny_fine; ++j)
        for (int i = 0; i <= nx_fine; ++i) {
            const double x = i == nx_fine ? domain.xmax : domain.xmin + i * hx;
            const double y = j == ny_fine ? domain.ymax : domain.ymin + j * hy;
            mesh.nodes.push_back({x, y});
            BoundaryTag tag = BoundaryTag::interior;
            if (j == ny_fine)
                tag = BoundaryTag::dirichlet_top;
            else if (i == 0 || i == nx_fine || j == 0)
                tag = BoundaryTag::neumann;
            mesh.tags.push_back(tag);
        }
    for (int j = 0; j < ny_fine; ++j)
        for (int i = 0; i < nx_fine; ++i) {
            mesh.nodes.push_back({domain.xmin + (i + 0.5) * hx, domain.ymin + (j + 0.5) * hy});
            mesh.tags.push_back(BoundaryTag::interior);
        }
    auto vertex = [&](int i, int j) { return j * (nx_fine + 1) + i; };
    mesh.triangles.reserve(4 * nx_fine * ny_fine);
    for (int j = 0; j < ny_fine; ++j)
        for (int i = 0; i < nx_fine; ++i) {
            const int c = nv + j * nx_fine + i;
            const int v00 = vertex(i, j), v10 = vertex(i + 1, j), v11 = vertex(i + 1, j + 1),
                      v01 = vertex(i, j + 1);
            mesh.triangles.push_back({v00, v10, c});
            mesh.triangles.push_back({v10, v11, c});
            mesh.triangles.push_back({v11, v01, c});
            mesh.triangles.push_back({v01, v00, c});
        }

    detail::MeshBuilder builder(mesh, domain);
    for (const auto& poly : fractures)
        for (std::size_t k = 0; k + 1 < poly.size(); ++k)
            builder.insert_segment(poly[k], poly[k + 1]);
    return mesh;
}

inline double polyline_length(const std::vector<Polyline>& fractures) {
    double total = 0.0;
    for (const auto& poly : fractures)
        for (std::size_t k = 0; k + 1 < poly.size(); ++k)
            total += std::hypot(poly[k + 1].x - poly[k].x, poly[k + 1].y - poly[k].y);
    return total;
}

// ============================================================================
// Text format
//   mesh2d <n_nodes> <n_tris> <n_frac_edges>
//   v <x> <y> <tag>     tag: 0 interior, 1 dirichlet_top, 2 neumann
//   t <i> <j> <k>       0-based node indices
//   f <i> <j>
// '#' starts a comment.
// ============================================================================

inline void write_mesh(std::ostream& os, const FineMesh& mesh) {
    os << "mesh2d " << mesh.node_count() << ' ' << mesh.triangle_count() << ' ' << mesh.fracture_edge_count()
       << '\n';
    os << std::setprecision(17);
    for (int i = 0; i < mesh.node_count(); ++i)
        os << "v " << mesh.nodes[i].x << ' ' << mesh.nodes[i].y << ' ' << static_cast<int>(mesh.tags[i]) << '\n';
    for (const auto& [a, b, c] : mesh.triangles)
        os << "t " << a << ' ' << b << ' ' << c << '\n';
    for (const auto& [a, b] : mesh.fracture_edges)
        os << "f " << a << ' ' << b << '\n';
}

inline void save_mesh(const std::string& path, const FineMesh& mesh) {
    std::ofstream os(path);
    if (!os)
        fail("cannot open mesh file '", path, "' for writing");
    write_mesh(os, mesh);
    if (!os)
        fail("failed writing mesh file '", path, "'");
}

inline FineMesh read_mesh(std::istream& is, const std::string& name = "<stream>") {
    FineMesh mesh;
    std::vector<int> tri_lines, frac_lines;
    std::string line;
    int lineno = 0;
    bool header = false;
    long n_nodes = 0, n_tris = 0, n_frac = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key))
            continue;
        auto bad = [&](const char* what) { fail(name, ":", lineno, ": malformed ", what, " line: '", line, "'"); };
        if (!header) {
            if (key != "mesh2d" || !(ls >> n_nodes >> n_tris >> n_frac) || n_nodes < 0 || n_tris < 0 || n_frac < 0)
                fail(name, ":", lineno, ": expected header 'mesh2d <n_nodes> <n_tris> <n_frac_edges>'");
            header = true;
            continue;
        }
        if (key == "v") {
            Point p;
            int tag = 0;
            if (!(ls >> p.x >> p.y >> tag) || tag < 0 || tag > 2)
                bad("node");
            mesh.nodes.push_back(p);
            mesh.tags.push_back(static_cast<BoundaryTag>(tag));
        } else if (key == "t") {
            TriangleNodes t{};
            if (!(ls >> t[0] >> t[1] >> t[2]))
                bad("triangle");
            mesh.triangles.push_back(t);
            tri_lines.push_back(lineno);
        } else if (key == "f") {
            EdgeNodes e{};
            if (!(ls >> e[0] >> e[1]))
                bad("fracture");
            mesh.fracture_edges.push_back(e);
            frac_lines.push_back(lineno);
        } else {
            fail(name, ":", lineno, ": unknown record '", key, "'");
        }
    }
    if (!header)
        fail(name, ": missing 'mesh2d' header");
    if (mesh.node_count() != n_nodes || mesh.triangle_count() != n_tris || mesh.fracture_edge_count() != n_frac)
        fail(name, ": header declares ", n_nodes, "/", n_tris, "/", n_frac, " nodes/triangles/fractures but file has ",
             mesh.node_count(), "/", mesh.triangle_count(), "/", mesh.fracture_edge_count());
    try {
        validate_mesh(mesh, tri_lines, frac_lines);
    } catch (const Error& e) {
        fail(name, ": ", e.what());
    }
    return mesh;
}

inline FineMesh load_mesh(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        fail("cannot open mesh file '", path, "'");
    return read_mesh(is, path);
}

} // namespace mscontinua
