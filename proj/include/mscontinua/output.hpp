/// @file output.hpp
/// @brief VTK legacy ASCII fields, CSV error tables and trajectory files.
///
/// Every number is printed with "%.17g" through snprintf, so equal inputs
/// produce byte-identical files.
#pragma once

#include "mscontinua/fem.hpp"
#include "mscontinua/solver.hpp"

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace mscontinua {

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        fail("cannot open '", path, "' for writing");
    return os;
}

} // namespace detail

/// Unstructured grid: triangles (VTK type 5) followed by fracture edges as
/// lines (type 3). One point array per continuum named p1, p2, ...; a cell
/// array `fracture` flags the line cells.
inline void write_vtk(std::ostream& os, const FineMesh& mesh, const Vector& state, int continua,
                      const std::string& title = "mscontinua") {
    const int N = mesh.node_count(), T = mesh.triangle_count(), F = mesh.fracture_edge_count();
    if (state.size() != static_cast<Eigen::Index>(continua) * N)
        fail("VTK export: state has ", state.size(), " entries, expected ", continua * N);
    os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << N << " double\n";
    for (const auto& p : mesh.nodes)
        os << detail::num(p.x) << ' ' << detail::num(p.y) << " 0\n";
    os << "CELLS " << T + F << ' ' << 4 * T + 3 * F << '\n';
    for (const auto& t : mesh.triangles)
        os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    for (const auto& e : mesh.fracture_edges)
        os << "2 " << e[0] << ' ' << e[1] << '\n';
    os << "CELL_TYPES " << T + F << '\n';
    for (int t = 0; t < T; ++t)
        os << "5\n";
    for (int e = 0; e < F; ++e)
        os << "3\n";
    os << "CELL_DATA " << T + F << "\nSCALARS fracture int 1\nLOOKUP_TABLE default\n";
    for (int t = 0; t < T; ++t)
        os << "0\n";
    for (int e = 0; e < F; ++e)
        os << "1\n";
    os << "POINT_DATA " << N << '\n';
    for (int a = 0; a < continua; ++a) {
        os << "SCALARS p" << a + 1 << " double 1\nLOOKUP_TABLE default\n";
        for (int v = 0; v < N; ++v)
            os << detail::num(state[static_cast<Eigen::Index>(a) * N + v]) << '\n';
    }
}

inline void save_vtk(const std::string& path, const FineMesh& mesh, const Vector& state, int continua) {
    auto os = detail::open_output(path);
    write_vtk(os, mesh, state, continua);
    if (!os)
        fail("failed writing '", path, "'");
}

/// One row of an error table: a basis configuration and its errors.
struct ErrorRow {
    std::string label;
    ErrorReport report;
};

/// Columns: basis, dof_c, dof_f, then for each recorded step n and continuum
/// a: L2_a@n, energy_a@n, followed by q@n. Values in percent.
inline void write_error_csv(std::ostream& os, const std::vector<ErrorRow>& rows) {
    if (rows.empty())
        return;
    const auto& first = rows.front().report;
    os << "basis,dof_c,dof_f";
    for (const auto& s : first.samples) {
        for (std::size_t a = 0; a < s.l2.size(); ++a)
            os << ",L2_" << a + 1 << '@' << s.index << ",energy_" << a + 1 << '@' << s.index;
        os << ",q@" << s.index;
    }
    os << '\n';
    for (const auto& row : rows) {
        if (row.report.samples.size() != first.samples.size())
            fail("error table rows have different time indices");
        os << row.label << ',' << row.report.dof_coarse << ',' << row.report.dof_fine;
        for (const auto& s : row.report.samples) {
            for (std::size_t a = 0; a < s.l2.size(); ++a)
                os << ',' << detail::num(s.l2[a]) << ',' << detail::num(s.energy[a]);
            os << ',' << detail::num(s.q);
        }
        os << '\n';
    }
}

inline void save_error_csv(const std::string& path, const std::vector<ErrorRow>& rows) {
    auto os = detail::open_output(path);
    write_error_csv(os, rows);
}

/// Text trajectory:
///   trajectory <continua> <nodes> <count>
///   step <n>        followed by continua*nodes values, one per line
inline void write_trajectory(std::ostream& os, const Trajectory& traj, int continua, int nodes) {
    os << "trajectory " << continua << ' ' << nodes << ' ' << traj.indices.size() << '\n';
    for (std::size_t k = 0; k < traj.indices.size(); ++k) {
        os << "step " << traj.indices[k] << '\n';
        for (Eigen::Index i = 0; i < traj.states[k].size(); ++i)
            os << detail::num(traj.states[k][i]) << '\n';
    }
}

inline void save_trajectory(const std::string& path, const Trajectory& traj, int continua, int nodes) {
    auto os = detail::open_output(path);
    write_trajectory(os, traj, continua, nodes);
}

inline Trajectory load_trajectory(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        fail("cannot open trajectory '", path, "'");
    std::string tag;
    int continua = 0, nodes = 0;
    std::size_t count = 0;
    if (!(is >> tag >> continua >> nodes >> count) || tag != "trajectory")
        fail(path, ": not a trajectory file");
    Trajectory traj;
    traj.dofs = static_cast<Eigen::Index>(continua) * nodes;
    for (std::size_t k = 0; k < count; ++k) {
        int n = 0;
        if (!(is >> tag >> n) || tag != "step")
            fail(path, ": malformed step record ", k);
        Vector v(traj.dofs);
        for (Eigen::Index i = 0; i < v.size(); ++i)
            if (!(is >> v[i]))
                fail(path, ": truncated state at step ", n);
        traj.indices.push_back(n);
        traj.states.push_back(std::move(v));
    }
    return traj;
}

/// Iteration statistics, one line per step.
inline void save_step_stats(const std::string& path, const Trajectory& traj) {
    auto os = detail::open_output(path);
    os << "step,iterations,increment,converged\n";
    for (const auto& s : traj.stats)
        os << s.step << ',' << s.iterations << ',' << detail::num(s.increment) << ',' << (s.converged ? 1 : 0)
           << '\n';
}

} // namespace mscontinua
