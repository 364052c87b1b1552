/// @file run.hpp
/// @brief Config-driven drivers: problem construction, offline stage with an
/// on-disk archive, and the fine / multiscale / compare run modes.
#pragma once

#include "mscontinua/config.hpp"
#include "mscontinua/msfem.hpp"
#include "mscontinua/output.hpp"
#include "mscontinua/solver.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace mscontinua {

namespace detail {

inline ConductivityField make_field(const FieldSpec& f, const std::vector<Point>& sites, const char* what,
                                    const ConductivityField* k1 = nullptr, const ConductivityField* k2 = nullptr) {
    if (f.kind == "constant")
        return constant_field(sites.size(), f.value);
    if (f.kind == "layers")
        return layered_field(sites, f.breaks, f.values);
    if (f.kind == "lognormal")
        return lognormal_field(sites, f.seed, f.contrast, f.center, f.correlation);
    if (f.kind == "file") {
        auto field = load_field(f.path);
        if (field.size() != sites.size())
            fail(what, ": field file '", f.path, "' has ", field.size(), " values, expected ", sites.size());
        return field;
    }
    if (f.kind == "proportional") {
        const ConductivityField* src = f.of == "k1" ? k1 : f.of == "k2" ? k2 : nullptr;
        if (!src)
            fail(what, ": proportional field must refer to k1 or k2, got '", f.of, "'");
        ConductivityField out = *src;
        for (double& v : out.values)
            v *= f.factor;
        return out;
    }
    fail(what, ": unknown field kind '", f.kind, "'");
}

inline std::vector<Point> edge_midpoints(const FineMesh& mesh) {
    std::vector<Point> m;
    for (const auto& [a, b] : mesh.fracture_edges)
        m.push_back({0.5 * (mesh.nodes[a].x + mesh.nodes[b].x), 0.5 * (mesh.nodes[a].y + mesh.nodes[b].y)});
    return m;
}

} // namespace detail

inline FineMesh build_mesh(const SimulationConfig& cfg) {
    if (!cfg.mesh_file.empty())
        return load_mesh(cfg.mesh_file);
    return generate_structured_mesh(cfg.nx_fine, cfg.ny_fine, cfg.domain,
                                    cfg.fracture ? cfg.fractures : std::vector<Polyline>{});
}

inline MulticontinuaProblem build_problem(const SimulationConfig& cfg) {
    cfg.validate();
    MulticontinuaProblem pb;
    pb.mesh = build_mesh(cfg);
    pb.boundary_value = cfg.boundary_value;
    pb.gravity = cfg.gravity;
    const auto centroids = triangle_centroids(pb.mesh);
    const auto k1 = detail::make_field(cfg.k1, centroids, "field.k1");
    pb.continua.push_back({cfg.retention[0], k1, cfg.source, {}});
    if (cfg.continua > 1) {
        const auto k2 = detail::make_field(cfg.k2, centroids, "field.k2", &k1);
        pb.continua.push_back({cfg.retention[1], k2, cfg.source, {}});
        const auto sigma = detail::make_field(cfg.sigma12, centroids, "field.sigma12", &k1, &k2);
        pb.exchange.background.push_back({0, 1, sigma.values});
    }
    if (cfg.fracture && pb.mesh.fracture_edge_count() > 0)
        pb.fracture = FractureSpec{cfg.fracture_retention,
                                   detail::make_field(cfg.kf, detail::edge_midpoints(pb.mesh), "field.kf"), 0.0};
    pb.validate();
    return pb;
}

// ============================================================================
// Offline stage
// ============================================================================

/// One basis configuration of a run ("M=4", "adaptive", "simplified").
struct BasisSelection {
    BasisPolicy::Kind kind = BasisPolicy::Kind::fixed;
    int count = 4;
    double threshold = 0.0;

    [[nodiscard]] std::string label() const {
        switch (kind) {
        case BasisPolicy::Kind::fixed: return "M=" + std::to_string(count);
        case BasisPolicy::Kind::adaptive: return "adaptive";
        case BasisPolicy::Kind::simplified: return "simplified";
        }
        return "?";
    }
    [[nodiscard]] std::string file_tag() const {
        return kind == BasisPolicy::Kind::fixed ? "M" + std::to_string(count) : label();
    }
};

inline std::vector<BasisSelection> selections(const BasisPolicy& policy) {
    std::vector<BasisSelection> out;
    if (policy.kind == BasisPolicy::Kind::fixed)
        for (int m : policy.counts)
            out.push_back({BasisPolicy::Kind::fixed, m, 0.0});
    else
        out.push_back({policy.kind, 0, policy.threshold});
    return out;
}

/// Patch operators and full local eigen-decompositions, shared by every
/// basis selection on the same configuration. Built on first use.
class OfflineStage {
public:
    OfflineStage(const MulticontinuaProblem& pb, int nx, int ny)
        : pb_(&pb), grid_(build_coarse_grid(pb.mesh, nx, ny)), pou_(evaluate_pou(grid_, pb.mesh)) {}

    [[nodiscard]] const CoarseGrid& grid() const { return grid_; }
    [[nodiscard]] const PartitionOfUnity& pou() const { return pou_; }

    const std::vector<PatchOperators>& patches() {
        if (ops_.empty())
            ops_ = assemble_all_patches(*pb_, grid_);
        return ops_;
    }

    const SpectralBasis& spectral() {
        if (!spectral_)
            spectral_ = compute_spectral_bases(patches());
        return *spectral_;
    }

    SpectralBasis basis(const BasisSelection& sel) {
        switch (sel.kind) {
        case BasisPolicy::Kind::fixed: return select_fixed(spectral(), sel.count);
        case BasisPolicy::Kind::adaptive: return select_adaptive(spectral(), sel.threshold);
        case BasisPolicy::Kind::simplified: return compute_simplified_bases(patches());
        }
        fail("unknown basis policy");
    }

    ProjectionOperator projection(const SpectralBasis& b) const {
        return assemble_projection(b, grid_, pou_, pb_->continuum_count(), pb_->node_count());
    }

    /// Projection for `sel`, reused from `archive` when its fingerprint matches.
    ProjectionOperator projection(const BasisSelection& sel, const std::string& archive, const std::string& fingerprint) {
        if (!archive.empty() && std::filesystem::exists(archive)) {
            auto ar = load_offline(archive);
            if (ar.fingerprint == fingerprint)
                return std::move(ar.projection);
        }
        const auto b = basis(sel);
        auto P = projection(b);
        if (!archive.empty()) {
            OfflineArchive ar;
            ar.fingerprint = fingerprint;
            ar.counts = b.counts();
            for (const auto& p : b.patches)
                ar.eigenvalues.push_back(p.eigenvalues);
            ar.projection = P;
            save_offline(archive, ar);
        }
        return P;
    }

private:
    const MulticontinuaProblem* pb_;
    CoarseGrid grid_;
    PartitionOfUnity pou_;
    std::vector<PatchOperators> ops_;
    std::optional<SpectralBasis> spectral_;
};

// ============================================================================
// Run modes
// ============================================================================

enum class RunMode { fine, multiscale, compare };

struct RunResult {
    std::optional<Trajectory> fine;
    std::vector<std::pair<BasisSelection, Trajectory>> multiscale;
    std::vector<ErrorRow> errors;
};

class Runner {
public:
    Runner(SimulationConfig cfg, std::ostream* log = &std::cout) : cfg_(std::move(cfg)), log_(log) {}

    RunResult run(RunMode mode) {
        const auto pb = build_problem(cfg_);
        std::filesystem::create_directories(cfg_.output_dir);
        {
            std::ofstream os(path_of("config.txt"), std::ios::binary);
            write_config(os, cfg_);
        }
        const Vector p0 = Vector::Constant(pb.dof_count(), cfg_.initial_value);
        note("fine mesh: ", pb.node_count(), " nodes, ", pb.mesh.triangle_count(), " triangles, ",
             pb.mesh.fracture_edge_count(), " fracture edges; DOF_f = ", pb.dof_count());
        RunResult res;
        if (mode != RunMode::multiscale) {
            FinePath path;
            res.fine = advance(pb, cfg_.time, p0, path, cfg_.snapshots);
            save_trajectory(path_of("trajectory_fine.txt"), *res.fine, pb.continuum_count(), pb.node_count());
            save_step_stats(path_of("steps_fine.csv"), *res.fine);
            write_fields(pb, *res.fine, "fine");
            note("fine: ", res.fine->total_iterations(), " Picard iterations over ", cfg_.time.n_steps, " steps");
        }
        if (mode != RunMode::fine) {
            OfflineStage offline(pb, cfg_.coarse_nx, cfg_.coarse_ny);
            for (const auto& sel : selections(cfg_.basis)) {
                const auto fp = model_fingerprint(cfg_, sel.label() + " " + detail::num(sel.threshold));
                const auto P = offline.projection(sel, path_of("offline_" + sel.file_tag() + ".txt"), fp);
                MultiscalePath path(P);
                auto traj = advance(pb, cfg_.time, p0, path, cfg_.snapshots);
                save_trajectory(path_of("trajectory_ms_" + sel.file_tag() + ".txt"), traj, pb.continuum_count(),
                                pb.node_count());
                save_step_stats(path_of("steps_ms_" + sel.file_tag() + ".csv"), traj);
                write_fields(pb, traj, "ms_" + sel.file_tag());
                note(sel.label(), ": DOF_c = ", P.coarse_dofs(), ", ", traj.total_iterations(), " Picard iterations");
                if (res.fine) {
                    res.errors.push_back({sel.label(), compute_errors(pb, *res.fine, traj)});
                    print_row(res.errors.back());
                }
                res.multiscale.emplace_back(sel, std::move(traj));
            }
            if (!res.errors.empty())
                save_error_csv(path_of("errors.csv"), res.errors);
        }
        return res;
    }

private:
    template <typename... Args>
    void note(const Args&... args) const {
        if (log_)
            *log_ << concat(args...) << '\n';
    }

    [[nodiscard]] std::string path_of(const std::string& name) const {
        return (std::filesystem::path(cfg_.output_dir) / name).string();
    }

    void write_fields(const MulticontinuaProblem& pb, const Trajectory& traj, const std::string& prefix) const {
        if (!cfg_.vtk)
            return;
        for (std::size_t k = 0; k < traj.indices.size(); ++k)
            save_vtk(path_of(prefix + "_step" + std::to_string(traj.indices[k]) + ".vtk"), pb.mesh, traj.states[k],
                     pb.continuum_count());
    }

    void print_row(const ErrorRow& row) const {
        if (!log_)
            return;
        const auto& s = row.report.samples.back();
        *log_ << "  step " << s.index << ':';
        for (std::size_t a = 0; a < s.l2.size(); ++a)
            *log_ << " L2_" << a + 1 << " = " << s.l2[a] << "%, energy_" << a + 1 << " = " << s.energy[a] << "%;";
        *log_ << " q = " << s.q << "%\n";
    }

    SimulationConfig cfg_;
    std::ostream* log_;
};

} // namespace mscontinua
