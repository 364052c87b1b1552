// Command-line front end: run simulations, print presets, generate meshes.
#include "mscontinua/mscontinua.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

using namespace mscontinua;

std::vector<int> parse_counts(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        out.push_back(std::stoi(tok));
    if (out.empty())
        fail("--bases needs at least one count");
    return out;
}

Polyline parse_polyline(const std::string& s) {
    return parse_config_string("[mesh]\nfracture = " + s + "\n").fractures.at(0);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multiscale simulation of unsaturated multicontinua flow in fractured media"};
    app.require_subcommand(1);

    std::string config_path, mode = "compare", bases, out_dir;
    double adaptive = 0.0;
    bool simplified = false;
    auto* run = app.add_subcommand("run", "run a simulation from a config file");
    run->add_option("--config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
    run->add_option("--mode", mode, "fine, ms or compare")->check(CLI::IsMember({"fine", "ms", "compare"}));
    auto* opt_bases = run->add_option("--bases", bases, "fixed basis counts per patch, e.g. 1,2,4,8");
    auto* opt_adaptive = run->add_option("--adaptive", adaptive, "adaptive selection with this eigenvalue threshold");
    auto* opt_simplified = run->add_flag("--simplified", simplified, "simplified bases without eigensolves");
    opt_bases->excludes(opt_adaptive)->excludes(opt_simplified);
    opt_adaptive->excludes(opt_simplified);
    run->add_option("--out", out_dir, "output directory (overrides the config)");

    std::string preset_id;
    auto* pre = app.add_subcommand("preset", "print a test configuration");
    pre->add_option("test", preset_id, "test1, test2 or test3")->required();

    int nx = 80, ny = 80;
    std::vector<double> domain{0.0, 0.0, 1.0, 1.0};
    std::vector<std::string> fractures;
    bool test_network = false;
    std::string mesh_out;
    auto* gen = app.add_subcommand("mesh-gen", "generate a structured criss-cross mesh with fractures");
    gen->add_option("--nx", nx, "cells in x")->check(CLI::PositiveNumber);
    gen->add_option("--ny", ny, "cells in y")->check(CLI::PositiveNumber);
    gen->add_option("--domain", domain, "xmin ymin xmax ymax")->expected(4);
    gen->add_option("--fracture", fractures, "polyline 'x y, x y, ...' (repeatable)");
    gen->add_flag("--test-network", test_network, "embed the fracture network of the test presets");
    gen->add_option("-o,--output", mesh_out, "mesh file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto cfg = load_config(config_path);
            if (*opt_bases) {
                cfg.basis.kind = BasisPolicy::Kind::fixed;
                cfg.basis.counts = parse_counts(bases);
            } else if (*opt_adaptive) {
                cfg.basis.kind = BasisPolicy::Kind::adaptive;
                cfg.basis.threshold = adaptive;
            } else if (simplified) {
                cfg.basis.kind = BasisPolicy::Kind::simplified;
            }
            if (!out_dir.empty())
                cfg.output_dir = out_dir;
            cfg.validate();
            const RunMode m = mode == "fine" ? RunMode::fine : mode == "ms" ? RunMode::multiscale : RunMode::compare;
            Runner(cfg).run(m);
        } else if (*pre) {
            write_config(std::cout, preset(preset_id));
        } else if (*gen) {
            std::vector<Polyline> lines = test_network ? test_fracture_network() : std::vector<Polyline>{};
            for (const auto& f : fractures)
                lines.push_back(parse_polyline(f));
            const auto mesh = generate_structured_mesh(nx, ny, {domain[0], domain[1], domain[2], domain[3]}, lines);
            save_mesh(mesh_out, mesh);
            std::cout << mesh.node_count() << " nodes, " << mesh.triangle_count() << " triangles, "
                      << mesh.fracture_edge_count() << " fracture edges\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
