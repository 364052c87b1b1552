// Small end-to-end example: a fractured unit square on a coarse mesh, solved
// on the fine grid and with 4 multiscale basis functions per coarse node.
#include "mscontinua/mscontinua.hpp"

#include <iostream>

int main() {
    using namespace mscontinua;

    SimulationConfig cfg = preset("test1");
    cfg.nx_fine = cfg.ny_fine = 40;
    cfg.time.n_steps = 20;
    cfg.time.t_max = 20 * 66e-4 / 200; // keep the preset step size
    cfg.snapshots = {0, 10, 20};
    cfg.basis.counts = {4};
    cfg.output_dir = "quickstart_out";
    cfg.vtk = false;

    const auto result = Runner(cfg).run(RunMode::compare);
    const auto& last = result.errors.front().report.samples.back();
    std::cout << "relative L2 error at the last step: " << last.l2[0] << "%\n";
}
