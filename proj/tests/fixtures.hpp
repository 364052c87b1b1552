#pragma once
// Shared test geometry.
#include "mscontinua/config.hpp"

#include <vector>

namespace fixture {

/// The preset network redrawn on a 0.05 lattice so it conforms to 20x20
/// criss-cross meshes. Crossings are shared vertices.
inline std::vector<mscontinua::Polyline> coarse_network() {
    return {
        {{0.15, 0.75}, {0.35, 0.75}, {0.65, 0.75}},
        {{0.35, 0.45}, {0.35, 0.75}, {0.35, 0.85}},
        {{0.45, 0.15}, {0.65, 0.35}, {0.85, 0.55}},
        {{0.55, 0.35}, {0.65, 0.35}, {0.95, 0.35}},
        {{0.15, 0.35}, {0.25, 0.25}},
    };
}

/// Network conforming to an n x n criss-cross mesh of the unit square.
inline std::vector<mscontinua::Polyline> network_for(int n) {
    return n % 40 == 0 ? mscontinua::test_fracture_network() : coarse_network();
}

} // namespace fixture
