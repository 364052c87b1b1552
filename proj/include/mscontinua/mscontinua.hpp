/// @file mscontinua.hpp
/// @brief Umbrella header.
#pragma once

#include "mscontinua/coarse_grid.hpp"
#include "mscontinua/common.hpp"
#include "mscontinua/config.hpp"
#include "mscontinua/constitutive.hpp"
#include "mscontinua/fem.hpp"
#include "mscontinua/linear_solver.hpp"
#include "mscontinua/mesh.hpp"
#include "mscontinua/msfem.hpp"
#include "mscontinua/output.hpp"
#include "mscontinua/run.hpp"
#include "mscontinua/solver.hpp"
