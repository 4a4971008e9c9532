#pragma once

#include "latrec/common.hpp"
#include "latrec/density_search.hpp"
#include "latrec/exponential_sums.hpp"
#include "latrec/finite_ergodic.hpp"
#include "latrec/io.hpp"
#include "latrec/lattice_spheres.hpp"
#include "latrec/tree_model.hpp"
