#pragma once

#include "hartree/error.hpp"
#include "hartree/grid.hpp"
#include "hartree/potentials.hpp"
#include "hartree/paths.hpp"
#include "hartree/hamiltonians.hpp"
#include "hartree/feynman_kac.hpp"
#include "hartree/rate_function.hpp"
#include "hartree/variational.hpp"
#include "hartree/montecarlo.hpp"
#include "hartree/io.hpp"
