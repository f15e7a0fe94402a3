#pragma once

#include "varint/errors.hpp"
#include "varint/galerkin_csprk.hpp"
#include "varint/lagrangian_vi.hpp"
#include "varint/legendre.hpp"
#include "varint/mechanics.hpp"
#include "varint/quadrature.hpp"
#include "varint/stage_solver.hpp"
#include "varint/structure_analysis.hpp"
