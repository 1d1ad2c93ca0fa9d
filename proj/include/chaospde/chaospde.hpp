#pragma once

#include "chaospde/basis.hpp"
#include "chaospde/budget.hpp"
#include "chaospde/chaos.hpp"
#include "chaospde/commands.hpp"
#include "chaospde/common.hpp"
#include "chaospde/config.hpp"
#include "chaospde/csv.hpp"
#include "chaospde/multi_index.hpp"
#include "chaospde/noise.hpp"
#include "chaospde/propagator.hpp"
#include "chaospde/rng.hpp"
#include "chaospde/solver.hpp"
#include "chaospde/spectral.hpp"
#include "chaospde/time_grid.hpp"
