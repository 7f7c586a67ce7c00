#pragma once

#include "slowfast/error.hpp"
#include "slowfast/format.hpp"
#include "slowfast/csv.hpp"
#include "slowfast/model.hpp"
#include "slowfast/conditions.hpp"
#include "slowfast/builtin_models.hpp"
#include "slowfast/expression.hpp"
#include "slowfast/config.hpp"
#include "slowfast/grid.hpp"
#include "slowfast/quadrature.hpp"
#include "slowfast/fast_dynamics.hpp"
#include "slowfast/poisson.hpp"
#include "slowfast/averaging.hpp"
#include "slowfast/mdp_rate.hpp"
#include "slowfast/rng.hpp"
#include "slowfast/simulate.hpp"
#include "slowfast/rare_event.hpp"
