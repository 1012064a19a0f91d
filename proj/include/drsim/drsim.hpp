#pragma once

#include "drsim/algorithms.hpp"
#include "drsim/analysis.hpp"
#include "drsim/errors.hpp"
#include "drsim/experiments.hpp"
#include "drsim/grid_model.hpp"
#include "drsim/objective.hpp"
#include "drsim/problem.hpp"
#include "drsim/random.hpp"
#include "drsim/reference_solvers.hpp"
#include "drsim/response_model.hpp"
#include "drsim/scenarios.hpp"
#include "drsim/vector_ops.hpp"
