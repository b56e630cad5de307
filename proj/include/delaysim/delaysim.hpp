#pragma once

// Umbrella header: simulation of stochastic differential equations with
// delayed, highly nonlinear coefficients (Brownian and compound-Poisson
// drivers), plus the empirical convergence-rate harness built on top.

#include "delaysim/convergence.hpp"
#include "delaysim/drivers.hpp"
#include "delaysim/em_solver.hpp"
#include "delaysim/initial_segment.hpp"
#include "delaysim/models.hpp"
#include "delaysim/quadrature.hpp"
#include "delaysim/report_io.hpp"
#include "delaysim/rng.hpp"
#include "delaysim/smoothing.hpp"
#include "delaysim/stats.hpp"
#include "delaysim/time_grid.hpp"
#include "delaysim/version.hpp"
