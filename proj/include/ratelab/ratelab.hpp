#pragma once

// Umbrella header: discretized densities, divergences, atom-family priors,
// exact posterior updates, entropy solvers, rate experiments, and the
// configuration/record plumbing that drives them.

#include "ratelab/config.hpp"
#include "ratelab/divergences.hpp"
#include "ratelab/entropy.hpp"
#include "ratelab/experiments.hpp"
#include "ratelab/families.hpp"
#include "ratelab/grid.hpp"
#include "ratelab/posterior.hpp"
#include "ratelab/priors.hpp"
#include "ratelab/records.hpp"
#include "ratelab/rng.hpp"
#include "ratelab/runner.hpp"
