#pragma once

#include "spca/combinatorics.hpp"
#include "spca/config.hpp"
#include "spca/covariance.hpp"
#include "spca/csv.hpp"
#include "spca/deviation.hpp"
#include "spca/error.hpp"
#include "spca/experiment.hpp"
#include "spca/metrics.hpp"
#include "spca/parallel.hpp"
#include "spca/seeding.hpp"
#include "spca/simulation.hpp"
#include "spca/solver.hpp"
#include "spca/types.hpp"
