#pragma once

// Everything in one include.
#include "approx.hpp"
#include "bigint.hpp"
#include "counting.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "exact.hpp"
#include "io.hpp"
#include "kde.hpp"
#include "moments.hpp"
#include "parallel.hpp"
#include "pipeline.hpp"
#include "relation.hpp"
#include "rng.hpp"
#include "simulation.hpp"
