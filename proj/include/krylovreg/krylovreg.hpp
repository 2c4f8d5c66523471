#pragma once

#include "bidiag.hpp"
#include "diagnostics.hpp"
#include "numerics.hpp"
#include "paramchoice.hpp"
#include "problems.hpp"
#include "rng.hpp"
#include "solvers.hpp"
#include "trace.hpp"
