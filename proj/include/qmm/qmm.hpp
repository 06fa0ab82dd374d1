#pragma once

#include "qmm/ledger.hpp"
#include "qmm/rng.hpp"
#include "qmm/problem.hpp"
#include "qmm/smoothing.hpp"
#include "qmm/qsampler.hpp"
#include "qmm/broo.hpp"
#include "qmm/hardness.hpp"
#include "qmm/searchsim.hpp"
#include "qmm/config.hpp"
#include "qmm/solver.hpp"
#include "qmm/version.hpp"
