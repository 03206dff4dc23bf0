#pragma once

#include "knadi/adi.hpp"
#include "knadi/bench.hpp"
#include "knadi/convergence_log.hpp"
#include "knadi/dae_system.hpp"
#include "knadi/errors.hpp"
#include "knadi/lowrank.hpp"
#include "knadi/matrix_market.hpp"
#include "knadi/newton.hpp"
#include "knadi/oracle.hpp"
#include "knadi/problem_gen.hpp"
#include "knadi/projector.hpp"
#include "knadi/run_config.hpp"
#include "knadi/saddle.hpp"
#include "knadi/shifts.hpp"
#include "knadi/types.hpp"
