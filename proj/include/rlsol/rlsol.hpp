#pragma once

// Umbrella header for the library.

#include "rlsol/errors.hpp"
#include "rlsol/linalg.hpp"
#include "rlsol/rls.hpp"
#include "rlsol/optimizers.hpp"
#include "rlsol/mlp.hpp"
#include "rlsol/trace.hpp"
#include "rlsol/session.hpp"
#include "rlsol/half.hpp"
#include "rlsol/conv.hpp"
#include "rlsol/conv_session.hpp"
#include "rlsol/serialization.hpp"
#include "rlsol/drift.hpp"
#include "rlsol/bench_config.hpp"
#include "rlsol/report_io.hpp"
