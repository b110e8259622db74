#pragma once

#include "swd/config.hpp"
#include "swd/csv.hpp"
#include "swd/datasets.hpp"
#include "swd/diagnostics.hpp"
#include "swd/linalg.hpp"
#include "swd/optimizers.hpp"
#include "swd/problems.hpp"
#include "swd/random.hpp"
#include "swd/run.hpp"
#include "swd/schedules.hpp"
#include "swd/sweep.hpp"
#include "swd/vector_ops.hpp"
#include "swd/verify.hpp"
