#pragma once

#include "errors.hpp"
#include "linalg.hpp"
#include "json_io.hpp"
#include "schedule.hpp"
#include "propagator.hpp"
#include "geometry.hpp"
#include "qubit.hpp"
#include "verify.hpp"
#include "cli.hpp"
