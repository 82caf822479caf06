#pragma once

// Umbrella header: simulation, estimation, and inference for finite systems
// of interacting innovation processes.

#include "innovnet/errors.hpp"
#include "innovnet/model_params.hpp"
#include "innovnet/special_functions.hpp"
#include "innovnet/spectral.hpp"
#include "innovnet/rng.hpp"
#include "innovnet/fenwick.hpp"
#include "innovnet/simulator.hpp"
#include "innovnet/trajectory_io.hpp"
#include "innovnet/enumeration.hpp"
#include "innovnet/estimators.hpp"
#include "innovnet/inference.hpp"
#include "innovnet/ingest.hpp"
#include "innovnet/harness.hpp"
