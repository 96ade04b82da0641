#pragma once

// Umbrella header. Individual headers can be pulled in separately; they are
// self contained and only depend on each other downward.

#include "params.hpp"
#include "trace.hpp"
#include "rate_model.hpp"
#include "lindblad.hpp"
#include "gate.hpp"
#include "noise.hpp"
#include "register.hpp"
#include "sampling.hpp"
#include "engine_circuit.hpp"
#include "gem.hpp"
#include "experiments.hpp"
