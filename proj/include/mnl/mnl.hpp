#pragma once

// Umbrella header for the whole library.

#include "mnl/base.hpp"
#include "mnl/calculus.hpp"
#include "mnl/diagnostics.hpp"
#include "mnl/experiments.hpp"
#include "mnl/linalg.hpp"
#include "mnl/loss.hpp"
#include "mnl/network.hpp"
#include "mnl/svg.hpp"
#include "mnl/training.hpp"
#include "mnl/verify.hpp"
