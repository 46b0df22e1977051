#pragma once

// Umbrella header.

#include "mersar/adaptive.hpp"
#include "mersar/decision_tree.hpp"
#include "mersar/error.hpp"
#include "mersar/experiment.hpp"
#include "mersar/pmf.hpp"
#include "mersar/sar_engine.hpp"
#include "mersar/signal.hpp"
#include "mersar/tree_builders.hpp"
