#pragma once
// Umbrella header.

#include "core.hpp"
#include "raster.hpp"
#include "scene_graph.hpp"
#include "co_occurrence.hpp"
#include "semantic_grid.hpp"
#include "planner.hpp"
#include "subgoal.hpp"
#include "control_reward.hpp"
#include "recovery.hpp"
#include "oracle_io.hpp"
#include "sim_env.hpp"
#include "scenario_io.hpp"
#include "harness.hpp"
