#pragma once

#include "marker_nav/benchmark.hpp"
#include "marker_nav/camera.hpp"
#include "marker_nav/control.hpp"
#include "marker_nav/disambiguation.hpp"
#include "marker_nav/error.hpp"
#include "marker_nav/fusion.hpp"
#include "marker_nav/geometry.hpp"
#include "marker_nav/kinematics.hpp"
#include "marker_nav/planar_pose.hpp"
#include "marker_nav/scenario_io.hpp"
#include "marker_nav/simulator.hpp"
#include "marker_nav/sweep.hpp"
