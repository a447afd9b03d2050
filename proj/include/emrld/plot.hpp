#pragma once

#include <string>
#include <vector>

#include "emrld/envs.hpp"
#include "emrld/rollout.hpp"

namespace emrld {

struct CurveSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> band;  // optional +/- spread, same length as y
};

/// Line chart with axes, ticks and a legend.
std::string render_curves_svg(const std::vector<CurveSeries>& series, const std::string& x_label,
                              const std::string& y_label);

struct TrajectoryPlotItem {
  Task task;
  std::vector<Vec> path;  // visited (x, y, ...) observations including the final one
};

/// Goal stars, reward regions (disc or box of the environment's reward radius)
/// and one polyline per item.
std::string render_trajectories_svg(EnvKind kind, const std::vector<TrajectoryPlotItem>& items);

}  // namespace emrld
