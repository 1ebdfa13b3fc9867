#ifndef RICCI_IO_HPP
#define RICCI_IO_HPP

#include "ricci/harness.hpp"

#include <json.hpp>

#include <string>

namespace ricci {

using Json = nlohmann::json;

/// Shortest round-trip decimal form, independent of the C locale.
std::string format_number(double v);

Json vector_to_json(const Vec& v);
/// Row-major nested arrays.
Json matrix_to_json(const Mat& m);

Json flow_to_json(const FlowManifold& flow);
/// Parses {"kind", "dim", "params", "tau_min", "tau_max"}; errors name the offending key.
FlowManifold flow_from_json(const Json& j, const std::string& where = "flow");

Json point_to_json(const ChartPoint& p);
ChartPoint point_from_json(const Json& j, const FlowManifold& flow, const std::string& where);

Json solve_options_to_json(const SolveOptions& opts);
SolveOptions solve_options_from_json(const Json& j, const std::string& where);

Json curve_to_json(const LCurve& curve);
Json geodesic_to_json(const LGeodesicResult& result);
Json walk_to_json(const WalkPath& path);
Json report_to_json(const ExperimentReport& report);

/// Columns n, t, chart and coordinates of X and Y, Lambda, Theta, zeta, sigma, multiplicity, floor_ok, solver_flags.
std::string walk_to_csv(const WalkPath& path);
std::string report_to_csv(const ExperimentReport& report);
/// Line chart of the checkpoint means with a band of `band` standard errors.
std::string report_to_svg(const ExperimentReport& report, double band = 2.0);

}  // namespace ricci

#endif
