#ifndef RICCI_SRC_GEOMETRY_INTERNAL_HPP
#define RICCI_SRC_GEOMETRY_INTERNAL_HPP

#include "ricci/geometry.hpp"

namespace ricci::detail {

double wrap_centered(double dx, double period);

/// Chart point for an embedded curved-factor point; torus coordinates are taken from `out`.
ChartPoint curved_from_embedding(const FlowManifold& flow, const Eigen::VectorXd& e, int preferred,
                                 ChartPoint out);

/// Chart components of an ambient tangent vector dE at p (curved block only; torus entries zero).
Vec chart_vector_from_embedding(const FlowManifold& flow, const ChartPoint& p, const Eigen::VectorXd& de);

}  // namespace ricci::detail

#endif
