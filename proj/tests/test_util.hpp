#ifndef RICCI_TEST_UTIL_HPP
#define RICCI_TEST_UTIL_HPP

#include "ricci/geometry.hpp"
#include "ricci/rng.hpp"

#include <cmath>
#include <vector>

namespace ricci::test {

inline ChartPoint point(std::initializer_list<double> xs, int chart = 0) {
    ChartPoint p;
    p.chart = chart;
    p.x.resize(static_cast<int>(xs.size()));
    int i = 0;
    for (double v : xs) p.x(i++) = v;
    return p;
}

inline Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<int>(xs.size()));
    int i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

// Random chart point away from the chart edges.
inline ChartPoint random_point(const FlowManifold& flow, Rng& rng) {
    ChartPoint p;
    p.chart = 0;
    p.x = Vec::Zero(flow.dim());
    const int m = flow.sphere_dim();
    const double radius = flow.kind() == FlowKind::HyperbolicSpace ? 0.7 : 1.5;
    for (int i = 0; i < m; ++i) p.x(i) = radius * (2.0 * rng.uniform() - 1.0) / std::sqrt(static_cast<double>(m));
    if (flow.curved_is_sphere()) p.chart = rng.uniform() < 0.5 ? 0 : 1;
    for (int i = 0; i < flow.torus_dim(); ++i) p.x(m + i) = flow.periods()[i] * rng.uniform();
    return flow.normalize(p);
}

inline Vec random_vec(int d, Rng& rng, double scale = 1.0) {
    Vec v(d);
    for (int i = 0; i < d; ++i) v(i) = scale * rng.normal();
    return v;
}

inline double random_time(const FlowManifold& flow, Rng& rng) {
    return flow.tau_min() + (flow.tau_max() - flow.tau_min()) * rng.uniform();
}

// The four model flows used throughout the tests.
inline std::vector<FlowManifold> model_flows() {
    return {FlowManifold::flat_torus({1.0, 1.0}, 1.0, 8.0), FlowManifold::round_sphere(2, 1.0, 1.0, 8.0),
            FlowManifold::hyperbolic_space(2, 30.0, 1.0, 8.0),
            FlowManifold::product_sphere_torus(2, 1.0, {1.0}, 1.0, 8.0)};
}

}  // namespace ricci::test

#endif
