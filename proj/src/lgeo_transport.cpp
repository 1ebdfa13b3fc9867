#include "ricci/lgeo.hpp"

#include <cmath>

namespace ricci {

namespace {

Mat transport_rhs(const FlowManifold& flow, double s, const Vec& u, const Vec& vel, const Mat& z) {
    Mat out = -2.0 * s * (flow.ricci_sharp(u, s * s) * z);
    for (int j = 0; j < z.cols(); ++j) out.col(j) -= flow.gamma_contract(u, vel, z.col(j));
    return out;
}

}  // namespace

std::vector<Mat> transport_along(const LCurve& curve, const Mat& xi) {
    if (!curve.flow) throw std::invalid_argument("transport_along: curve has no flow");
    const FlowManifold& flow = *curve.flow;
    const int n = curve.segments();
    if (n < 1) throw std::invalid_argument("transport_along: curve needs at least two nodes");
    if (xi.rows() != flow.dim()) throw std::invalid_argument("transport_along: vectors have wrong dimension");
    const std::vector<Vec> vel = curve.velocity.empty() ? finite_difference_velocity(curve) : curve.velocity;
    std::vector<Mat> out(n + 1);
    Mat z = xi;
    out[0] = z;
    for (int k = 0; k < n; ++k) {
        const ChartPoint& a = curve.points[k];
        const ChartPoint& b = curve.points[k + 1];
        const double h = curve.s[k + 1] - curve.s[k];
        const double s = curve.s[k];
        const Vec p0 = a.x;
        const Vec v0 = vel[k];
        const Vec p1 = flow.coords_near(b, a);
        const Vec v1 = b.chart == a.chart ? vel[k + 1] : flow.push_vector(b, vel[k + 1], a.chart);
        // Cubic Hermite midpoint keeps the stage data fourth-order accurate.
        const Vec pm = 0.5 * (p0 + p1) + h * (v0 - v1) / 8.0;
        const Vec vm = 1.5 * (p1 - p0) / h - 0.25 * (v0 + v1);
        const Mat k1 = transport_rhs(flow, s, p0, v0, z);
        const Mat k2 = transport_rhs(flow, s + 0.5 * h, pm, vm, z + 0.5 * h * k1);
        const Mat k3 = transport_rhs(flow, s + 0.5 * h, pm, vm, z + 0.5 * h * k2);
        const Mat k4 = transport_rhs(flow, s + h, p1, v1, z + h * k3);
        z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (b.chart != a.chart) {
            ChartPoint here{a.chart, p1};
            for (int j = 0; j < z.cols(); ++j) z.col(j) = flow.push_vector(here, z.col(j), b.chart);
        }
        out[k + 1] = z;
    }
    return out;
}

Vec space_time_transport(const LCurve& curve, const Vec& xi) {
    Mat m(xi.size(), 1);
    m.col(0) = xi;
    return transport_along(curve, m).back().col(0);
}

double gram_drift(const FlowManifold& flow, const LCurve& curve, const Mat& source, const Mat& transported) {
    const Mat g1 = source.transpose() * flow.metric(curve.points.front().x, curve.tau1) * source;
    const Mat g2 = transported.transpose() * flow.metric(curve.points.back().x, curve.tau2) * transported;
    return (g2 - g1).cwiseAbs().maxCoeff();
}

TransportMap transport_frame(const FlowManifold& flow, const LGeodesicResult& geodesic, const Frame& frame,
                             bool keep_along) {
    const LCurve& c = geodesic.curve;
    if (c.points.empty()) throw std::invalid_argument("transport_frame: empty geodesic");
    const ChartPoint& start = c.points.front();
    Mat src = frame.vectors;
    if (frame.base.x.chart != start.chart)
        for (int j = 0; j < src.cols(); ++j) src.col(j) = flow.push_vector(frame.base.x, src.col(j), start.chart);
    TransportMap tm;
    tm.source = frame;
    if (flow.kind() == FlowKind::FlatTorus) {
        tm.transported = src;
        if (keep_along) tm.along.assign(c.points.size(), src);
    } else {
        std::vector<Mat> along = transport_along(c, src);
        tm.transported = along.back();
        if (keep_along) tm.along = std::move(along);
    }
    tm.drift = gram_drift(flow, c, src, tm.transported);
    tm.frame = gram_schmidt(flow, c.tau2, c.points.back(), tm.transported);
    return tm;
}

TransportMap transport_frame(const FlowManifold& flow, const ChartPoint& x, double tau1, const ChartPoint& y,
                             double tau2, const Frame& frame, const SolveOptions& opts) {
    if (std::abs(frame.base.tau - tau1) > 1e-12 * (1.0 + tau1))
        throw std::invalid_argument("transport_frame: frame is not based at tau1");
    const LGeodesicResult geo = solve_min_lgeodesic(flow, x, tau1, y, tau2, opts);
    return transport_frame(flow, geo, frame, false);
}

}  // namespace ricci
