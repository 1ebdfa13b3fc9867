#include "ricci/lgeo.hpp"

#include "numerics.hpp"

#include <cmath>

namespace ricci {

namespace {

std::vector<Vec> curve_velocity(const LCurve& c) {
    return c.velocity.empty() ? finite_difference_velocity(c) : c.velocity;
}

void require_times(const FlowManifold& flow, double tau_bar1, double tau_bar2, double t) {
    if (!(tau_bar1 < tau_bar2)) throw std::invalid_argument("requires tau_bar1 < tau_bar2");
    if (!(t > 0.0)) throw std::invalid_argument("requires t > 0");
    flow.check_time(tau_bar1 * t);
    flow.check_time(tau_bar2 * t);
}

// tau^{3/2} (R - |γ'|²) at one end of the curve.
double boundary_energy(const FlowManifold& flow, const LCurve& c, const Vec& vel, int k) {
    const double s = c.s[k];
    const double tau = s * s;
    const double speed2 = flow.norm2(c.points[k].x, tau, vel) / (4.0 * tau);
    return tau * s * (flow.scalar(tau) - speed2);
}

Mat source_in_start_chart(const FlowManifold& flow, const LCurve& c, const Frame& source) {
    Mat v = source.vectors;
    const ChartPoint& start = c.points.front();
    if (source.base.x.chart != start.chart)
        for (int j = 0; j < v.cols(); ++j) v.col(j) = flow.push_vector(source.base.x, v.col(j), start.chart);
    return v;
}

// Λ along endpoint variations by frozen exponential maps.
struct LambdaProbe {
    const FlowManifold& flow;
    double tau1;
    double tau2;
    ChartPoint x;
    ChartPoint y;
    SolveOptions opts;

    double operator()(const Vec& dx, const Vec& dy) const {
        const ChartPoint xp = frozen_exp(flow, tau1, x, dx);
        const ChartPoint yp = frozen_exp(flow, tau2, y, dy);
        return solve_min_lgeodesic(flow, xp, tau1, yp, tau2, opts).action;
    }
};

}  // namespace

EndpointDerivatives dL_boundary(const FlowManifold& flow, const LGeodesicResult& result) {
    const LCurve& c = result.curve;
    if (!(c.tau1 > 0.0)) throw std::invalid_argument("dL_boundary: tau1 must be positive");
    const std::vector<Vec> vel = curve_velocity(c);
    const int n = c.segments();
    auto speed2 = [&](int k) {
        const double tau = c.s[k] * c.s[k];
        return flow.norm2(c.points[k].x, tau, vel[k]) / (4.0 * tau);
    };
    EndpointDerivatives out;
    out.d_tau1 = -std::sqrt(c.tau1) * (flow.scalar(c.tau1) - speed2(0));
    out.d_tau2 = std::sqrt(c.tau2) * (flow.scalar(c.tau2) - speed2(n));
    return out;
}

LambdaRate dLambda_dt(const FlowManifold& flow, double tau_bar1, double tau_bar2, double t,
                      const LGeodesicResult& result) {
    require_times(flow, tau_bar1, tau_bar2, t);
    const LCurve& c = result.curve;
    const std::vector<Vec> vel = curve_velocity(c);
    const int n = c.segments();
    std::vector<double> f(n + 1);
    for (int k = 0; k <= n; ++k) {
        const double s = c.s[k];
        const double tau = s * s;
        const Vec& u = c.points[k].x;
        const double r = flow.scalar(tau);
        const double ric_vv = vel[k].dot(flow.ricci(u, tau) * vel[k]);
        f[k] = 3.0 * tau * r - 4.0 * tau * tau * flow.ricci_norm2(tau) - 0.25 * flow.norm2(u, tau, vel[k]) +
               tau * ric_vv;
    }
    LambdaRate out;
    out.integral = detail::simpson(f, c.s[1] - c.s[0]) / t;
    out.boundary = (boundary_energy(flow, c, vel[n], n) - boundary_energy(flow, c, vel[0], 0)) / t;
    return out;
}

double SigmaForm::expectation() const {
    const int d = static_cast<int>(q.rows());
    return base + q.trace() / (d + 2);
}

double SigmaForm::evaluate(const Vec& lam) const { return base + lam.dot(q * lam); }

SigmaForm sigma_form(const FlowManifold& flow, double tau_bar1, double tau_bar2, double t,
                     const LGeodesicResult& result, const Frame& source) {
    require_times(flow, tau_bar1, tau_bar2, t);
    const LCurve& c = result.curve;
    const int d = flow.dim();
    const int n = c.segments();
    const std::vector<Vec> vel = curve_velocity(c);
    const Mat src = source_in_start_chart(flow, c, source);
    const std::vector<Mat> along = transport_along(c, src);

    SigmaForm sf;
    sf.t = t;
    sf.lambda = result.action;
    sf.base = (boundary_energy(flow, c, vel[n], n) - boundary_energy(flow, c, vel[0], 0)) / t;
    sf.rhs = d * (std::sqrt(tau_bar2) - std::sqrt(tau_bar1)) / std::sqrt(t) - result.action / (2.0 * t);

    Mat integral = Mat::Zero(d, d);
    if (flow.has_curved_factor()) {
        std::vector<double> f(n + 1);
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                for (int k = 0; k <= n; ++k) {
                    const double s = c.s[k];
                    const double tau = s * s;
                    const CurvaturePack pack = curvature_pack(flow, {c.points[k], tau});
                    const Vec gdot = vel[k] / (2.0 * s);
                    f[k] = tau * tau * h_bilinear(pack, tau, gdot, along[k].col(i), along[k].col(j));
                }
                integral(i, j) = integral(j, i) = detail::simpson(f, c.s[1] - c.s[0]);
            }
    }
    const ChartPoint& a = c.points.front();
    const ChartPoint& b = c.points.back();
    const Mat& z1 = along.front();
    const Mat& z2 = along.back();
    const double t1 = c.tau1, t2 = c.tau2;
    const Mat g1 = z1.transpose() * flow.metric(a.x, t1) * z1;
    const Mat g2 = z2.transpose() * flow.metric(b.x, t2) * z2;
    const Mat r1 = z1.transpose() * flow.ricci(a.x, t1) * z1;
    const Mat r2 = z2.transpose() * flow.ricci(b.x, t2) * z2;
    sf.q = (d + 2.0) * ((std::sqrt(t2) * g2 - std::sqrt(t1) * g1) / t -
                        (2.0 / t) * (std::pow(t2, 1.5) * r2 - std::pow(t1, 1.5) * r1) - (2.0 / t) * integral);
    return sf;
}

double sigma_direct(const FlowManifold& flow, double tau_bar1, double tau_bar2, double t,
                    const LGeodesicResult& result, const Frame& source, const Vec& lam) {
    require_times(flow, tau_bar1, tau_bar2, t);
    const LCurve& c = result.curve;
    const int d = flow.dim();
    const int n = c.segments();
    const std::vector<Vec> vel = curve_velocity(c);
    const Mat src = source_in_start_chart(flow, c, source);
    const Vec hat = std::sqrt(d + 2.0) * (src * lam);
    Mat col(d, 1);
    col.col(0) = hat;
    const std::vector<Mat> along = transport_along(c, col);

    // The variation field is sqrt(tau/t) times the transported vector.
    auto field = [&](int k) { return Vec(std::sqrt(c.s[k] * c.s[k] / t) * along[k].col(0)); };
    auto edge = [&](int k) {
        const double tau = c.s[k] * c.s[k];
        const Vec z = field(k);
        const Vec& u = c.points[k].x;
        return flow.norm2(u, tau, z) / std::sqrt(tau) - 2.0 * std::sqrt(tau) * z.dot(flow.ricci(u, tau) * z);
    };
    std::vector<double> f(n + 1, 0.0);
    for (int k = 0; k <= n; ++k) {
        const double s = c.s[k];
        const double tau = s * s;
        const CurvaturePack pack = curvature_pack(flow, {c.points[k], tau});
        // sqrt(tau) H dtau with dtau = 2s ds.
        f[k] = s * h_form(pack, tau, vel[k] / (2.0 * s), field(k)) * 2.0 * s;
    }
    const double base = (boundary_energy(flow, c, vel[n], n) - boundary_energy(flow, c, vel[0], 0)) / t;
    return base + edge(n) - edge(0) - detail::simpson(f, c.s[1] - c.s[0]);
}

HessianReport hessian_bound_check(const FlowManifold& flow, double tau_bar1, double tau_bar2, double t,
                                  const ChartPoint& x, const ChartPoint& y, const SolveOptions& opts) {
    require_times(flow, tau_bar1, tau_bar2, t);
    const double tau1 = tau_bar1 * t, tau2 = tau_bar2 * t;
    const int d = flow.dim();
    const LGeodesicResult geo = solve_min_lgeodesic(flow, x, tau1, y, tau2, opts);
    const LCurve& c = geo.curve;
    const Frame source = coordinate_frame(flow, tau1, c.points.front());
    const TransportMap tm = transport_frame(flow, geo, source, false);

    HessianReport rep;
    rep.t = t;
    rep.lambda = geo.action;
    rep.multiplicity_hint = geo.multiplicity_hint;

    SolveOptions probe_opts = opts;
    probe_opts.warm_start = geo.initial_z.v;
    const LambdaProbe probe{flow, tau1, tau2, c.points.front(), c.points.back(), probe_opts};
    const double base = probe(Vec::Zero(d), Vec::Zero(d));
    auto second = [&](int i, double h) {
        const Vec dx = h * std::sqrt(tau_bar1) * source.vectors.col(i);
        const Vec dy = h * std::sqrt(tau_bar2) * tm.transported.col(i);
        return (probe(dx, dy) - 2.0 * base + probe(-dx, -dy)) / (h * h);
    };
    double lhs = 0.0;
    for (int i = 0; i < d; ++i) {
        const double coarse = second(i, 1e-2);
        const double fine = second(i, 5e-3);
        lhs += (4.0 * fine - coarse) / 3.0;
    }
    rep.lhs = lhs;

    const std::vector<Vec> vel = curve_velocity(c);
    const int n = c.segments();
    std::vector<double> f(n + 1);
    for (int k = 0; k <= n; ++k) {
        const double s = c.s[k];
        const double tau = s * s;
        const Vec& u = c.points[k].x;
        const double ric_vv = vel[k].dot(flow.ricci(u, tau) * vel[k]);
        f[k] = 4.0 * tau * tau * flow.ricci_norm2(tau) - 4.0 * tau * flow.scalar(tau) - tau * ric_vv;
    }
    rep.rhs = d * (std::sqrt(tau2) - std::sqrt(tau1)) / t + detail::simpson(f, c.s[1] - c.s[0]) / t;

    const SigmaForm sf = sigma_form(flow, tau_bar1, tau_bar2, t, geo, source);
    rep.rhs_h_form = sf.q.trace() / (d + 2.0);
    rep.dlambda_dt = dLambda_dt(flow, tau_bar1, tau_bar2, t, geo).integral;
    rep.combined_lhs = rep.lhs + rep.dlambda_dt;
    rep.combined_rhs = d * (std::sqrt(tau_bar2) - std::sqrt(tau_bar1)) / std::sqrt(t) - geo.action / (2.0 * t);
    rep.hessian_ok = rep.lhs <= rep.rhs + 1e-3 * (1.0 + std::abs(rep.rhs));
    rep.combined_ok = rep.combined_lhs <= rep.combined_rhs + 1e-3 * (1.0 + std::abs(rep.combined_rhs));
    return rep;
}

FirstVariationReport first_variation_check(const FlowManifold& flow, double tau_bar1, double tau_bar2, double t,
                                           const ChartPoint& x, const ChartPoint& y, const Vec& lam,
                                           const SolveOptions& opts) {
    require_times(flow, tau_bar1, tau_bar2, t);
    const double tau1 = tau_bar1 * t, tau2 = tau_bar2 * t;
    const int d = flow.dim();
    if (lam.size() != d) throw std::invalid_argument("first_variation_check: lambda has wrong dimension");
    const LGeodesicResult geo = solve_min_lgeodesic(flow, x, tau1, y, tau2, opts);
    const LCurve& c = geo.curve;
    const Frame source = coordinate_frame(flow, tau1, c.points.front());
    const TransportMap tm = transport_frame(flow, geo, source, false);
    const Vec hat1 = std::sqrt(d + 2.0) * (source.vectors * lam);
    const Vec hat2 = std::sqrt(d + 2.0) * (tm.transported * lam);
    const Vec dx = std::sqrt(2.0 * tau_bar1) * hat1;
    const Vec dy = std::sqrt(2.0 * tau_bar2) * hat2;

    SolveOptions probe_opts = opts;
    probe_opts.warm_start = geo.initial_z.v;
    const LambdaProbe probe{flow, tau1, tau2, c.points.front(), c.points.back(), probe_opts};
    auto central = [&](double h) { return (probe(h * dx, h * dy) - probe(-h * dx, -h * dy)) / (2.0 * h); };
    const double coarse = central(1e-3);
    const double fine = central(5e-4);

    const std::vector<Vec> vel = curve_velocity(c);
    const int n = c.segments();
    const Vec gdot1 = vel[0] / (2.0 * c.s[0]);
    const Vec gdot2 = vel[n] / (2.0 * c.s[n]);
    const double ip1 = flow.inner(c.points[0].x, tau1, hat1, gdot1);
    const double ip2 = flow.inner(c.points[n].x, tau2, hat2, gdot2);

    FirstVariationReport rep;
    rep.finite_difference = (4.0 * fine - coarse) / 3.0;
    rep.displayed = std::sqrt(2.0 * t) * (tau_bar2 * ip2 - tau_bar1 * ip1);
    rep.predicted = 2.0 * rep.displayed;
    rep.relative_error = std::abs(rep.finite_difference - rep.predicted) / std::max(std::abs(rep.predicted), 1e-6);
    return rep;
}

}  // namespace ricci
