#include "ricci/harness.hpp"

#include "parallel.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace ricci {

namespace {

struct Trial {
    bool skipped = false;
    double error = 0.0;
    double tolerance = 1.0;
};

Trial skip() {
    Trial t;
    t.skipped = true;
    return t;
}

// Worst of several error/tolerance pairs, by ratio.
Trial worst_of(std::initializer_list<Trial> parts) {
    Trial out{false, 0.0, 1.0};
    double ratio = -std::numeric_limits<double>::infinity();
    for (const Trial& p : parts) {
        if (p.skipped) continue;
        const double r = p.error / p.tolerance;
        if (r > ratio) {
            ratio = r;
            out = p;
        }
    }
    return out;
}

struct Sampler {
    const ExperimentSpec& spec;
    const FlowManifold& flow;
    Rng rng;

    double uniform(double a, double b) { return a + (b - a) * rng.uniform(); }

    ChartPoint point() {
        const int m = flow.sphere_dim();
        ChartPoint p;
        p.x = Vec::Zero(flow.dim());
        if (m > 0) {
            const Eigen::VectorXd b = sample_uniform_ball(m, rng);
            const double radius = flow.kind() == FlowKind::HyperbolicSpace ? 0.8 : 1.8;
            p.x.head(m) = radius * b;
            if (flow.curved_is_sphere()) p.chart = rng.uniform() < 0.5 ? 0 : 1;
        }
        for (int i = 0; i < flow.torus_dim(); ++i) p.x(m + i) = flow.periods()[i] * rng.uniform();
        return flow.normalize(p);
    }

    double tau() { return uniform(flow.tau_min(), flow.tau_max()); }

    // Interior time with room for a centered difference of relative width `margin`.
    double interior_tau(double margin) {
        const double lo = flow.tau_min() * (1.0 + margin) + margin;
        const double hi = flow.tau_max() * (1.0 - margin);
        return uniform(lo, hi);
    }

    double walk_time(double margin = 0.0) {
        double lo = spec.s_start;
        if (spec.tau_bar1 > 0.0) lo = std::max(lo, flow.tau_min() / spec.tau_bar1);
        const double hi = flow.tau_max() / spec.tau_bar2;
        return uniform(lo + margin * (hi - lo), hi - margin * (hi - lo));
    }

    Vec ball(int dim) {
        const Eigen::VectorXd b = sample_uniform_ball(dim, rng);
        return Vec(b);
    }

    Vec tangent(const ChartPoint& x, double tau, double curved_length) {
        const Frame phi = coordinate_frame(flow, tau, x);
        const int m = flow.sphere_dim();
        Vec a = Vec::Zero(flow.dim());
        if (m > 0) {
            Vec dir = ball(m);
            while (dir.norm() < 1e-3) dir = ball(m);
            a.head(m) = curved_length * dir / dir.norm();
        }
        for (int i = 0; i < flow.torus_dim(); ++i) {
            const double p = flow.periods()[i];
            a(m + i) = 0.9 * p * (rng.uniform() - 0.5);
        }
        return phi.vectors * a;
    }

    // Endpoint reached by a frozen geodesic that stays well inside the injectivity scale.
    ChartPoint partner(const ChartPoint& x, double tau) {
        double length = 0.0;
        if (flow.sphere_dim() > 0) {
            const double root = std::sqrt(flow.scale(tau));
            length = (flow.curved_is_sphere() ? 0.75 * M_PI : 1.5) * root * rng.uniform();
        }
        return frozen_exp(flow, tau, x, tangent(x, tau, length));
    }

    Mat random_frame_vectors() {
        const int d = flow.dim();
        Mat a(d, d);
        do {
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
        } while (std::abs(a.determinant()) < 1e-3);
        return a;
    }
};

double frame_error(const FlowManifold& flow, const Frame& f) {
    const Mat g = f.vectors.transpose() * flow.metric(f.base.x.x, f.base.tau) * f.vectors;
    return (g - Mat::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

// Richardson-extrapolated centered difference.
template <class F>
auto richardson(F&& f, double h) {
    using R = decltype(f(h));
    const R d1 = (f(h) - f(-h)) / (2.0 * h);
    const R d2 = (f(0.5 * h) - f(-0.5 * h)) / h;
    return R((4.0 * d2 - d1) / 3.0);
}

struct GeodesicCase {
    ChartPoint x;
    ChartPoint y;
    double t = 0.0;
    double tau1 = 0.0;
    double tau2 = 0.0;
    LGeodesicResult geo;
};

GeodesicCase geodesic_case(Sampler& s, double margin = 0.0) {
    GeodesicCase c;
    c.t = s.walk_time(margin);
    c.tau1 = s.spec.tau_bar1 * c.t;
    c.tau2 = s.spec.tau_bar2 * c.t;
    c.x = s.point();
    c.y = s.partner(c.x, c.tau2);
    c.geo = solve_min_lgeodesic(s.flow, c.x, c.tau1, c.y, c.tau2, s.spec.solve);
    return c;
}

Trial check_flow_equation(Sampler& s) {
    const FlowManifold& f = s.flow;
    const ChartPoint x = s.point();
    const double tau = s.interior_tau(1e-3);
    const double h = 1e-4 * (1.0 + tau);
    const Mat fd = richardson([&](double e) { return Mat(f.metric(x.x, tau + e)); }, h);
    const Mat ric2 = 2.0 * f.ricci(x.x, tau);
    const double scale = 1.0 + ric2.cwiseAbs().maxCoeff();
    return worst_of({{false, (fd - ric2).cwiseAbs().maxCoeff(), 1e-6 * scale},
                     {false, (f.metric_dtau(x.x, tau) - ric2).cwiseAbs().maxCoeff(), 1e-12 * scale}});
}

// dR/dtau = -Lap R - 2|Ric|^2, with the derivative taken analytically from the conformal scale.
Trial check_scalar_evolution_analytic(Sampler& s) {
    const FlowManifold& f = s.flow;
    const ChartPoint x = s.point();
    const double tau = s.tau();
    const CurvaturePack p = curvature_pack(f, {x, tau});
    const double dr = -p.scalar * f.scale_rate() / f.scale(tau);
    const double rhs = -p.lap_scalar - 2.0 * p.ric_norm2;
    return {false, std::abs(dr - rhs), 1e-8};
}

Trial check_scalar_evolution_fd(Sampler& s) {
    const FlowManifold& f = s.flow;
    const ChartPoint x = s.point();
    const double tau = s.interior_tau(1e-3);
    auto scalar_at = [&](double e) {
        const double t = tau + e;
        return (f.metric_inverse(x.x, t) * f.ricci(x.x, t)).trace();
    };
    const double dr = richardson(scalar_at, 1e-4 * (1.0 + tau));
    const CurvaturePack p = curvature_pack(f, {x, tau});
    return {false, std::abs(dr + p.lap_scalar + 2.0 * p.ric_norm2), 1e-6};
}

// Finite-difference covariant derivative of Ric against the pack, and div Ric = dR / 2.
Trial check_bianchi(Sampler& s) {
    const FlowManifold& f = s.flow;
    const ChartPoint x = s.point();
    const double tau = s.tau();
    const int d = f.dim();
    const CurvaturePack p = curvature_pack(f, {x, tau});
    const Christoffel gam = f.christoffel(x.x);
    const double h = 1e-3;
    std::vector<Mat> dric(d);
    Vec dscalar(d);
    for (int k = 0; k < d; ++k) {
        auto ric_at = [&](double e) {
            Vec u = x.x;
            u(k) += e;
            return Mat(f.ricci(u, tau));
        };
        auto scalar_at = [&](double e) {
            Vec u = x.x;
            u(k) += e;
            return (f.metric_inverse(u, tau) * f.ricci(u, tau)).trace();
        };
        dric[k] = richardson(ric_at, h);
        dscalar(k) = richardson(scalar_at, h);
    }
    double cov_err = 0.0, scale = 1.0;
    Vec div = Vec::Zero(d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) {
                double v = dric[k](i, j);
                scale = std::max(scale, std::abs(v));
                for (int l = 0; l < d; ++l)
                    v -= gam.gamma[l](k, i) * p.ric(l, j) + gam.gamma[l](k, j) * p.ric(i, l);
                cov_err = std::max(cov_err, std::abs(v - p.nabla_ric(i, j, k)));
                div(j) += p.g_inv(i, k) * v;
            }
    const double bianchi = (div - 0.5 * dscalar).cwiseAbs().maxCoeff();
    return worst_of({{false, cov_err, 1e-7 * scale}, {false, bianchi, 1e-7 * scale}});
}

Trial check_riemann_symmetries(Sampler& s) {
    const FlowManifold& f = s.flow;
    const ChartPoint x = s.point();
    const double tau = s.tau();
    const CurvaturePack p = curvature_pack(f, {x, tau});
    const int d = p.dim;
    double scale = 1.0, sym = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l) {
                    const double r = p.riemann(i, j, k, l);
                    scale = std::max(scale, std::abs(r));
                    sym = std::max(sym, std::abs(r + p.riemann(j, i, k, l)));
                    sym = std::max(sym, std::abs(r + p.riemann(i, j, l, k)));
                    sym = std::max(sym, std::abs(r - p.riemann(k, l, i, j)));
                    sym = std::max(sym, std::abs(r + p.riemann(j, k, i, l) + p.riemann(k, i, j, l)));
                }
    Mat ric = Mat::Zero(d, d);
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
            for (int i = 0; i < d; ++i)
                for (int l = 0; l < d; ++l) ric(j, k) += p.g_inv(i, l) * p.riemann(i, j, l, k);
    const double ric_err = (ric - p.ric).cwiseAbs().maxCoeff();
    const double scalar_err = std::abs((p.g_inv * p.ric).trace() - p.scalar);
    const double sharp_err = (p.g_inv * p.ric - p.ric_sharp).cwiseAbs().maxCoeff();
    const double norm_err = std::abs((p.ric_sharp * p.ric_sharp).trace() - p.ric_norm2);
    const double tol = 1e-10 * scale;
    return worst_of({{false, sym, tol}, {false, ric_err, tol}, {false, scalar_err, tol}, {false, sharp_err, tol},
                     {false, norm_err, tol}});
}

Trial check_curvature_bound(Sampler& s) {
    const FlowManifold& f = s.flow;
    const ChartPoint x = s.point();
    const double tau = s.tau();
    const CurvaturePack p = curvature_pack(f, {x, tau});
    const Mat e = coordinate_frame(f, tau, x).vectors;
    const int d = p.dim;
    double rm2 = 0.0;
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
            for (int c = 0; c < d; ++c)
                for (int g = 0; g < d; ++g) {
                    double v = 0.0;
                    for (int i = 0; i < d; ++i)
                        for (int j = 0; j < d; ++j)
                            for (int k = 0; k < d; ++k)
                                for (int l = 0; l < d; ++l)
                                    v += p.riemann(i, j, k, l) * e(i, a) * e(j, b) * e(k, c) * e(l, g);
                    rm2 += v * v;
                }
    const double c0 = f.curvature_bound();
    const double tol = 1e-12 * (1.0 + c0);
    return worst_of({{false, std::sqrt(rm2) - c0, tol}, {false, std::sqrt(p.ric_norm2) - c0, tol}});
}

Trial check_frozen_exp(Sampler& s) {
    const FlowManifold& f = s.flow;
    const ChartPoint x = s.point();
    const double tau = s.tau();
    double length = 0.0;
    if (f.sphere_dim() > 0) length = (f.curved_is_sphere() ? 0.75 * M_PI : 1.5) * std::sqrt(f.scale(tau)) * s.rng.uniform();
    const Vec v = s.tangent(x, tau, length);
    std::vector<double> speeds;
    const ChartPoint a = frozen_exp_rk4(f, tau, x, v, 512, &speeds);
    const ChartPoint b = frozen_exp(f, tau, x, v);
    double speed_err = 0.0;
    for (double sp : speeds) speed_err = std::max(speed_err, std::abs(sp - speeds.front()));
    const double dist = rho(f, tau, a, b);
    return worst_of({{false, speed_err, 1e-8 * (1.0 + speeds.front())}, {false, dist, 1e-8 * (1.0 + speeds.front())}});
}

Trial check_metric_comparison(Sampler& s) {
    const FlowManifold& f = s.flow;
    const ChartPoint x = s.point();
    double t1 = s.tau(), t2 = s.tau();
    if (t1 > t2) std::swap(t1, t2);
    const Vec v = s.ball(f.dim());
    const MetricBracket b = metric_comparison_bound(f, t1, t2, x, v);
    const double n1 = f.norm2(x.x, t1, v);
    const double tol = 1e-12 * (1.0 + n1);
    return worst_of({{false, b.lower - n1, tol}, {false, n1 - b.upper, tol}});
}

Trial check_transport_isometry(Sampler& s) {
    const GeodesicCase c = geodesic_case(s);
    const Frame src = gram_schmidt(s.flow, c.tau1, c.x, s.random_frame_vectors());
    const TransportMap tm = transport_frame(s.flow, c.geo, src);
    return worst_of({{false, tm.drift, 1e-7}, {false, frame_error(s.flow, tm.frame), 1e-9}});
}

Trial check_geodesic_bounds(Sampler& s) {
    const GeodesicCase c = geodesic_case(s);
    const BoundCheck& b = c.geo.bounds;
    const double tol = 1e-9 * (1.0 + std::abs(c.geo.action));
    return worst_of({{false, b.sandwich_lower - c.geo.action, tol},
                     {false, c.geo.action - b.sandwich_upper, tol},
                     {false, b.velocity_max - b.velocity_bound, 1e-9 * (1.0 + b.velocity_bound)}});
}

Trial check_round_trip(Sampler& s) {
    const GeodesicCase c = geodesic_case(s);
    const LCurve shot = shoot(s.flow, c.x, c.tau1, c.geo.initial_z.v, c.tau2, c.geo.curve.segments());
    const double miss = rho(s.flow, c.tau2, shot.points.back(), c.y);
    return {false, miss, 1e-6};
}

Trial check_closed_form(Sampler& s) {
    GeodesicCase c;
    c.t = s.walk_time();
    c.tau1 = s.spec.tau_bar1 * c.t;
    c.tau2 = s.spec.tau_bar2 * c.t;
    c.x = s.point();
    c.y = s.partner(c.x, c.tau2);
    SolveOptions numeric = s.spec.solve;
    numeric.method = SolveMethod::Numeric;
    const LGeodesicResult a = solve_min_lgeodesic(s.flow, c.x, c.tau1, c.y, c.tau2, numeric);
    const double b = closed_form_action(s.flow, c.x, c.tau1, c.y, c.tau2);
    const double curve = l_action(a.curve);
    return worst_of({{false, std::abs(a.action - b), 1e-6 * (1.0 + std::abs(b))},
                     {false, std::abs(curve - a.action), 1e-5 * (1.0 + std::abs(b))}});
}

Trial check_first_variation(Sampler& s) {
    const double t = s.walk_time(1e-3);
    const double tau2 = s.spec.tau_bar2 * t;
    const ChartPoint x = s.point();
    const ChartPoint y = s.partner(x, tau2);
    const Vec lam = s.ball(s.flow.dim());
    const FirstVariationReport r =
        first_variation_check(s.flow, s.spec.tau_bar1, s.spec.tau_bar2, t, x, y, lam, s.spec.solve);
    return {false, r.relative_error, 1e-3};
}

Trial check_dlambda_dt(Sampler& s) {
    GeodesicCase c = geodesic_case(s, 1e-3);
    const LambdaRate rate = dLambda_dt(s.flow, s.spec.tau_bar1, s.spec.tau_bar2, c.t, c.geo);
    SolveOptions warm = s.spec.solve;
    warm.warm_start = c.geo.initial_z.v;
    auto lambda_at = [&](double e) {
        const double t = c.t + e;
        return solve_min_lgeodesic(s.flow, c.x, s.spec.tau_bar1 * t, c.y, s.spec.tau_bar2 * t, warm).action;
    };
    const double fd = richardson(lambda_at, 1e-3 * c.t);
    const double ref = std::max(std::abs(rate.integral), 1e-6);
    return worst_of({{false, std::abs(rate.boundary - rate.integral), 1e-4 * ref},
                     {false, std::abs(fd - rate.integral), 1e-3 * ref}});
}

Trial check_dl_boundary(Sampler& s) {
    GeodesicCase c = geodesic_case(s, 1e-3);
    const EndpointDerivatives der = dL_boundary(s.flow, c.geo);
    SolveOptions warm = s.spec.solve;
    warm.warm_start = c.geo.initial_z.v;
    const double h1 = 1e-4 * c.tau1, h2 = 1e-4 * c.tau2;
    const double fd1 = richardson(
        [&](double e) { return solve_min_lgeodesic(s.flow, c.x, c.tau1 + e, c.y, c.tau2, warm).action; }, h1);
    const double fd2 = richardson(
        [&](double e) { return solve_min_lgeodesic(s.flow, c.x, c.tau1, c.y, c.tau2 + e, warm).action; }, h2);
    return worst_of({{false, std::abs(fd1 - der.d_tau1), 1e-4 * std::max(std::abs(der.d_tau1), 1e-3)},
                     {false, std::abs(fd2 - der.d_tau2), 1e-4 * std::max(std::abs(der.d_tau2), 1e-3)}});
}

Trial check_hessian(Sampler& s) {
    const double t = s.walk_time(1e-2);
    const double tau2 = s.spec.tau_bar2 * t;
    const ChartPoint x = s.point();
    const ChartPoint y = s.partner(x, tau2);
    const HessianReport r = hessian_bound_check(s.flow, s.spec.tau_bar1, s.spec.tau_bar2, t, x, y, s.spec.solve);
    if (r.multiplicity_hint > 1) return skip();
    const double tol_h = 1e-3 * (1.0 + std::abs(r.rhs));
    const double tol_c = 1e-3 * (1.0 + std::abs(r.combined_rhs));
    return worst_of({{false, r.lhs - r.rhs, tol_h}, {false, r.combined_lhs - r.combined_rhs, tol_c}});
}

Trial check_sigma(Sampler& s) {
    const GeodesicCase c = geodesic_case(s);
    const Frame phi = coordinate_frame(s.flow, c.tau1, c.x);
    const SigmaForm sf = sigma_form(s.flow, s.spec.tau_bar1, s.spec.tau_bar2, c.t, c.geo, phi);
    const Vec lam = s.ball(s.flow.dim());
    const double direct = sigma_direct(s.flow, s.spec.tau_bar1, s.spec.tau_bar2, c.t, c.geo, phi, lam);
    const double quad = sf.evaluate(lam);
    return worst_of({{false, std::abs(direct - quad), 1e-6 * (1.0 + std::abs(quad))},
                     {false, sf.expectation() - sf.rhs, 1e-6 * (1.0 + std::abs(sf.rhs))}});
}

Trial check_walk_step(Sampler& s) {
    WalkConfig cfg;
    cfg.flow = &s.flow;
    cfg.tau_bar1 = s.spec.tau_bar1;
    cfg.tau_bar2 = s.spec.tau_bar2;
    cfg.epsilon = s.spec.epsilon;
    cfg.solve = s.spec.solve;
    const double hi = s.flow.tau_max() / s.spec.tau_bar2;
    const double t = std::min(s.walk_time(), hi - cfg.epsilon * cfg.epsilon);
    if (t < s.spec.s_start) return skip();
    cfg.s_start = t;
    WalkState st;
    st.t = t;
    st.x = s.point();
    st.y = s.partner(st.x, cfg.tau_bar2 * t);
    st.frame_x = coordinate_frame(s.flow, cfg.tau_bar1 * t, st.x);
    st.geodesic = solve_min_lgeodesic(s.flow, st.x, cfg.tau_bar1 * t, st.y, cfg.tau_bar2 * t, cfg.solve);
    const double th = theta_from_l(s.flow.dim(), cfg.tau_bar1, cfg.tau_bar2, t, st.geodesic->action);
    const double floor = theta_floor(s.flow, cfg.tau_bar1, cfg.tau_bar2, t);
    const StepOutcome o = coupled_step(st, s.ball(s.flow.dim()), cfg);
    return worst_of({{false, o.increment_ratio_error, 1e-8},
                     {false, frame_error(s.flow, o.next.frame_x), 1e-9},
                     {false, frame_error(s.flow, st.frame_x), 1e-9},
                     {false, floor - th, 1e-9 * (1.0 + std::abs(floor))}});
}

Trial check_ball_sampler(Sampler& s) {
    const int d = s.flow.dim();
    const int n = 2000;
    std::vector<double> r2;
    double max_norm = 0.0;
    for (int k = 0; k < n; ++k) {
        const Eigen::VectorXd b = sample_uniform_ball(d, s.rng);
        r2.push_back(b.squaredNorm());
        max_norm = std::max(max_norm, b.norm());
    }
    const MeanSe ms = mean_se(r2);
    const double expected = static_cast<double>(d) / (d + 2.0);
    return worst_of({{false, std::abs(ms.mean - expected), 5.0 * ms.se}, {false, max_norm - 1.0, 1e-15}});
}

struct NamedCheck {
    const char* name;
    double tolerance;
    std::function<Trial(Sampler&)> run;
};

const std::vector<NamedCheck>& battery() {
    static const std::vector<NamedCheck> checks = {
        {"flow_equation", 1e-6, check_flow_equation},
        {"scalar_evolution_analytic", 1e-8, check_scalar_evolution_analytic},
        {"scalar_evolution_fd", 1e-6, check_scalar_evolution_fd},
        {"contracted_bianchi", 1e-7, check_bianchi},
        {"riemann_symmetries", 1e-10, check_riemann_symmetries},
        {"curvature_bound", 1e-12, check_curvature_bound},
        {"frozen_exp", 1e-8, check_frozen_exp},
        {"metric_comparison", 1e-12, check_metric_comparison},
        {"transport_isometry", 1e-7, check_transport_isometry},
        {"geodesic_bounds", 1e-9, check_geodesic_bounds},
        {"shoot_round_trip", 1e-6, check_round_trip},
        {"closed_form_agreement", 1e-6, check_closed_form},
        {"first_variation", 1e-3, check_first_variation},
        {"dlambda_dt", 1e-3, check_dlambda_dt},
        {"dl_boundary", 1e-4, check_dl_boundary},
        {"hessian_bound", 1e-3, check_hessian},
        {"sigma_form", 1e-6, check_sigma},
        {"walk_step", 1e-8, check_walk_step},
        {"ball_sampler", 5.0, check_ball_sampler},
    };
    return checks;
}

}  // namespace

ExperimentReport experiment_identity_suite(const ExperimentSpec& spec) {
    if (spec.kind != ExperimentKind::IdentitySuite)
        throw ConfigError("experiment kind is " + to_string(spec.kind) + ", expected identity_suite");
    if (spec.trials < 0) throw ConfigError("trials must be non-negative");
    ExperimentReport report;
    report.experiment = to_string(spec.kind);
    report.flow = to_string(spec.flow.kind());
    if (spec.trials == 0) {
        report.asserted = false;
        return report;
    }
    const auto& checks = battery();
    const int n_checks = static_cast<int>(checks.size());
    const int total = n_checks * spec.trials;
    const long audit_before = bound_audit().sandwich_violations + bound_audit().velocity_violations;
    std::vector<Trial> trials(total);
    std::vector<std::string> errors(total);
    detail::parallel_for(total, spec.workers, [&](int idx) {
        const int c = idx / spec.trials, k = idx % spec.trials;
        Sampler sampler{spec, spec.flow, Rng(spec.seed, 1000 + static_cast<std::uint64_t>(c),
                                             static_cast<std::uint64_t>(k))};
        try {
            trials[idx] = checks[c].run(sampler);
        } catch (const std::exception& e) {
            trials[idx] = Trial{false, std::numeric_limits<double>::infinity(), 1.0};
            errors[idx] = e.what();
        }
    });
    for (int c = 0; c < n_checks; ++c) {
        CheckResult r;
        r.name = checks[c].name;
        r.tolerance = checks[c].tolerance;
        r.worst = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < spec.trials; ++k) {
            const int idx = c * spec.trials + k;
            const Trial& t = trials[idx];
            if (!errors[idx].empty())
                report.notes.push_back(r.name + " trial " + std::to_string(k) + ": " + errors[idx]);
            if (t.skipped) {
                ++r.skipped;
                continue;
            }
            ++r.trials;
            const double ratio = t.error / t.tolerance;
            r.worst = std::max(r.worst, ratio);
            if (ratio <= 1.0) ++r.passed;
        }
        if (r.trials == 0) r.worst = 0.0;
        r.pass = r.passed == r.trials;
        report.pass = report.pass && r.pass;
        report.checks.push_back(r);
    }
    report.diagnostics["trials"] = spec.trials;
    report.diagnostics["checks"] = n_checks;
    report.diagnostics["bound_violations"] = static_cast<double>(
        bound_audit().sandwich_violations + bound_audit().velocity_violations - audit_before);
    return report;
}

}  // namespace ricci
