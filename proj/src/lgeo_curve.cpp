#include "ricci/lgeo.hpp"

#include "lgeo_internal.hpp"
#include "numerics.hpp"

#include <cmath>
#include <limits>

namespace ricci {

std::string to_string(SolveMethod m) {
    switch (m) {
    case SolveMethod::Auto: return "auto";
    case SolveMethod::Numeric: return "numeric";
    case SolveMethod::ClosedForm: return "closed_form";
    }
    return "auto";
}

SolveMethod solve_method_from_string(const std::string& name) {
    if (name == "auto") return SolveMethod::Auto;
    if (name == "numeric") return SolveMethod::Numeric;
    if (name == "closed_form") return SolveMethod::ClosedForm;
    throw ConfigError("unknown solve method '" + name + "'");
}

BoundAudit& bound_audit() {
    static BoundAudit audit;
    return audit;
}

VelocityConstants velocity_constants(const FlowManifold& flow, double tau1, double tau2) {
    const double c0 = flow.curvature_bound();
    const double d = flow.dim();
    const double big_t = flow.tau_max();
    // d/dtau (tau|γ'|²) = -2Ric(V,V) + sqrt(tau)<∇R,V> with V = sqrt(tau)γ'.
    const double grad_r = d * flow.gradient_bound();
    const double a = 2.0 * c0 + 0.5 * std::sqrt(big_t) * grad_r;
    const double b = 0.5 * std::sqrt(big_t) * grad_r;
    const double dt = tau2 - tau1;
    VelocityConstants k;
    k.c1 = std::exp(a * dt);
    k.C1 = a > 0.0 ? (b / a) * std::expm1(a * dt) : b * dt;
    const double ds = std::sqrt(tau2) - std::sqrt(tau1);
    const double d32 = std::pow(tau2, 1.5) - std::pow(tau1, 1.5);
    k.c2 = k.c1 * std::exp(2.0 * c0 * dt) / (4.0 * ds * ds);
    k.C2 = k.c1 * (2.0 / 3.0) * d * c0 * d32 / ds + k.C1;
    return k;
}

std::pair<double, double> sandwich_bounds(const FlowManifold& flow, double tau1, double tau2, double rho_T) {
    const double c0 = flow.curvature_bound();
    const double d = flow.dim();
    const double dt = tau2 - tau1;
    const double ds = std::sqrt(tau2) - std::sqrt(tau1);
    const double base = rho_T * rho_T / (2.0 * ds);
    const double shift = (2.0 / 3.0) * d * c0 * (std::pow(tau2, 1.5) - std::pow(tau1, 1.5));
    return {std::exp(-2.0 * c0 * dt) * base - shift, std::exp(2.0 * c0 * dt) * base + shift};
}

BoundCheck check_bounds(const FlowManifold& flow, const LCurve& curve, double action, const ChartPoint& x,
                        const ChartPoint& y) {
    BoundCheck b;
    b.rho_T = rho(flow, flow.tau_max(), x, y);
    const auto [lo, hi] = sandwich_bounds(flow, curve.tau1, curve.tau2, b.rho_T);
    b.sandwich_lower = lo;
    b.sandwich_upper = hi;
    const double tol = 1e-9 * (1.0 + std::abs(action));
    b.sandwich_ok = action >= lo - tol && action <= hi + tol;
    const std::vector<Vec> vel = curve.velocity.empty() ? finite_difference_velocity(curve) : curve.velocity;
    double vmax = 0.0;
    for (std::size_t k = 0; k < vel.size(); ++k) {
        const double s = curve.s[k];
        vmax = std::max(vmax, 0.25 * flow.norm2(curve.points[k].x, s * s, vel[k]));
    }
    const VelocityConstants kc = velocity_constants(flow, curve.tau1, curve.tau2);
    b.velocity_max = vmax;
    b.velocity_bound = kc.c2 * b.rho_T * b.rho_T + kc.C2;
    b.velocity_ok = vmax <= b.velocity_bound + 1e-9 * (1.0 + b.velocity_bound);
    BoundAudit& audit = bound_audit();
    audit.solved.fetch_add(1, std::memory_order_relaxed);
    if (!b.sandwich_ok) audit.sandwich_violations.fetch_add(1, std::memory_order_relaxed);
    if (!b.velocity_ok) audit.velocity_violations.fetch_add(1, std::memory_order_relaxed);
    return b;
}

std::vector<Vec> finite_difference_velocity(const LCurve& curve) {
    const FlowManifold& flow = *curve.flow;
    const int n = curve.segments();
    const double h = curve.s[1] - curve.s[0];
    std::vector<Vec> out(curve.points.size());
    for (int k = 0; k <= n; ++k) {
        const ChartPoint& ref = curve.points[k];
        auto at = [&](int j) { return flow.coords_near(curve.points[j], ref); };
        Vec v;
        if (n < 4) {
            // Too short for the wide stencil; second order is all we can do.
            if (k == 0) v = (at(1) - ref.x) / h;
            else if (k == n) v = (ref.x - at(n - 1)) / h;
            else v = (at(k + 1) - at(k - 1)) / (2.0 * h);
        } else if (k == 0) {
            v = (-25.0 * ref.x + 48.0 * at(1) - 36.0 * at(2) + 16.0 * at(3) - 3.0 * at(4)) / (12.0 * h);
        } else if (k == 1) {
            v = (-3.0 * at(0) - 10.0 * ref.x + 18.0 * at(2) - 6.0 * at(3) + at(4)) / (12.0 * h);
        } else if (k == n - 1) {
            v = (3.0 * at(n) + 10.0 * ref.x - 18.0 * at(n - 2) + 6.0 * at(n - 3) - at(n - 4)) / (12.0 * h);
        } else if (k == n) {
            v = (25.0 * ref.x - 48.0 * at(n - 1) + 36.0 * at(n - 2) - 16.0 * at(n - 3) + 3.0 * at(n - 4)) /
                (12.0 * h);
        } else {
            v = (-at(k + 2) + 8.0 * at(k + 1) - 8.0 * at(k - 1) + at(k - 2)) / (12.0 * h);
        }
        out[k] = v;
    }
    return out;
}

double l_action(const LCurve& curve) {
    if (!curve.flow) throw std::invalid_argument("l_action: curve has no flow");
    const FlowManifold& flow = *curve.flow;
    const int n = curve.segments();
    if (n < 1) throw std::invalid_argument("l_action: curve needs at least two nodes");
    const std::vector<Vec> vel = finite_difference_velocity(curve);
    std::vector<double> f(n + 1);
    for (int k = 0; k <= n; ++k) {
        const double s = curve.s[k];
        const double tau = s * s;
        f[k] = 0.5 * flow.norm2(curve.points[k].x, tau, vel[k]) + 2.0 * tau * flow.scalar(tau);
    }
    return detail::simpson(f, curve.s[1] - curve.s[0]);
}

namespace detail {

ShotEnd integrate_lgeodesic(const FlowManifold& flow, const ChartPoint& x, double tau1, double tau2,
                            const Vec& p0, int grid, LCurve* record) {
    const double s1 = std::sqrt(tau1), s2 = std::sqrt(tau2);
    const double h = (s2 - s1) / grid;
    const bool hyperbolic = flow.kind() == FlowKind::HyperbolicSpace;
    const int m = flow.sphere_dim();
    // On every model Ric♯ is a multiple of the identity on the curved block and ∇R = 0.
    const double rate = flow.scale_rate();
    auto rhs = [&](double s, const Vec& u, const Vec& p, Vec& dp, double& da) {
        const double tau = s * s;
        dp = flow.gamma_contract(u, p, p);
        dp = -dp;
        if (m > 0) dp.head(m) -= (4.0 * s * 0.5 * rate / flow.scale(tau)) * p.head(m);
        da = 0.5 * flow.norm2(u, tau, p) + 2.0 * tau * flow.scalar(tau);
    };
    ShotEnd st;
    st.end = flow.normalize(x);
    st.velocity = p0;
    if (record) {
        record->flow = &flow;
        record->tau1 = tau1;
        record->tau2 = tau2;
        record->s.resize(grid + 1);
        record->points.resize(grid + 1);
        record->velocity.resize(grid + 1);
        for (int k = 0; k <= grid; ++k) record->s[k] = s1 + h * k;
        record->s[grid] = s2;
        record->points[0] = st.end;
        record->velocity[0] = st.velocity;
    }
    for (int k = 0; k < grid; ++k) {
        const double s = s1 + h * k;
        const Vec u = st.end.x;
        const Vec p1 = st.velocity;
        Vec q1, q2, q3, q4;
        double a1, a2, a3, a4;
        rhs(s, u, p1, q1, a1);
        const Vec p2 = p1 + 0.5 * h * q1;
        rhs(s + 0.5 * h, u + 0.5 * h * p1, p2, q2, a2);
        const Vec p3 = p1 + 0.5 * h * q2;
        rhs(s + 0.5 * h, u + 0.5 * h * p2, p3, q3, a3);
        const Vec p4 = p1 + h * q3;
        rhs(s + h, u + h * p3, p4, q4, a4);
        st.end.x = u + (h / 6.0) * (p1 + 2.0 * p2 + 2.0 * p3 + p4);
        st.velocity = p1 + (h / 6.0) * (q1 + 2.0 * q2 + 2.0 * q3 + q4);
        st.action += (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
        if (!(st.velocity.norm() <= 1e6) || !std::isfinite(st.end.x.norm())) return st;
        if (hyperbolic && st.end.x.head(m).squaredNorm() >= 1.0) return st;
        const ChartPoint nx = flow.normalize(st.end);
        if (nx.chart != st.end.chart) st.velocity = flow.push_vector(st.end, st.velocity, nx.chart);
        st.end = nx;
        if (record) {
            record->points[k + 1] = st.end;
            record->velocity[k + 1] = st.velocity;
        }
    }
    st.ok = true;
    return st;
}

}  // namespace detail

LCurve shoot(const FlowManifold& flow, const ChartPoint& x, double tau1, const Vec& z, double tau2, int grid,
             double* action) {
    if (grid < 16) throw std::invalid_argument("shoot: grid must have at least 16 segments");
    if (!(tau2 > tau1)) throw std::invalid_argument("shoot: requires tau1 < tau2");
    flow.check_time(tau1);
    flow.check_time(tau2);
    flow.validate(x);
    if (z.size() != flow.dim()) throw std::invalid_argument("shoot: Z has wrong dimension");
    for (int i = 0; i < z.size(); ++i)
        if (!std::isfinite(z(i))) throw std::invalid_argument("shoot: Z must be finite");
    LCurve c;
    const detail::ShotEnd st = detail::integrate_lgeodesic(flow, x, tau1, tau2, 2.0 * z, grid, &c);
    if (!st.ok) throw SolverError("shoot: velocity blow-up or chart exit");
    if (action) *action = st.action;
    return c;
}

double theta_from_l(int dim, double tau_bar1, double tau_bar2, double t, double l) {
    const double gap = std::sqrt(tau_bar2 * t) - std::sqrt(tau_bar1 * t);
    return 2.0 * gap * l - 2.0 * dim * gap * gap;
}

double theta(const FlowManifold& flow, double tau_bar1, double tau_bar2, double t, const ChartPoint& x,
             const ChartPoint& y, const SolveOptions& opts) {
    if (!(tau_bar1 < tau_bar2)) throw std::invalid_argument("theta: requires tau_bar1 < tau_bar2");
    const double l = l_distance(flow, x, tau_bar1 * t, y, tau_bar2 * t, opts);
    return theta_from_l(flow.dim(), tau_bar1, tau_bar2, t, l);
}

}  // namespace ricci
