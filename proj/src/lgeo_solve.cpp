#include "ricci/lgeo.hpp"

#include "geometry_internal.hpp"
#include "lgeo_internal.hpp"
#include "numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ricci {

namespace {

using detail::wrap_centered;

constexpr double kPi = 3.14159265358979323846;

// Arc of the frozen curved factor through two points, in embedding coordinates:
// E(phi) = cos(phi) e1 + sin(phi) dir on the sphere, cosh/sinh on the hyperboloid.
struct CurvedArc {
    Eigen::VectorXd e1;
    Eigen::VectorXd dir;
    double angle = 0.0;
    bool hyperbolic = false;

    Eigen::VectorXd point(double phi) const {
        if (hyperbolic) return std::cosh(phi) * e1 + std::sinh(phi) * dir;
        return std::cos(phi) * e1 + std::sin(phi) * dir;
    }
    Eigen::VectorXd tangent(double phi) const {
        if (hyperbolic) return std::sinh(phi) * e1 + std::cosh(phi) * dir;
        return -std::sin(phi) * e1 + std::cos(phi) * dir;
    }
};

Eigen::VectorXd fallback_direction(const Eigen::VectorXd& e1) {
    int axis = 0;
    for (int j = 1; j < e1.size(); ++j)
        if (std::abs(e1(j)) < std::abs(e1(axis))) axis = j;
    Eigen::VectorXd t = -e1(axis) * e1;
    t(axis) += 1.0;
    return t / t.norm();
}

CurvedArc curved_arc(const FlowManifold& flow, const ChartPoint& x, const ChartPoint& y) {
    const int m = flow.sphere_dim();
    CurvedArc arc;
    arc.hyperbolic = flow.kind() == FlowKind::HyperbolicSpace;
    arc.e1 = flow.embed_curved(x);
    const Eigen::VectorXd e2 = flow.embed_curved(y);
    arc.dir = Eigen::VectorXd::Zero(m + 1);
    if (arc.hyperbolic) {
        const Vec u = x.x.head(m), v = y.x.head(m);
        const double arg = (u - v).norm() / std::sqrt((1.0 - u.squaredNorm()) * (1.0 - v.squaredNorm()));
        arc.angle = 2.0 * std::asinh(arg);
        const double sh = std::sinh(arc.angle);
        if (sh > 0.0) arc.dir = (e2 - std::cosh(arc.angle) * arc.e1) / sh;
    } else {
        arc.angle = 2.0 * std::atan2((arc.e1 - e2).norm(), (arc.e1 + e2).norm());
        const Eigen::VectorXd t = e2 - arc.e1.dot(e2) * arc.e1;
        const double tn = t.norm();
        if (tn > 1e-9 || (tn > 0.0 && arc.angle < 0.5 * kPi)) arc.dir = t / tn;
        else arc.dir = fallback_direction(arc.e1);
    }
    return arc;
}

// Orthonormal complement of span{e1, dir} in the sphere's ambient space.
std::vector<Eigen::VectorXd> arc_normals(const CurvedArc& arc) {
    const int n = static_cast<int>(arc.e1.size());
    std::vector<Eigen::VectorXd> basis = {arc.e1, arc.dir};
    std::vector<Eigen::VectorXd> out;
    for (int j = 0; j < n && static_cast<int>(out.size()) < n - 2; ++j) {
        Eigen::VectorXd v = Eigen::VectorXd::Unit(n, j);
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& b : basis) v -= b * b.dot(v);
        const double vn = v.norm();
        if (vn < 1e-6) continue;
        v /= vn;
        basis.push_back(v);
        out.push_back(v);
    }
    return out;
}

std::vector<double> s_grid(double tau1, double tau2, int grid) {
    const double s1 = std::sqrt(tau1), s2 = std::sqrt(tau2);
    const double h = (s2 - s1) / grid;
    std::vector<double> s(grid + 1);
    for (int k = 0; k <= grid; ++k) s[k] = s1 + h * k;
    s[grid] = s2;
    return s;
}

double scalar_integral(const FlowManifold& flow, double s1, double s2) {
    if (!flow.has_curved_factor()) return 0.0;
    return detail::gauss_legendre([&](double s) { return 2.0 * s * s * flow.scalar(s * s); }, s1, s2, 64);
}

void check_endpoints(const FlowManifold& flow, const ChartPoint& x, double tau1, const ChartPoint& y, double tau2,
                     int grid) {
    if (grid < 16) throw std::invalid_argument("L-geodesic grid must have at least 16 segments");
    if (!(tau1 < tau2)) throw std::invalid_argument("L-geodesic requires tau1 < tau2");
    flow.check_time(tau1);
    flow.check_time(tau2);
    flow.validate(x);
    flow.validate(y);
}

int torus_tie_count(const FlowManifold& flow, const ChartPoint& x, const ChartPoint& y) {
    int count = 1;
    const int m = flow.sphere_dim();
    for (int i = 0; i < flow.torus_dim(); ++i) {
        const double p = flow.periods()[i];
        const double dx = std::abs(wrap_centered(y.x(m + i) - x.x(m + i), p));
        if (dx >= 0.5 * p - 1e-12 * p) count *= 2;
    }
    return count;
}

// ---------------------------------------------------------------------------
// Polyline phase

struct Polyline {
    std::vector<double> s;
    std::vector<ChartPoint> pts;
};

struct DiscreteEval {
    double value = 0.0;
    std::vector<Vec> grad;
    std::vector<Vec> stiffness;  // diag g(mid)/h per segment
};

// Midpoint rule for the kinetic part, trapezoid for the scalar part.
double discrete_action(const FlowManifold& flow, const Polyline& p, DiscreteEval* ev) {
    const int n = static_cast<int>(p.pts.size()) - 1;
    const int d = flow.dim();
    const int m = flow.sphere_dim();
    const bool hyperbolic = flow.kind() == FlowKind::HyperbolicSpace;
    if (hyperbolic)
        for (const auto& q : p.pts)
            if (q.x.head(m).squaredNorm() >= 1.0) return std::numeric_limits<double>::infinity();
    if (ev) {
        ev->grad.assign(n + 1, Vec::Zero(d));
        ev->stiffness.assign(n, Vec::Zero(d));
    }
    detail::KahanSum total;
    for (int k = 0; k < n; ++k) {
        const double h = p.s[k + 1] - p.s[k];
        const double sm = 0.5 * (p.s[k] + p.s[k + 1]);
        const double tau = sm * sm;
        const Vec a = p.pts[k].x;
        const Vec b = flow.coords_near(p.pts[k + 1], p.pts[k]);
        const Vec delta = b - a;
        const Vec mid = a + 0.5 * delta;
        if (hyperbolic && mid.head(m).squaredNorm() >= 1.0) return std::numeric_limits<double>::infinity();
        const Mat g = flow.metric(mid, tau);
        const Vec gd = g * delta;
        total.add(0.5 * delta.dot(gd) / h);
        if (ev) {
            const Vec q = flow.metric_gradient_quadratic(mid, tau, delta);
            ev->grad[k] += (-gd + 0.5 * q) / h;
            const Vec gb = (gd + 0.5 * q) / h;
            if (p.pts[k + 1].chart == p.pts[k].chart) ev->grad[k + 1] += gb;
            else ev->grad[k + 1] += flow.transition_jacobian(p.pts[k + 1], p.pts[k].chart).transpose() * gb;
            ev->stiffness[k] = g.diagonal() / h;
        }
    }
    if (flow.has_curved_factor()) {
        for (int k = 0; k <= n; ++k) {
            const double w = k == 0 ? 0.5 * (p.s[1] - p.s[0])
                                    : k == n ? 0.5 * (p.s[n] - p.s[n - 1]) : 0.5 * (p.s[k + 1] - p.s[k - 1]);
            const double tau = p.s[k] * p.s[k];
            total.add(w * 2.0 * tau * flow.scalar(tau));
            if (ev) ev->grad[k] += w * 2.0 * tau * (flow.metric(p.pts[k].x, tau) * flow.grad_scalar(p.pts[k].x, tau));
        }
    }
    const double value = total.value();
    if (ev) ev->value = value;
    return value;
}

// Thomas solve of the per-coordinate stiffness system on interior nodes.
std::vector<Vec> preconditioned_direction(const DiscreteEval& ev, int d) {
    const int n = static_cast<int>(ev.grad.size()) - 1;
    std::vector<Vec> dir(n + 1, Vec::Zero(d));
    const int unknowns = n - 1;
    if (unknowns < 1) return dir;
    std::vector<double> sub(unknowns), diag(unknowns), sup(unknowns), rhs(unknowns);
    for (int i = 0; i < d; ++i) {
        for (int k = 1; k <= n - 1; ++k) {
            const double cl = ev.stiffness[k - 1](i), cr = ev.stiffness[k](i);
            sub[k - 1] = -cl;
            diag[k - 1] = cl + cr;
            sup[k - 1] = -cr;
            rhs[k - 1] = -ev.grad[k](i);
        }
        for (int k = 1; k < unknowns; ++k) {
            const double w = sub[k] / diag[k - 1];
            diag[k] -= w * sup[k - 1];
            rhs[k] -= w * rhs[k - 1];
        }
        rhs[unknowns - 1] /= diag[unknowns - 1];
        for (int k = unknowns - 2; k >= 0; --k) rhs[k] = (rhs[k] - sup[k] * rhs[k + 1]) / diag[k];
        for (int k = 1; k <= n - 1; ++k) dir[k](i) = rhs[k - 1];
    }
    return dir;
}

struct DescentOutcome {
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

DescentOutcome descend(const FlowManifold& flow, Polyline& p, int max_iterations) {
    const int d = flow.dim();
    const int n = static_cast<int>(p.pts.size()) - 1;
    DescentOutcome out;
    DiscreteEval ev;
    double f = discrete_action(flow, p, &ev);
    if (!std::isfinite(f)) throw SolverError("polyline start leaves the model's domain");
    for (int it = 0; it < max_iterations; ++it) {
        const std::vector<Vec> dir = preconditioned_direction(ev, d);
        double slope = 0.0;
        for (int k = 1; k < n; ++k) slope += ev.grad[k].dot(dir[k]);
        if (!(slope < 0.0)) {
            out.converged = true;
            break;
        }
        double step = 1.0;
        bool accepted = false;
        Polyline trial = p;
        DiscreteEval tev;
        double ft = f;
        for (int ls = 0; ls < 40; ++ls) {
            for (int k = 1; k < n; ++k) {
                ChartPoint q = p.pts[k];
                q.x += step * dir[k];
                trial.pts[k] = flow.normalize(q);
            }
            ft = discrete_action(flow, trial, &tev);
            if (std::isfinite(ft) && ft <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        out.iterations = it + 1;
        if (!accepted) {
            out.converged = true;
            break;
        }
        const double decrease = f - ft;
        p = std::move(trial);
        ev = std::move(tev);
        f = ft;
        if (decrease <= 1e-15 * (1.0 + std::abs(f))) {
            out.converged = true;
            break;
        }
    }
    out.value = f;
    return out;
}

// Fraction of the curved sweep reached at each node when speed follows 1/scale(tau).
std::vector<double> curved_schedule(const FlowManifold& flow, const std::vector<double>& s) {
    const int n = static_cast<int>(s.size()) - 1;
    std::vector<double> cum(n + 1, 0.0);
    auto inv = [&](double sv) { return 1.0 / flow.scale(sv * sv); };
    for (int k = 0; k < n; ++k) cum[k + 1] = cum[k] + detail::gauss_legendre(inv, s[k], s[k + 1], 1);
    for (double& c : cum) c /= cum[n];
    return cum;
}

struct StartSpec {
    int arc = 0;  // sphere factor: 0 short arc, 1 long arc
    int torus_axis = -1;
    double torus_sign = 0.0;
    int bump = -1;  // curved-factor bump direction
    double bump_sign = 0.0;
    bool primary = true;
};

std::vector<StartSpec> start_set(const FlowManifold& flow) {
    std::vector<StartSpec> out;
    const int m = flow.sphere_dim();
    const int dt = flow.torus_dim();
    if (flow.curved_is_sphere()) {
        out.push_back({0});
        out.push_back({1});
    } else {
        out.push_back({});
    }
    for (int i = 0; i < dt; ++i)
        for (double sg : {1.0, -1.0}) out.push_back({0, i, sg, -1, 0.0, true});
    if (flow.kind() == FlowKind::RoundSphere)
        for (int j = 0; j < m - 1; ++j)
            for (double sg : {1.0, -1.0}) out.push_back({0, -1, 0.0, j, sg, false});
    if (flow.kind() == FlowKind::HyperbolicSpace)
        for (int j = 0; j < m; ++j)
            for (double sg : {1.0, -1.0}) out.push_back({0, -1, 0.0, j, sg, false});
    return out;
}

Polyline initial_polyline(const FlowManifold& flow, const ChartPoint& xs, const ChartPoint& ys,
                          const std::vector<double>& s, const StartSpec& spec) {
    const int d = flow.dim();
    const int m = flow.sphere_dim();
    const int n = static_cast<int>(s.size()) - 1;
    Polyline p;
    p.s = s;
    p.pts.resize(n + 1);
    Vec tdelta = Vec::Zero(d);
    for (int i = 0; i < flow.torus_dim(); ++i) {
        const double per = flow.periods()[i];
        tdelta(m + i) = wrap_centered(ys.x(m + i) - xs.x(m + i), per);
        if (spec.torus_axis == i) tdelta(m + i) += spec.torus_sign * per;
    }
    CurvedArc arc;
    std::vector<Eigen::VectorXd> normals;
    double sweep = 0.0;
    double bump_size = 0.0;
    if (m > 0) {
        arc = curved_arc(flow, xs, ys);
        sweep = spec.arc == 1 ? arc.angle - 2.0 * kPi : arc.angle;
        if (flow.curved_is_sphere() && spec.bump >= 0) normals = arc_normals(arc);
        if (arc.hyperbolic)
            bump_size = 0.5 * (1.0 - std::max(xs.x.head(m).norm(), ys.x.head(m).norm()));
    }
    const std::vector<double> sched = m > 0 ? curved_schedule(flow, s) : std::vector<double>();
    int chart = xs.chart;
    for (int k = 0; k <= n; ++k) {
        const double f = (s[k] - s[0]) / (s[n] - s[0]);
        ChartPoint q;
        q.chart = chart;
        q.x = xs.x + f * tdelta;
        if (m > 0) {
            Eigen::VectorXd e = arc.point(sched[k] * sweep);
            if (!arc.hyperbolic) {
                if (spec.bump >= 0 && spec.bump < static_cast<int>(normals.size()))
                    e += spec.bump_sign * 0.5 * std::sin(kPi * f) * normals[spec.bump];
                e /= e.norm();
            }
            q = detail::curved_from_embedding(flow, e, chart, q);
            if (arc.hyperbolic && spec.bump >= 0) {
                q.x(spec.bump) += spec.bump_sign * bump_size * std::sin(kPi * f);
                const double r = q.x.head(m).norm();
                if (r > 1.0 - 1e-3) q.x.head(m) *= (1.0 - 1e-3) / r;
            }
        }
        q = flow.normalize(q);
        chart = q.chart;
        p.pts[k] = q;
    }
    p.pts[0] = xs;
    p.pts[n] = ys;
    return p;
}

Vec z_from_polyline(const FlowManifold& flow, const Polyline& p) {
    const double h = p.s[1] - p.s[0];
    auto at = [&](int j) { return flow.coords_near(p.pts[j], p.pts[0]); };
    return 0.5 * (-25.0 * p.pts[0].x + 48.0 * at(1) - 36.0 * at(2) + 16.0 * at(3) - 3.0 * at(4)) / (12.0 * h);
}

// ---------------------------------------------------------------------------
// Shooting phase

struct NewtonOutcome {
    Vec z;
    double residual = std::numeric_limits<double>::infinity();
    double action = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct ShootProblem {
    const FlowManifold& flow;
    ChartPoint x;
    double tau1;
    ChartPoint y;
    double tau2;
    int grid;
    double residual_tol;
    int max_iterations;

    detail::ShotEnd fire(const Vec& z) const {
        return detail::integrate_lgeodesic(flow, x, tau1, tau2, 2.0 * z, grid, nullptr);
    }
    Vec residual(const detail::ShotEnd& st) const { return st.end.x - flow.coords_near(y, st.end); }
    double residual_norm(const detail::ShotEnd& st, const Vec& r) const {
        return std::sqrt(std::max(flow.norm2(st.end.x, tau2, r), 0.0));
    }
};

NewtonOutcome newton_shoot(const ShootProblem& pb, const Vec& z0) {
    const int d = pb.flow.dim();
    NewtonOutcome out;
    out.z = z0;
    for (int i = 0; i < d; ++i)
        if (!std::isfinite(z0(i))) return out;
    detail::ShotEnd shot = pb.fire(out.z);
    if (!shot.ok) return out;
    Vec r = pb.residual(shot);
    double rn = pb.residual_norm(shot, r);
    const double tight = 1e-11 * (1.0 + rho(pb.flow, pb.flow.tau_max(), pb.x, pb.y));
    Mat jac(d, d);
    bool have_jac = false;
    bool fresh = false;
    int it = 0;
    for (; it < pb.max_iterations; ++it) {
        if (rn <= tight) break;
        if (!have_jac) {
            const double hz = 1e-7 * std::max(1.0, out.z.cwiseAbs().maxCoeff());
            bool ok = true;
            for (int j = 0; j < d && ok; ++j) {
                Vec zp = out.z;
                zp(j) += hz;
                const detail::ShotEnd sj = pb.fire(zp);
                if (!sj.ok) {
                    ok = false;
                    break;
                }
                jac.col(j) = (pb.flow.coords_near(sj.end, shot.end) - shot.end.x) / hz;
            }
            if (!ok) break;
            have_jac = true;
            fresh = true;
        }
        const Vec delta = jac.fullPivLu().solve(-r);
        if (!std::isfinite(delta.norm())) break;
        double step = 1.0;
        bool accepted = false;
        detail::ShotEnd trial;
        Vec rt;
        double rtn = 0.0;
        for (int ls = 0; ls < 12; ++ls) {
            trial = pb.fire(out.z + step * delta);
            if (trial.ok) {
                rt = pb.residual(trial);
                rtn = pb.residual_norm(trial, rt);
                if (rtn < rn) {
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (fresh) break;
            have_jac = false;
            continue;
        }
        const Vec dz = step * delta;
        if (rtn > 0.5 * rn || trial.end.chart != shot.end.chart) {
            have_jac = false;
        } else {
            // Broyden rank-one secant update.
            const Vec dr = rt - r;
            jac += (dr - jac * dz) * dz.transpose() / dz.squaredNorm();
        }
        fresh = false;
        out.z += dz;
        shot = trial;
        r = rt;
        rn = rtn;
    }
    out.iterations = it;
    out.residual = rho(pb.flow, pb.flow.tau_max(), shot.end, pb.y);
    out.action = shot.action;
    out.converged = out.residual <= pb.residual_tol;
    return out;
}

struct Candidate {
    Vec z;
    double action = 0.0;
    double residual = 0.0;
    int newton_iterations = 0;
    int descent_iterations = 0;
};

bool lex_less(const Vec& a, const Vec& b) {
    for (int i = 0; i < a.size(); ++i) {
        if (std::abs(a(i) - b(i)) <= 1e-9 * (1.0 + std::abs(a(i)))) continue;
        return a(i) < b(i);
    }
    return false;
}

LGeodesicResult result_from_polyline(const FlowManifold& flow, const Polyline& p, double tau1, double tau2,
                                     const DescentOutcome& dsc) {
    LGeodesicResult res;
    res.curve.flow = &flow;
    res.curve.tau1 = tau1;
    res.curve.tau2 = tau2;
    res.curve.s = p.s;
    res.curve.points = p.pts;
    res.curve.velocity = finite_difference_velocity(res.curve);
    res.action = dsc.value;
    res.initial_z.base = {p.pts.front(), tau1};
    res.initial_z.v = 0.5 * res.curve.velocity.front();
    res.converged = dsc.converged;
    res.multiplicity_hint = 1;
    res.residual = 0.0;
    res.descent_iterations = dsc.iterations;
    res.method = "polyline";
    res.bounds = check_bounds(flow, res.curve, res.action, p.pts.front(), p.pts.back());
    return res;
}

}  // namespace

LGeodesicResult closed_form_lgeodesic(const FlowManifold& flow, const ChartPoint& x, double tau1,
                                      const ChartPoint& y, double tau2, int grid) {
    check_endpoints(flow, x, tau1, y, tau2, grid);
    const int d = flow.dim();
    const int m = flow.sphere_dim();
    const ChartPoint xs = flow.normalize(x), ys = flow.normalize(y);
    const std::vector<double> s = s_grid(tau1, tau2, grid);
    const double s1 = s.front(), s2 = s.back();
    const double ds = s2 - s1;

    Vec tdelta = Vec::Zero(d);
    double torus2 = 0.0;
    for (int i = 0; i < flow.torus_dim(); ++i) {
        tdelta(m + i) = wrap_centered(ys.x(m + i) - xs.x(m + i), flow.periods()[i]);
        torus2 += tdelta(m + i) * tdelta(m + i);
    }

    CurvedArc arc;
    std::vector<double> cum(grid + 1, 0.0);
    double ftotal = 1.0;
    int multiplicity = torus_tie_count(flow, xs, ys);
    if (m > 0) {
        arc = curved_arc(flow, xs, ys);
        auto inv = [&](double sv) { return 2.0 / flow.scale(sv * sv); };
        for (int k = 0; k < grid; ++k) cum[k + 1] = cum[k] + detail::gauss_legendre(inv, s[k], s[k + 1], 1);
        ftotal = cum[grid];
        if (!arc.hyperbolic && arc.angle > kPi - 1e-9) multiplicity *= 2;
    }

    LGeodesicResult res;
    LCurve& c = res.curve;
    c.flow = &flow;
    c.tau1 = tau1;
    c.tau2 = tau2;
    c.s = s;
    c.points.resize(grid + 1);
    c.velocity.resize(grid + 1);
    int chart = xs.chart;
    for (int k = 0; k <= grid; ++k) {
        const double f = (s[k] - s1) / ds;
        ChartPoint q;
        q.chart = chart;
        q.x = xs.x + f * tdelta;
        Eigen::VectorXd de;
        if (m > 0) {
            const double phi = arc.angle * cum[k] / ftotal;
            const double dphi = arc.angle * (2.0 / flow.scale(s[k] * s[k])) / ftotal;
            q = detail::curved_from_embedding(flow, arc.point(phi), chart, q);
            de = dphi * arc.tangent(phi);
        }
        q = flow.normalize(q);
        if (k == 0) q = xs;
        if (k == grid) q = ys;
        chart = q.chart;
        Vec v = tdelta / ds;
        if (m > 0) v.head(m) = detail::chart_vector_from_embedding(flow, q, de).head(m);
        c.points[k] = q;
        c.velocity[k] = v;
    }

    const double kinetic = (m > 0 ? arc.angle * arc.angle / ftotal : 0.0) + torus2 / (2.0 * ds);
    res.action = kinetic + scalar_integral(flow, s1, s2);
    res.initial_z.base = {xs, tau1};
    res.initial_z.v = 0.5 * c.velocity.front();
    res.converged = true;
    res.multiplicity_hint = multiplicity;
    res.residual = 0.0;
    res.method = "closed_form";
    res.bounds = check_bounds(flow, c, res.action, xs, ys);
    return res;
}

double closed_form_action(const FlowManifold& flow, const ChartPoint& x, double tau1, const ChartPoint& y,
                          double tau2) {
    check_endpoints(flow, x, tau1, y, tau2, 16);
    const int m = flow.sphere_dim();
    const double s1 = std::sqrt(tau1), s2 = std::sqrt(tau2);
    double torus2 = 0.0;
    for (int i = 0; i < flow.torus_dim(); ++i) {
        const double dx = wrap_centered(y.x(m + i) - x.x(m + i), flow.periods()[i]);
        torus2 += dx * dx;
    }
    double action = torus2 / (2.0 * (s2 - s1));
    if (m > 0) {
        const double angle = curved_arc(flow, flow.normalize(x), flow.normalize(y)).angle;
        const double ftotal =
            detail::gauss_legendre([&](double sv) { return 2.0 / flow.scale(sv * sv); }, s1, s2, 16);
        action += angle * angle / ftotal + scalar_integral(flow, s1, s2);
    }
    return action;
}

LGeodesicResult solve_min_lgeodesic(const FlowManifold& flow, const ChartPoint& x, double tau1,
                                    const ChartPoint& y, double tau2, const SolveOptions& opts) {
    check_endpoints(flow, x, tau1, y, tau2, opts.grid);
    SolveMethod method = opts.method;
    if (method == SolveMethod::Auto)
        method = flow.kind() == FlowKind::FlatTorus ? SolveMethod::ClosedForm : SolveMethod::Numeric;
    if (method == SolveMethod::ClosedForm) return closed_form_lgeodesic(flow, x, tau1, y, tau2, opts.grid);

    const ChartPoint xs = flow.normalize(x), ys = flow.normalize(y);
    const std::vector<StartSpec> starts = start_set(flow);

    if (opts.polyline_only) {
        const std::vector<double> s = s_grid(tau1, tau2, opts.grid);
        std::optional<Polyline> best;
        DescentOutcome best_out;
        for (const StartSpec& spec : starts) {
            Polyline p = initial_polyline(flow, xs, ys, s, spec);
            const DescentOutcome o = descend(flow, p, opts.descent_iterations);
            if (!best || o.value < best_out.value - 1e-12 * (1.0 + std::abs(best_out.value))) {
                best = std::move(p);
                best_out = o;
            }
        }
        return result_from_polyline(flow, *best, tau1, tau2, best_out);
    }

    const ShootProblem pb{flow, xs, tau1, ys, tau2, opts.grid, opts.residual_tol, opts.newton_iterations};
    std::vector<Candidate> found;
    int descent_total = 0;
    auto try_newton = [&](const Vec& z0, int descent_iterations) {
        const NewtonOutcome o = newton_shoot(pb, z0);
        if (!o.converged) return;
        found.push_back({o.z, o.action, o.residual, o.iterations, descent_iterations});
    };

    if (opts.warm_start) {
        if (opts.warm_start->size() != flow.dim()) throw std::invalid_argument("warm start has wrong dimension");
        // Primary initializers first, skipping those that would reproduce a known critical point or that
        // start far above the best action found; the warm guess is the fallback.
        const std::vector<double> s = s_grid(tau1, tau2, 64);
        struct Seed {
            Vec z;
            double action;
        };
        std::vector<Seed> seeds;
        for (const StartSpec& spec : starts) {
            if (!spec.primary) continue;
            const Polyline p = initial_polyline(flow, xs, ys, s, spec);
            seeds.push_back({z_from_polyline(flow, p), discrete_action(flow, p, nullptr)});
        }
        std::stable_sort(seeds.begin(), seeds.end(), [](const Seed& a, const Seed& b) { return a.action < b.action; });
        for (const Seed& sd : seeds) {
            if (!found.empty()) {
                double best = std::numeric_limits<double>::infinity();
                bool known = false;
                for (const Candidate& c : found) {
                    best = std::min(best, c.action);
                    if ((c.z - sd.z).norm() <= 1e-6 * (1.0 + c.z.norm())) known = true;
                }
                if (known || sd.action > best + 0.25 * (1.0 + std::abs(best))) continue;
            }
            try_newton(sd.z, 0);
        }
        if (found.empty()) try_newton(flow.push_vector(x, *opts.warm_start, xs.chart), 0);
    }
    if (found.empty()) {
        const std::vector<double> s = s_grid(tau1, tau2, std::min(opts.grid, 64));
        for (const StartSpec& spec : starts) {
            Polyline p = initial_polyline(flow, xs, ys, s, spec);
            const DescentOutcome o = descend(flow, p, opts.descent_iterations);
            descent_total += o.iterations;
            try_newton(z_from_polyline(flow, p), o.iterations);
        }
    }
    if (found.empty()) throw SolverError("L-geodesic solver: no start converged");

    double amin = std::numeric_limits<double>::infinity();
    for (const Candidate& c : found) amin = std::min(amin, c.action);
    const double tie = 1e-6 * (1.0 + std::abs(amin));
    std::vector<const Candidate*> near;
    for (const Candidate& c : found) {
        if (c.action > amin + tie) continue;
        bool dup = false;
        for (const Candidate* o : near)
            if ((o->z - c.z).norm() <= 1e-6 * (1.0 + c.z.norm())) dup = true;
        if (!dup) near.push_back(&c);
    }
    const Candidate* pick = near.front();
    for (const Candidate* c : near)
        if (lex_less(c->z, pick->z)) pick = c;

    LGeodesicResult res;
    const detail::ShotEnd st = detail::integrate_lgeodesic(flow, xs, tau1, tau2, 2.0 * pick->z, opts.grid, &res.curve);
    if (!st.ok) throw SolverError("L-geodesic solver: final shot failed");
    res.action = st.action;
    res.initial_z.base = {xs, tau1};
    res.initial_z.v = pick->z;
    res.residual = rho(flow, flow.tau_max(), st.end, ys);
    res.converged = res.residual <= opts.residual_tol;
    res.multiplicity_hint = static_cast<int>(near.size());
    res.descent_iterations = descent_total;
    res.newton_iterations = pick->newton_iterations;
    res.method = "numeric";
    res.bounds = check_bounds(flow, res.curve, res.action, xs, ys);
    return res;
}

double l_distance(const FlowManifold& flow, const ChartPoint& x, double tau1, const ChartPoint& y, double tau2,
                  const SolveOptions& opts) {
    const bool closed = opts.method == SolveMethod::ClosedForm ||
                        (opts.method == SolveMethod::Auto && flow.kind() == FlowKind::FlatTorus);
    if (closed) return closed_form_action(flow, x, tau1, y, tau2);
    return solve_min_lgeodesic(flow, x, tau1, y, tau2, opts).action;
}

}  // namespace ricci
