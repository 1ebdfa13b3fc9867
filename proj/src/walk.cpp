#include "ricci/walk.hpp"

#include <cmath>
#include <sstream>

namespace ricci {

namespace {

double frame_error(const FlowManifold& flow, const Frame& f) {
    const Mat g = f.vectors.transpose() * flow.metric(f.base.x.x, f.base.tau) * f.vectors;
    return (g - Mat::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

void WalkConfig::validate() const {
    if (!flow) throw ConfigError("walk: no flow given");
    if (!(tau_bar1 >= 0.0 && tau_bar1 < tau_bar2)) throw ConfigError("walk: requires 0 <= tau_bar1 < tau_bar2");
    if (!(epsilon > 0.0)) throw ConfigError("walk: epsilon must be positive");
    if (max_steps < 0) throw ConfigError("walk: max_steps must be non-negative");
    const double big_t = flow->tau_max();
    const double slack = 1e-12 * (1.0 + big_t);
    if (s_start < 1.0 - 1e-12 || tau_bar2 * s_start > big_t + slack)
        throw ConfigError("walk: s_start must lie in [1, tau_max / tau_bar2]");
    if (tau_bar2 * (s_start + epsilon * epsilon * max_steps) > big_t + slack)
        throw ConfigError("walk: tau_bar2 * (s_start + epsilon^2 * max_steps) exceeds tau_max");
    if (tau_bar1 * s_start < flow->tau_min() - slack)
        throw ConfigError("walk: tau_bar1 * s_start lies before tau_min");
    try {
        flow->validate(x0);
        flow->validate(y0);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("walk: ") + e.what());
    }
}

double WalkConfig::time(int n) const {
    return std::min(s_start + epsilon * epsilon * n, flow->tau_max() / tau_bar2);
}

double theta_floor(const FlowManifold& flow, double tau_bar1, double tau_bar2, double t) {
    const double d = flow.dim();
    const double tau1 = tau_bar1 * t, tau2 = tau_bar2 * t;
    const double gap = std::sqrt(tau2) - std::sqrt(tau1);
    const double shift = (2.0 / 3.0) * d * flow.curvature_bound() * (std::pow(tau2, 1.5) - std::pow(tau1, 1.5));
    return -2.0 * d * gap * gap - 2.0 * gap * shift;
}

std::optional<LGeodesicResult> solve_with_retry(const FlowManifold& flow, const ChartPoint& x, double tau1,
                                                const ChartPoint& y, double tau2, const SolveOptions& opts,
                                                bool* retried) {
    if (retried) *retried = false;
    try {
        return solve_min_lgeodesic(flow, x, tau1, y, tau2, opts);
    } catch (const SolverError&) {
    }
    if (retried) *retried = true;
    SolveOptions fallback = opts;
    fallback.warm_start.reset();
    fallback.polyline_only = true;
    fallback.method = SolveMethod::Numeric;
    try {
        return solve_min_lgeodesic(flow, x, tau1, y, tau2, fallback);
    } catch (const SolverError&) {
    }
    return std::nullopt;
}

StepOutcome coupled_step(const WalkState& state, const Vec& lam, const WalkConfig& cfg) {
    if (!state.geodesic) throw std::invalid_argument("coupled_step: state has no geodesic");
    const FlowManifold& flow = *cfg.flow;
    const LGeodesicResult& geo = *state.geodesic;
    const LCurve& c = geo.curve;
    const int d = flow.dim();
    const double t = state.t;
    const double tau1 = cfg.tau_bar1 * t, tau2 = cfg.tau_bar2 * t;
    const double root = std::sqrt(d + 2.0);

    const TransportMap tm = transport_frame(flow, geo, state.frame_x, false);
    const Vec hat1 = root * (state.frame_x.vectors * lam);
    const Vec hat2_end = root * (tm.frame.vectors * lam);
    const ChartPoint& end = c.points.back();
    const Vec hat2 = end.chart == state.y.chart ? hat2_end : flow.push_vector(end, hat2_end, state.y.chart);
    const Vec dx = cfg.epsilon * std::sqrt(2.0 * cfg.tau_bar1) * hat1;
    const Vec dy = cfg.epsilon * std::sqrt(2.0 * cfg.tau_bar2) * hat2;

    StepOutcome out;
    const int n = c.segments();
    const Vec v1 = c.velocity.empty() ? finite_difference_velocity(c).front() : c.velocity.front();
    const Vec v2 = c.velocity.empty() ? finite_difference_velocity(c).back() : c.velocity.back();
    const double ip1 = flow.inner(c.points.front().x, tau1, hat1, v1 / (2.0 * c.s[0]));
    const double ip2 = flow.inner(end.x, tau2, hat2_end, v2 / (2.0 * c.s[n]));
    out.zeta = std::sqrt(2.0 * t) * (cfg.tau_bar2 * ip2 - cfg.tau_bar1 * ip1);
    if (cfg.tau_bar1 > 0.0) {
        const double nx = std::sqrt(flow.norm2(state.x.x, tau1, dx));
        const double ny = std::sqrt(flow.norm2(state.y.x, tau2, dy));
        out.increment_ratio_error = std::abs(ny - std::sqrt(cfg.tau_bar2 / cfg.tau_bar1) * nx);
    }
    out.transport_drift = tm.drift;
    if (cfg.record_sigma) out.sigma = sigma_direct(flow, cfg.tau_bar1, cfg.tau_bar2, t, geo, state.frame_x, lam);

    WalkState& nx = out.next;
    nx.n = state.n + 1;
    nx.t = cfg.time(nx.n);
    nx.x = cfg.tau_bar1 > 0.0 ? frozen_exp(flow, tau1, state.x, dx) : state.x;
    nx.y = frozen_exp(flow, tau2, state.y, dy);
    nx.frame_x = coordinate_frame(flow, cfg.tau_bar1 * nx.t, nx.x);
    return out;
}

WalkPath run_coupled_walk(const WalkConfig& cfg) {
    cfg.validate();
    const FlowManifold& flow = *cfg.flow;
    const int d = flow.dim();
    Rng rng(cfg.seed, cfg.replica);
    WalkPath path;
    WalkState state;
    state.t = cfg.time(0);
    state.x = flow.normalize(cfg.x0);
    state.y = flow.normalize(cfg.y0);
    state.frame_x = coordinate_frame(flow, cfg.tau_bar1 * state.t, state.x);
    std::optional<Vec> warm;
    int warm_chart = 0;
    std::optional<StepOutcome> last;
    for (int n = 0; n <= cfg.max_steps; ++n) {
        const double t = state.t;
        SolveOptions opts = cfg.solve;
        if (warm && warm_chart == state.x.chart) opts.warm_start = *warm;
        bool retried = false;
        std::optional<LGeodesicResult> geo;
        try {
            geo = solve_with_retry(flow, state.x, cfg.tau_bar1 * t, state.y, cfg.tau_bar2 * t, opts, &retried);
        } catch (const std::exception& e) {
            path.diagnostic = e.what();
        }
        ++path.solves;
        if (retried) ++path.retries;
        if (!geo) {
            std::ostringstream msg;
            msg << "L-geodesic solve failed at step " << n << " (t = " << t << ")";
            if (!path.diagnostic.empty()) msg << ": " << path.diagnostic;
            path.aborted = true;
            path.diagnostic = msg.str();
            break;
        }
        WalkRecord rec;
        rec.n = n;
        rec.t = t;
        rec.x = state.x;
        rec.y = state.y;
        rec.lambda = geo->action;
        rec.theta = theta_from_l(d, cfg.tau_bar1, cfg.tau_bar2, t, geo->action);
        const double floor = theta_floor(flow, cfg.tau_bar1, cfg.tau_bar2, t);
        rec.floor_ok = rec.theta >= floor - 1e-9 * (1.0 + std::abs(floor));
        rec.solver = geo->method + (retried ? "+retry" : "");
        rec.multiplicity = geo->multiplicity_hint;
        rec.frame_error = frame_error(flow, state.frame_x);
        if (last) {
            rec.has_step = true;
            rec.zeta = last->zeta;
            rec.increment_ratio_error = last->increment_ratio_error;
            rec.transport_drift = last->transport_drift;
            if (last->sigma) {
                rec.has_sigma = true;
                rec.sigma = *last->sigma;
            }
        }
        path.records.push_back(rec);
        if (n == cfg.max_steps) break;

        const Vec lam = sample_uniform_ball(d, rng);
        warm = geo->initial_z.v;
        warm_chart = geo->initial_z.base.x.chart;
        state.geodesic = std::move(geo);
        try {
            last = coupled_step(state, lam, cfg);
        } catch (const std::exception& e) {
            std::ostringstream msg;
            msg << "step " << n << " failed: " << e.what();
            path.aborted = true;
            path.diagnostic = msg.str();
            break;
        }
        state = last->next;
    }
    return path;
}

SinglePath run_single_walk(const FlowManifold& flow, double tau_bar, double s_start, double epsilon,
                           const ChartPoint& x0, std::uint64_t seed, int max_steps, std::uint64_t stream,
                           std::uint64_t substream) {
    if (!(tau_bar >= 0.0)) throw ConfigError("single walk: tau_bar must be non-negative");
    if (!(epsilon > 0.0)) throw ConfigError("single walk: epsilon must be positive");
    if (max_steps < 0) throw ConfigError("single walk: max_steps must be non-negative");
    const double big_t = flow.tau_max();
    if (tau_bar * (s_start + epsilon * epsilon * max_steps) > big_t + 1e-12 * (1.0 + big_t))
        throw ConfigError("single walk: tau_bar * (s_start + epsilon^2 * max_steps) exceeds tau_max");
    flow.validate(x0);
    const int d = flow.dim();
    const double root = std::sqrt(d + 2.0);
    Rng rng(seed, stream, substream);
    SinglePath out;
    ChartPoint x = flow.normalize(x0);
    for (int n = 0; n <= max_steps; ++n) {
        const double t = tau_bar > 0.0 ? std::min(s_start + epsilon * epsilon * n, big_t / tau_bar)
                                       : s_start + epsilon * epsilon * n;
        out.t.push_back(t);
        out.x.push_back(x);
        if (n == max_steps) break;
        const Vec lam = sample_uniform_ball(d, rng);
        if (tau_bar == 0.0) continue;
        const double tau = tau_bar * t;
        const Frame phi = coordinate_frame(flow, tau, x);
        x = frozen_exp(flow, tau, x, epsilon * std::sqrt(2.0 * tau_bar) * root * (phi.vectors * lam));
    }
    return out;
}

}  // namespace ricci
