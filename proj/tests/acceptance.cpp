// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
// Usage: acceptance [criterion numbers...]; with no arguments every criterion runs.

#include "ricci/cli.hpp"
#include "ricci/harness.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace ricci;
namespace fs = std::filesystem;

namespace {

constexpr double kFlatLTol = 1e-6;
constexpr double kEvolutionAnalyticTol = 1e-8;
constexpr double kEvolutionFdTol = 1e-6;
constexpr double kTransportDriftTol = 1e-7;
constexpr double kDriftRatioLow = 8.0;
constexpr double kDriftRatioHigh = 32.0;
constexpr double kFirstVariationTol = 1e-3;
constexpr double kLambdaFormsTol = 1e-4;
constexpr double kLambdaFdTol = 1e-3;
constexpr double kHessianTol = 1e-3;
constexpr double kMonotoneBand = 2.0;
constexpr double kSigmaBand = 3.0;
constexpr double kSigmaFraction = 0.95;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int workers() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

template <class F>
auto richardson(F&& f, double h) {
    const double d1 = (f(h) - f(-h)) / (2.0 * h);
    const double d2 = (f(0.5 * h) - f(-0.5 * h)) / h;
    return (4.0 * d2 - d1) / 3.0;
}

FlowManifold sphere2() { return FlowManifold::round_sphere(2, 1.0, 1.0, 8.0); }

ChartPoint random_point(const FlowManifold& flow, Rng& rng) {
    ChartPoint p;
    p.x = Vec::Zero(flow.dim());
    const int m = flow.sphere_dim();
    if (m > 0) {
        const double radius = (flow.curved_is_sphere() ? 1.5 : 0.7) / std::sqrt(double(m));
        p.x.head(m) = radius * Vec(sample_uniform_ball(m, rng));
        if (flow.curved_is_sphere()) p.chart = rng.uniform() < 0.5 ? 0 : 1;
    }
    for (int i = 0; i < flow.torus_dim(); ++i) p.x(m + i) = flow.periods()[i] * rng.uniform();
    return flow.normalize(p);
}

// Endpoint at frozen distance up to 3/4 of the injectivity scale (or 1.5 curvature radii on hyperbolic space).
ChartPoint partner(const FlowManifold& flow, const ChartPoint& x, double tau, Rng& rng) {
    const int m = flow.sphere_dim();
    Vec a = Vec::Zero(flow.dim());
    if (m > 0) {
        Vec dir = Vec(sample_uniform_ball(m, rng));
        while (dir.norm() < 1e-3) dir = Vec(sample_uniform_ball(m, rng));
        const double length =
            (flow.curved_is_sphere() ? 0.75 * M_PI : 1.5) * std::sqrt(flow.scale(tau)) * rng.uniform();
        a.head(m) = length * dir / dir.norm();
    }
    for (int i = 0; i < flow.torus_dim(); ++i) a(m + i) = 0.9 * flow.periods()[i] * (rng.uniform() - 0.5);
    return frozen_exp(flow, tau, x, coordinate_frame(flow, tau, x).vectors * a);
}

struct Config {
    double t;
    ChartPoint x;
    ChartPoint y;
};

// Walk-time configuration with tau_bar = (1, 4) and t kept `margin` away from [1, 2]'s ends.
Config sphere_config(Rng& rng, double margin) {
    const FlowManifold flow = sphere2();
    Config c;
    c.t = 1.0 + margin + (1.0 - 2.0 * margin) * rng.uniform();
    c.x = random_point(flow, rng);
    c.y = partner(flow, c.x, 4.0 * c.t, rng);
    return c;
}

// ---------------------------------------------------------------------------

Outcome flat_l_oracle() {
    const std::vector<double> periods = {1.0, 1.0};
    const FlowManifold flow = FlowManifold::flat_torus(periods, 1.0, 8.0);
    Rng rng(101, 0);
    SolveOptions numeric;
    numeric.method = SolveMethod::Numeric;
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        ChartPoint x, y;
        x.x = Vec(2);
        y.x = Vec(2);
        for (int i = 0; i < 2; ++i) {
            x.x(i) = rng.uniform();
            y.x(i) = rng.uniform();
        }
        double tau1 = 1.0 + 7.0 * rng.uniform(), tau2 = 1.0 + 7.0 * rng.uniform();
        if (tau1 > tau2) std::swap(tau1, tau2);
        if (tau2 - tau1 < 0.05) tau2 = std::min(8.0, tau1 + 0.05), tau1 = tau2 - 0.05;
        double rho2 = std::numeric_limits<double>::infinity();
        for (int a = -1; a <= 1; ++a)
            for (int b = -1; b <= 1; ++b) {
                const double dx = y.x(0) - x.x(0) + a, dy = y.x(1) - x.x(1) + b;
                rho2 = std::min(rho2, dx * dx + dy * dy);
            }
        const double oracle = rho2 / (2.0 * (std::sqrt(tau2) - std::sqrt(tau1)));
        const LGeodesicResult geo = solve_min_lgeodesic(flow, x, tau1, y, tau2, numeric);
        if (geo.method != "numeric") return {false, "solver did not take the numeric path"};
        const double l = geo.action;
        worst = std::max(worst, std::abs(l - oracle) / (kFlatLTol * (1.0 + rho2)));
    }
    return {worst <= 1.0, "50 numeric solves, max |L - oracle| / tol = " + fmt("%.3g", worst)};
}

Outcome curvature_evolution() {
    const std::vector<std::pair<std::string, FlowManifold>> flows = default_flows();
    Rng rng(102, 0);
    double worst_analytic = 0.0, worst_fd = 0.0;
    for (const auto& [name, flow] : flows) {
        for (int k = 0; k < 100; ++k) {
            const ChartPoint x = random_point(flow, rng);
            const double h = 1e-4;
            const double tau = flow.tau_min() + 2 * h + (flow.tau_max() - flow.tau_min() - 4 * h) * rng.uniform();
            const CurvaturePack p = curvature_pack(flow, {x, tau});
            const double rhs = -p.lap_scalar - 2.0 * p.ric_norm2;
            if (flow.has_curved_factor()) {
                const double m = flow.sphere_dim();
                const double a = flow.scale(tau);
                const double sign = flow.curved_is_sphere() ? 1.0 : -1.0;
                worst_analytic = std::max(worst_analytic, std::abs(-sign * m * (m - 1) * flow.scale_rate() / (a * a) - rhs));
            }
            auto scalar_at = [&](double e) { return flow.scalar(tau + e); };
            worst_fd = std::max(worst_fd, std::abs(richardson(scalar_at, h) - rhs));
        }
    }
    const bool pass = worst_analytic <= kEvolutionAnalyticTol && worst_fd <= kEvolutionFdTol;
    return {pass, "analytic residual " + fmt("%.2e", worst_analytic) + ", finite-difference residual " +
                      fmt("%.2e", worst_fd) + " over 4 flows x 100 points"};
}

Outcome transport_isometry() {
    const std::vector<std::pair<std::string, FlowManifold>> flows = default_flows();
    Rng rng(103, 0);
    double worst = 0.0;
    std::vector<double> ratios;
    int count = 0;
    for (int k = 0; k < 100; ++k) {
        // Curved flows only; the flat transport is the identity.
        const FlowManifold& flow = flows[1 + k % 3].second;
        const double t = 1.0 + rng.uniform();
        const ChartPoint x = random_point(flow, rng);
        const ChartPoint y = partner(flow, x, 4.0 * t, rng);
        const int d = flow.dim();
        Mat raw(d, d);
        do {
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) raw(i, j) = rng.normal();
        } while (std::abs(raw.determinant()) < 1e-3);
        const Frame src = gram_schmidt(flow, t, x, raw);
        SolveOptions opts;
        opts.grid = 256;
        const LGeodesicResult geo = solve_min_lgeodesic(flow, x, t, y, 4.0 * t, opts);
        worst = std::max(worst, transport_frame(flow, geo, src).drift);
        ++count;
        if (k % 3 == 0) {
            opts.grid = 16;
            const double coarse = transport_frame(flow, solve_min_lgeodesic(flow, x, t, y, 4.0 * t, opts), src).drift;
            opts.grid = 32;
            const double fine = transport_frame(flow, solve_min_lgeodesic(flow, x, t, y, 4.0 * t, opts), src).drift;
            if (coarse > 1e-10 && fine > 1e-12) ratios.push_back(coarse / fine);
        }
    }
    std::sort(ratios.begin(), ratios.end());
    const double median = ratios.empty() ? 0.0 : ratios[ratios.size() / 2];
    const bool pass = worst <= kTransportDriftTol && median >= kDriftRatioLow && median <= kDriftRatioHigh;
    return {pass, "max Gram drift " + fmt("%.2e", worst) + " over " + std::to_string(count) +
                      " geodesics at N = 256; median drift ratio N = 16 -> 32 is " + fmt("%.2f", median) + " (" +
                      std::to_string(ratios.size()) + " sphere geodesics)"};
}

Outcome first_variation() {
    const FlowManifold flow = sphere2();
    Rng rng(104, 0);
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        const Config c = sphere_config(rng, 1e-3);
        const Vec lam = Vec(sample_uniform_ball(2, rng));
        worst = std::max(worst, first_variation_check(flow, 1.0, 4.0, c.t, c.x, c.y, lam).relative_error);
    }
    return {worst <= kFirstVariationTol, "max relative error " + fmt("%.2e", worst) + " over 50 sphere configurations"};
}

Outcome lambda_rate() {
    const FlowManifold flow = sphere2();
    Rng rng(105, 0);
    double worst_forms = 0.0, worst_fd = 0.0;
    for (int k = 0; k < 50; ++k) {
        const Config c = sphere_config(rng, 0.01);
        const LGeodesicResult geo = solve_min_lgeodesic(flow, c.x, c.t, c.y, 4.0 * c.t);
        const LambdaRate r = dLambda_dt(flow, 1.0, 4.0, c.t, geo);
        SolveOptions warm;
        warm.warm_start = geo.initial_z.v;
        auto lambda_at = [&](double e) {
            return solve_min_lgeodesic(flow, c.x, c.t + e, c.y, 4.0 * (c.t + e), warm).action;
        };
        const double fd = richardson(lambda_at, 1e-3 * c.t);
        const double ref = std::max(std::abs(r.integral), 1e-6);
        worst_forms = std::max(worst_forms, std::abs(r.boundary - r.integral) / ref);
        worst_fd = std::max(worst_fd, std::max(std::abs(fd - r.integral), std::abs(fd - r.boundary)) / ref);
    }
    const bool pass = worst_forms <= kLambdaFormsTol && worst_fd <= kLambdaFdTol;
    return {pass, "boundary vs integral " + fmt("%.2e", worst_forms) + ", vs finite differences " +
                      fmt("%.2e", worst_fd) + " (relative, 50 sphere configurations)"};
}

Outcome hessian_bound() {
    const FlowManifold flow = sphere2();
    Rng rng(106, 0);
    double worst = -std::numeric_limits<double>::infinity();
    int used = 0, skipped = 0;
    while (used < 50 && skipped < 500) {
        const Config c = sphere_config(rng, 0.01);
        const HessianReport r = hessian_bound_check(flow, 1.0, 4.0, c.t, c.x, c.y);
        if (r.multiplicity_hint > 1) {
            ++skipped;
            continue;
        }
        ++used;
        worst = std::max(worst, (r.lhs - r.rhs) / (kHessianTol * (1.0 + std::abs(r.rhs))));
        worst = std::max(worst, (r.combined_lhs - r.combined_rhs) / (kHessianTol * (1.0 + std::abs(r.combined_rhs))));
    }
    return {used == 50 && worst <= 1.0, std::to_string(used) + " non-cut configurations (" + std::to_string(skipped) +
                                            " skipped), max (LHS - RHS) / tol = " + fmt("%.3g", worst)};
}

ExperimentSpec walk_spec(ExperimentKind kind, const FlowManifold& flow) {
    ExperimentSpec spec;
    spec.kind = kind;
    spec.flow = flow;
    spec.tau_bar1 = 1.0;
    spec.tau_bar2 = 4.0;
    spec.s_start = 1.0;
    spec.epsilon = 0.05;
    spec.seed = 2024;
    spec.workers = workers();
    spec.x0.x = Vec::Zero(flow.dim());
    spec.y0.x = Vec::Zero(flow.dim());
    return spec;
}

std::string paired_summary(const ExperimentReport& r) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const PairedStat& p : r.paired) worst = std::max(worst, p.mean / p.se);
    std::ostringstream s;
    s << "worst paired diff / SE = " << fmt("%.2f", worst);
    return s.str();
}

Outcome supermartingale() {
    ExperimentSpec flat = walk_spec(ExperimentKind::SupermartingaleTheta, FlowManifold::flat_torus({1.0, 1.0}, 1.0, 8.0));
    flat.y0.x << 0.3, 0.2;
    flat.replicas = 10000;
    flat.band = kMonotoneBand;
    flat.checkpoints = default_checkpoints(flat.flow, 4.0, 1.0, 0.05, 8);
    const ExperimentReport fr = run_experiment(flat);

    ExperimentSpec sphere = walk_spec(ExperimentKind::SupermartingaleTheta, sphere2());
    sphere.y0.x << 0.8, -0.4;
    sphere.replicas = 2000;
    sphere.band = kMonotoneBand;
    sphere.checkpoints = flat.checkpoints;
    const ExperimentReport sr = run_experiment(sphere);

    const bool pass = fr.pass && fr.asserted && sr.pass && sr.asserted;
    return {pass, "flat 10^4 replicas: " + std::string(fr.pass ? "pass" : "fail") + ", " + paired_summary(fr) +
                      ", " + fmt("%.0f s", fr.wall_clock_seconds) + "; sphere 2x10^3 replicas: " +
                      (sr.pass ? "pass" : "fail") + ", " + paired_summary(sr) + ", failure rate " +
                      fmt("%.2e", sr.diagnostics.at("bvp_failure_rate")) + ", " + fmt("%.0f s", sr.wall_clock_seconds)};
}

Outcome sigma_inequality() {
    std::string detail;
    bool pass = true;
    for (const FlowManifold& flow : {FlowManifold::flat_torus({1.0, 1.0}, 1.0, 8.0), sphere2()}) {
        ExperimentSpec spec = walk_spec(ExperimentKind::SigmaInequality, flow);
        spec.y0.x << 0.4, 0.3;
        spec.states = 50;
        spec.draws = 10000;
        spec.sigma_band = kSigmaBand;
        spec.sigma_pass_fraction = kSigmaFraction;
        spec.checkpoints = default_checkpoints(flow, 4.0, 1.0, 0.05, 2);
        const ExperimentReport r = run_experiment(spec);
        pass = pass && r.pass && r.asserted && r.diagnostics.at("states_used") == 50.0;
        if (!detail.empty()) detail += "; ";
        detail += r.flow + ": " + fmt("%.0f", r.diagnostics.at("states_passed")) + "/" +
                  fmt("%.0f", r.diagnostics.at("states_used")) + " states within 3 SE";
    }
    return {pass, detail};
}

Outcome transport_cost() {
    ExperimentSpec spec = walk_spec(ExperimentKind::TransportCost, FlowManifold::flat_torus({1.0, 1.0}, 1.0, 8.0));
    spec.y0.x << 0.3, 0.2;
    spec.samples = 256;
    spec.batches = 20;
    spec.band = kMonotoneBand;
    spec.checkpoints = default_checkpoints(spec.flow, 4.0, 1.0, 0.05, 6);
    const ExperimentReport r = run_experiment(spec);
    const bool pass = r.pass && r.asserted && r.checkpoints.size() == 6;
    return {pass, "n = 256, B = 20, 6 checkpoints, " + paired_summary(r) + ", certified = " +
                      (r.diagnostics.at("certified") == 1.0 ? "yes" : "no") + ", " + fmt("%.0f s", r.wall_clock_seconds)};
}

Outcome assignment() {
    Rng rng(110, 0);
    int exact = 0;
    for (int k = 0; k < 100; ++k) {
        Eigen::MatrixXd c(8, 8);
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j) c(i, j) = std::floor(rng.uniform() * 1000.0);
        std::vector<int> p(8);
        std::iota(p.begin(), p.end(), 0);
        double best = std::numeric_limits<double>::infinity();
        do {
            double s = 0.0;
            for (int i = 0; i < 8; ++i) s += c(i, p[i]);
            best = std::min(best, s);
        } while (std::next_permutation(p.begin(), p.end()));
        const EmpiricalCoupling e = optimal_assignment(c);
        double total = 0.0;
        for (int i = 0; i < 8; ++i) total += c(i, e.permutation[i]);
        if (total == best && e.certified) ++exact;
    }
    return {exact == 100, std::to_string(exact) + "/100 integer 8x8 matrices match the 8! brute-force optimum exactly"};
}

Outcome bounds_audit() {
    const BoundAudit& a = bound_audit();
    const long bad = a.sandwich_violations + a.velocity_violations;
    return {bad == 0 && a.solved > 0, std::to_string(a.solved.load()) + " geodesics audited, " +
                                          std::to_string(a.sandwich_violations.load()) + " sandwich and " +
                                          std::to_string(a.velocity_violations.load()) + " velocity violations"};
}

Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / ("ricci_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = dir / "config.json";
    std::ofstream(cfg) << R"({"flow": {"kind": "round_sphere", "dim": 2, "params": {"r0": 1}, "tau_min": 1, "tau_max": 8},
 "experiment": {"kind": "supermartingale_theta", "replicas": 24, "checkpoint_count": 4, "y0": [0.8, -0.4]},
 "seed": 99})";
    std::string bytes[2];
    int codes[2];
    const int counts[2] = {1, 8};
    for (int k = 0; k < 2; ++k) {
        const std::string out = (dir / ("w" + std::to_string(counts[k]))).string();
        const std::string w = std::to_string(counts[k]);
        const std::string c = cfg.string();
        const char* argv[] = {"ricci", "experiment", "--config", c.c_str(), "--workers", w.c_str(), "--out", out.c_str()};
        std::ostringstream sink, err;
        codes[k] = run_cli(8, argv, sink, err);
        std::ifstream f(fs::path(out) / "report.json", std::ios::binary);
        std::stringstream s;
        s << f.rdbuf();
        bytes[k] = s.str();
    }
    fs::remove_all(dir);
    const bool same = !bytes[0].empty() && bytes[0] == bytes[1];
    return {same && codes[0] == kExitOk && codes[1] == kExitOk,
            std::string("report.json ") + (same ? "byte-identical" : "differs") + " at 1 and 8 workers (" +
                std::to_string(bytes[0].size()) + " bytes, exit codes " + std::to_string(codes[0]) + "/" +
                std::to_string(codes[1]) + ")"};
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> all = {
        {1, "flat-torus L oracle", flat_l_oracle},
        {2, "scalar curvature evolution identity", curvature_evolution},
        {3, "space-time transport isometry", transport_isometry},
        {4, "first variation of Lambda", first_variation},
        {5, "dLambda/dt boundary and integral forms", lambda_rate},
        {6, "Hessian upper bound and combined inequality", hessian_bound},
        {7, "Theta supermartingale", supermartingale},
        {8, "expected second-order term inequality", sigma_inequality},
        {9, "transport-cost monotonicity", transport_cost},
        {10, "assignment solver vs brute force", assignment},
        {12, "determinism across worker counts", determinism},
        {11, "sandwich and velocity bounds on every solved geodesic", bounds_audit},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
    int failures = 0;
    for (const Criterion& c : all) {
        if (!wanted.empty() && !wanted.count(c.id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!o.pass) ++failures;
        std::printf("%s [%d] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
