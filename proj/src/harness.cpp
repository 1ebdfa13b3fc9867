#include "ricci/harness.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

namespace ricci {

std::string to_string(ExperimentKind kind) {
    switch (kind) {
    case ExperimentKind::SupermartingaleTheta: return "supermartingale_theta";
    case ExperimentKind::SigmaInequality: return "sigma_inequality";
    case ExperimentKind::TransportCost: return "transport_cost";
    case ExperimentKind::IdentitySuite: return "identity_suite";
    }
    return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
    if (name == "supermartingale_theta") return ExperimentKind::SupermartingaleTheta;
    if (name == "sigma_inequality") return ExperimentKind::SigmaInequality;
    if (name == "transport_cost") return ExperimentKind::TransportCost;
    if (name == "identity_suite") return ExperimentKind::IdentitySuite;
    throw ConfigError("unknown experiment kind '" + name + "'");
}

std::vector<double> default_checkpoints(const FlowManifold& flow, double tau_bar2, double s_start, double epsilon,
                                        int count) {
    if (count < 1) throw ConfigError("checkpoint count must be positive");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    const double eps2 = epsilon * epsilon;
    const int total = static_cast<int>(std::floor((flow.tau_max() / tau_bar2 - s_start) / eps2 + 1e-9));
    if (total < 0) throw ConfigError("s_start lies beyond tau_max / tau_bar2");
    std::vector<double> out;
    int last = -1;
    for (int k = 0; k < count; ++k) {
        const int n = count == 1 ? 0 : static_cast<int>(std::lround(static_cast<double>(k) * total / (count - 1)));
        if (n == last) continue;
        out.push_back(s_start + eps2 * n);
        last = n;
    }
    return out;
}

std::vector<int> checkpoint_steps(const ExperimentSpec& spec) {
    const double eps2 = spec.epsilon * spec.epsilon;
    if (!(eps2 > 0.0)) throw ConfigError("epsilon must be positive");
    const std::vector<double> ts =
        spec.checkpoints.empty() ? default_checkpoints(spec.flow, spec.tau_bar2, spec.s_start, spec.epsilon, 8)
                                 : spec.checkpoints;
    const double t_end = spec.flow.tau_max() / spec.tau_bar2;
    std::vector<int> steps;
    for (double t : ts) {
        const double raw = (t - spec.s_start) / eps2;
        const double n = std::round(raw);
        if (!(n >= 0.0) || std::abs(raw - n) > 1e-9 * (1.0 + std::abs(raw))) {
            std::ostringstream msg;
            msg << "checkpoint t = " << t << " is not on the walk grid s + eps^2 n (s = " << spec.s_start
                << ", eps = " << spec.epsilon << ")";
            throw ConfigError(msg.str());
        }
        if (t > t_end + 1e-12 * (1.0 + t_end)) {
            std::ostringstream msg;
            msg << "checkpoint t = " << t << " exceeds tau_max / tau_bar2 = " << t_end;
            throw ConfigError(msg.str());
        }
        if (!steps.empty() && static_cast<int>(n) <= steps.back())
            throw ConfigError("checkpoints must be strictly increasing");
        steps.push_back(static_cast<int>(n));
    }
    return steps;
}

namespace {

double grid_time(const ExperimentSpec& spec, int n) {
    return spec.s_start + spec.epsilon * spec.epsilon * n;
}

WalkConfig walk_config(const ExperimentSpec& spec, std::uint64_t replica, int max_steps) {
    WalkConfig cfg;
    cfg.flow = &spec.flow;
    cfg.tau_bar1 = spec.tau_bar1;
    cfg.tau_bar2 = spec.tau_bar2;
    cfg.s_start = spec.s_start;
    cfg.epsilon = spec.epsilon;
    cfg.x0 = spec.x0;
    cfg.y0 = spec.y0;
    cfg.seed = spec.seed;
    cfg.replica = replica;
    cfg.max_steps = max_steps;
    cfg.solve = spec.solve;
    return cfg;
}

void require_kind(const ExperimentSpec& spec, ExperimentKind kind) {
    if (spec.kind != kind)
        throw ConfigError("experiment kind is " + to_string(spec.kind) + ", expected " + to_string(kind));
}

ExperimentReport new_report(const ExperimentSpec& spec) {
    ExperimentReport r;
    r.experiment = to_string(spec.kind);
    r.flow = to_string(spec.flow.kind());
    return r;
}

// Paired differences between adjacent checkpoints; rows are replicas.
void paired_monotonicity(const std::vector<std::vector<double>>& rows, const std::vector<double>& ts, double band,
                         ExperimentReport& report) {
    const int k_count = static_cast<int>(ts.size());
    for (int k = 0; k < k_count; ++k) {
        std::vector<double> col;
        col.reserve(rows.size());
        for (const auto& r : rows) col.push_back(r[k]);
        const MeanSe ms = mean_se(col);
        report.checkpoints.push_back({ts[k], ms.mean, ms.se, ms.n});
    }
    bool degenerate = k_count < 2 || rows.size() < 2;
    for (int k = 0; k + 1 < k_count; ++k) {
        std::vector<double> diff;
        diff.reserve(rows.size());
        for (const auto& r : rows) diff.push_back(r[k + 1] - r[k]);
        const MeanSe ms = mean_se(diff);
        PairedStat p{ts[k], ts[k + 1], ms.mean, ms.se, ms.n, true};
        if (!degenerate) p.pass = ms.mean <= band * ms.se;
        report.paired.push_back(p);
    }
    report.asserted = !degenerate;
    if (degenerate) report.notes.push_back("degenerate statistics: no monotonicity assertion made");
    for (const auto& p : report.paired) report.pass = report.pass && p.pass;
}

struct ReplicaOutcome {
    bool ok = false;
    std::string diagnostic;
    std::vector<double> theta;
    long solves = 0;
    long retries = 0;
    long records = 0;
    long multiple = 0;
    long floor_violations = 0;
    double max_increment_error = 0.0;
    double max_frame_error = 0.0;
    double max_drift = 0.0;
};

}  // namespace

ExperimentReport experiment_supermartingale(const ExperimentSpec& spec) {
    require_kind(spec, ExperimentKind::SupermartingaleTheta);
    if (spec.replicas < 0) throw ConfigError("replicas must be non-negative");
    const std::vector<int> steps = checkpoint_steps(spec);
    if (steps.empty()) throw ConfigError("at least one checkpoint is required");
    walk_config(spec, 0, steps.back()).validate();

    const long audit_before = bound_audit().sandwich_violations + bound_audit().velocity_violations;
    std::vector<ReplicaOutcome> out(spec.replicas);
    detail::parallel_for(spec.replicas, spec.workers, [&](int r) {
        const WalkPath path = run_coupled_walk(walk_config(spec, static_cast<std::uint64_t>(r), steps.back()));
        ReplicaOutcome& o = out[r];
        o.solves = path.solves;
        o.retries = path.retries;
        for (const WalkRecord& rec : path.records) {
            ++o.records;
            if (rec.multiplicity > 1) ++o.multiple;
            if (!rec.floor_ok) ++o.floor_violations;
            o.max_increment_error = std::max(o.max_increment_error, rec.increment_ratio_error);
            o.max_frame_error = std::max(o.max_frame_error, rec.frame_error);
            o.max_drift = std::max(o.max_drift, rec.transport_drift);
        }
        o.ok = !path.aborted;
        o.diagnostic = path.diagnostic;
        if (o.ok)
            for (int n : steps) o.theta.push_back(path.records[n].theta);
    });

    ExperimentReport report = new_report(spec);
    std::vector<std::vector<double>> rows;
    long solves = 0, retries = 0, records = 0, multiple = 0, floor_violations = 0, aborted = 0;
    double inc = 0.0, frame = 0.0, drift = 0.0;
    for (int r = 0; r < spec.replicas; ++r) {
        const ReplicaOutcome& o = out[r];
        solves += o.solves;
        retries += o.retries;
        records += o.records;
        multiple += o.multiple;
        floor_violations += o.floor_violations;
        inc = std::max(inc, o.max_increment_error);
        frame = std::max(frame, o.max_frame_error);
        drift = std::max(drift, o.max_drift);
        if (o.ok) {
            rows.push_back(o.theta);
        } else {
            ++aborted;
            if (aborted <= 5) report.notes.push_back("replica " + std::to_string(r) + ": " + o.diagnostic);
        }
    }
    std::vector<double> ts;
    for (int n : steps) ts.push_back(grid_time(spec, n));
    paired_monotonicity(rows, ts, spec.band, report);

    const double failure_rate = solves > 0 ? static_cast<double>(retries) / solves : 0.0;
    const long bound_violations =
        bound_audit().sandwich_violations + bound_audit().velocity_violations - audit_before;
    report.diagnostics["band"] = spec.band;
    report.diagnostics["replicas"] = spec.replicas;
    report.diagnostics["aborted_replicas"] = static_cast<double>(aborted);
    report.diagnostics["bvp_solves"] = static_cast<double>(solves);
    report.diagnostics["bvp_retries"] = static_cast<double>(retries);
    report.diagnostics["bvp_failure_rate"] = failure_rate;
    report.diagnostics["multiplicity_rate"] = records > 0 ? static_cast<double>(multiple) / records : 0.0;
    report.diagnostics["floor_violations"] = static_cast<double>(floor_violations);
    report.diagnostics["max_increment_ratio_error"] = inc;
    report.diagnostics["max_frame_error"] = frame;
    report.diagnostics["max_transport_drift"] = drift;
    report.diagnostics["bound_violations"] = static_cast<double>(bound_violations);
    if (failure_rate > spec.max_failure_rate) {
        report.pass = false;
        report.notes.push_back("geodesic solve failure rate exceeds the allowed maximum");
    }
    if (floor_violations > 0) {
        report.pass = false;
        report.notes.push_back("theta fell below its lower floor");
    }
    return report;
}

ExperimentReport experiment_sigma_inequality(const ExperimentSpec& spec) {
    require_kind(spec, ExperimentKind::SigmaInequality);
    if (spec.states < 0 || spec.draws < 0) throw ConfigError("states and draws must be non-negative");
    const std::vector<int> steps = checkpoint_steps(spec);
    if (steps.empty()) throw ConfigError("at least one checkpoint is required");
    const int total = steps.back();
    walk_config(spec, 0, total).validate();
    const int d = spec.flow.dim();

    struct Outcome {
        bool ok = false;
        std::string diagnostic;
        StateStat stat;
        long n = 0;
        double direct_gap = 0.0;
    };
    std::vector<Outcome> out(spec.states);
    detail::parallel_for(spec.states, spec.workers, [&](int m) {
        Outcome& o = out[m];
        const int n = static_cast<int>((static_cast<long>(m) * total) / std::max(spec.states, 1));
        const WalkPath path = run_coupled_walk(walk_config(spec, static_cast<std::uint64_t>(m), n));
        if (path.aborted) {
            o.diagnostic = path.diagnostic;
            return;
        }
        const WalkRecord& rec = path.records.back();
        const double t = rec.t;
        bool retried = false;
        const auto geo = solve_with_retry(spec.flow, rec.x, spec.tau_bar1 * t, rec.y, spec.tau_bar2 * t,
                                          spec.solve, &retried);
        if (!geo) {
            o.diagnostic = "geodesic solve failed at the frozen state";
            return;
        }
        const Frame phi = coordinate_frame(spec.flow, spec.tau_bar1 * t, rec.x);
        const SigmaForm sf = sigma_form(spec.flow, spec.tau_bar1, spec.tau_bar2, t, *geo, phi);
        Rng rng(spec.seed, static_cast<std::uint64_t>(m), 1);
        std::vector<double> values;
        values.reserve(spec.draws);
        for (int k = 0; k < spec.draws; ++k) {
            const Vec lam = sample_uniform_ball(d, rng);
            values.push_back(sf.evaluate(lam));
            if (k == 0) {
                const double direct = sigma_direct(spec.flow, spec.tau_bar1, spec.tau_bar2, t, *geo, phi, lam);
                o.direct_gap = std::abs(direct - values.back());
            }
        }
        const MeanSe ms = mean_se(values);
        o.ok = true;
        o.n = ms.n;
        o.stat.t = t;
        o.stat.estimate = ms.mean;
        o.stat.se = ms.se;
        o.stat.rhs = sf.rhs;
        o.stat.exact = sf.expectation();
        const double slack = 1e-12 * (1.0 + std::abs(sf.rhs));
        o.stat.pass = ms.n > 0 && ms.mean <= sf.rhs + spec.sigma_band * ms.se + slack;
    });

    ExperimentReport report = new_report(spec);
    long used = 0, passed = 0, exact_ok = 0;
    double direct_gap = 0.0;
    double exact_gap = -std::numeric_limits<double>::infinity();
    for (int m = 0; m < spec.states; ++m) {
        const Outcome& o = out[m];
        if (!o.ok) {
            report.notes.push_back("state " + std::to_string(m) + " skipped: " + o.diagnostic);
            continue;
        }
        ++used;
        if (o.stat.pass) ++passed;
        if (o.stat.exact <= o.stat.rhs + 1e-6 * (1.0 + std::abs(o.stat.rhs))) ++exact_ok;
        exact_gap = std::max(exact_gap, o.stat.exact - o.stat.rhs);
        direct_gap = std::max(direct_gap, o.direct_gap);
        report.states.push_back(o.stat);
        report.checkpoints.push_back({o.stat.t, o.stat.estimate, o.stat.se, o.n});
    }
    const double fraction = used > 0 ? static_cast<double>(passed) / used : 0.0;
    report.asserted = used > 0 && spec.draws > 1;
    report.pass = !report.asserted || fraction >= spec.sigma_pass_fraction;
    if (!report.asserted) report.notes.push_back("degenerate statistics: no inequality assertion made");
    report.diagnostics["band"] = spec.sigma_band;
    report.diagnostics["states"] = spec.states;
    report.diagnostics["states_used"] = static_cast<double>(used);
    report.diagnostics["states_skipped"] = static_cast<double>(spec.states - used);
    report.diagnostics["states_passed"] = static_cast<double>(passed);
    report.diagnostics["pass_fraction"] = fraction;
    report.diagnostics["exact_expectation_pass"] = static_cast<double>(exact_ok);
    report.diagnostics["max_exact_excess"] = used > 0 ? exact_gap : 0.0;
    report.diagnostics["draws"] = spec.draws;
    report.diagnostics["sigma_direct_gap"] = direct_gap;
    return report;
}

ExperimentReport experiment_transport_cost(const ExperimentSpec& spec) {
    require_kind(spec, ExperimentKind::TransportCost);
    if (spec.samples < 1 || spec.samples > 1024) throw ConfigError("samples must lie in [1, 1024]");
    if (spec.batches < 0) throw ConfigError("batches must be non-negative");
    const std::vector<int> steps = checkpoint_steps(spec);
    if (steps.empty()) throw ConfigError("at least one checkpoint is required");
    walk_config(spec, 0, steps.back()).validate();
    const int d = spec.flow.dim();
    const int n = spec.samples;
    const int k_count = static_cast<int>(steps.size());
    std::vector<double> ts;
    for (int s : steps) ts.push_back(grid_time(spec, s));

    struct Batch {
        std::vector<double> theta_bar;
        bool certified = true;
    };
    std::vector<Batch> out(spec.batches);
    detail::parallel_for(spec.batches, spec.workers, [&](int b) {
        std::vector<SinglePath> xs, ys;
        for (int i = 0; i < n; ++i) {
            const auto sub = static_cast<std::uint64_t>(2 * i);
            xs.push_back(run_single_walk(spec.flow, spec.tau_bar1, spec.s_start, spec.epsilon, spec.x0, spec.seed,
                                         steps.back(), static_cast<std::uint64_t>(b), sub));
            ys.push_back(run_single_walk(spec.flow, spec.tau_bar2, spec.s_start, spec.epsilon, spec.y0, spec.seed,
                                         steps.back(), static_cast<std::uint64_t>(b), sub + 1));
        }
        Batch& o = out[b];
        for (int k = 0; k < k_count; ++k) {
            const double t = ts[k];
            const double tau1 = spec.tau_bar1 * t, tau2 = spec.tau_bar2 * t;
            Eigen::MatrixXd cost(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    cost(i, j) = l_distance(spec.flow, xs[i].x[steps[k]], tau1, ys[j].x[steps[k]], tau2, spec.solve);
            const EmpiricalCoupling c = optimal_assignment(cost);
            o.certified = o.certified && c.certified;
            const double gap = std::sqrt(tau2) - std::sqrt(tau1);
            o.theta_bar.push_back(2.0 * gap * c.cost - 2.0 * d * gap * gap);
        }
    });

    ExperimentReport report = new_report(spec);
    std::vector<std::vector<double>> rows;
    bool certified = true;
    for (const Batch& b : out) {
        rows.push_back(b.theta_bar);
        certified = certified && b.certified;
    }
    paired_monotonicity(rows, ts, spec.band, report);
    if (!certified) {
        report.pass = false;
        report.notes.push_back("an assignment failed its optimality certificate");
    }
    if (steps.front() == 0 && !rows.empty()) {
        const double diag = theta(spec.flow, spec.tau_bar1, spec.tau_bar2, ts.front(), spec.x0, spec.y0, spec.solve);
        double excess = -std::numeric_limits<double>::infinity();
        for (const auto& r : rows) excess = std::max(excess, r.front() - diag);
        report.diagnostics["initial_theta"] = diag;
        report.diagnostics["initial_coupling_excess"] = excess;
        if (excess > 1e-9 * (1.0 + std::abs(diag))) {
            report.pass = false;
            report.notes.push_back("optimal cost at the start exceeds the diagonal coupling");
        }
    }
    report.diagnostics["band"] = spec.band;
    report.diagnostics["samples"] = n;
    report.diagnostics["batches"] = spec.batches;
    report.diagnostics["certified"] = certified ? 1.0 : 0.0;
    return report;
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
    const auto start = std::chrono::steady_clock::now();
    ExperimentReport r;
    switch (spec.kind) {
    case ExperimentKind::SupermartingaleTheta: r = experiment_supermartingale(spec); break;
    case ExperimentKind::SigmaInequality: r = experiment_sigma_inequality(spec); break;
    case ExperimentKind::TransportCost: r = experiment_transport_cost(spec); break;
    case ExperimentKind::IdentitySuite: r = experiment_identity_suite(spec); break;
    }
    r.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

}  // namespace ricci
