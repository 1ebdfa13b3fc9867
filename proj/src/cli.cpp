#include "ricci/cli.hpp"

#include "json_util.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace ricci {

using namespace detail;

namespace {

const std::set<std::string> kTopLevel = {"flow", "geodesic", "transport", "walk", "experiment",
                                         "seed", "workers", "out", "verbosity"};

std::uint64_t get_seed(const Json& cfg) {
    if (!cfg.contains("seed")) return 1;
    const Json& s = cfg.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
        throw ConfigError("seed: expected a non-negative integer");
    return s.get<std::uint64_t>();
}

int get_workers(const Json& cfg) {
    if (!cfg.contains("workers")) return 1;
    const int w = get_int(cfg, "workers", "config");
    if (w < 1) throw ConfigError("workers: must be at least 1");
    return w;
}

int get_verbosity(const Json& cfg) {
    return cfg.contains("verbosity") ? get_int(cfg, "verbosity", "config") : 1;
}

std::string get_out(const Json& cfg) {
    if (!cfg.contains("out")) return "out";
    if (!cfg.at("out").is_string()) throw ConfigError("out: expected a string");
    return cfg.at("out").get<std::string>();
}

const Json& section(const Json& cfg, const std::string& name) {
    if (!cfg.contains(name)) throw ConfigError(name + ": missing section");
    return cfg.at(name);
}

FlowManifold config_flow(const Json& cfg) {
    return flow_from_json(section(cfg, "flow"), "flow");
}

ChartPoint point_or_origin(const Json& j, const std::string& key, const FlowManifold& flow,
                           const std::string& where) {
    if (j.contains(key)) return point_from_json(j.at(key), flow, where + "." + key);
    ChartPoint p;
    p.x = Vec::Zero(flow.dim());
    return p;
}

SolveOptions solver_of(const Json& j, const std::string& where) {
    return j.contains("solver") ? solve_options_from_json(j.at("solver"), where + ".solver") : SolveOptions{};
}

bool get_bool(const Json& j, const std::string& key, const std::string& where, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_boolean()) throw ConfigError(where + "." + key + ": expected true or false");
    return j.at(key).get<bool>();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << text;
}

std::filesystem::path prepare_out(const Json& cfg) {
    const std::filesystem::path dir = get_out(cfg);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("out: cannot create directory " + dir.string());
    return dir;
}

std::string dump(const Json& j) {
    return j.dump(2) + "\n";
}

int cmd_geodesic(const Json& cfg, std::ostream& out) {
    const FlowManifold flow = config_flow(cfg);
    const Json& g = section(cfg, "geodesic");
    require_object(g, "geodesic", {"x", "y", "tau1", "tau2", "solver"});
    const ChartPoint x = point_from_json(section(g, "x"), flow, "geodesic.x");
    const ChartPoint y = point_from_json(section(g, "y"), flow, "geodesic.y");
    const double tau1 = get_number(g, "tau1", "geodesic");
    const double tau2 = get_number(g, "tau2", "geodesic");
    if (!(tau1 < tau2)) throw ConfigError("geodesic.tau2: must exceed tau1");
    const SolveOptions opts = solver_of(g, "geodesic");
    const LGeodesicResult r = solve_min_lgeodesic(flow, x, tau1, y, tau2, opts);
    const EndpointDerivatives der = dL_boundary(flow, r);
    out << "L = " << std::setprecision(12) << r.action << "\n";
    out << "Z = [";
    for (int i = 0; i < r.initial_z.v.size(); ++i) out << (i ? ", " : "") << r.initial_z.v(i);
    out << "] (chart " << r.initial_z.base.x.chart << ")\n";
    out << "dL/dtau1 = " << der.d_tau1 + 0.0 << "\n";
    out << "dL/dtau2 = " << der.d_tau2 + 0.0 << "\n";
    out << "method = " << r.method << ", multiplicity_hint = " << r.multiplicity_hint
        << ", residual = " << r.residual << "\n";
    Json j = geodesic_to_json(r);
    j["dL_dtau1"] = der.d_tau1;
    j["dL_dtau2"] = der.d_tau2;
    j["flow"] = flow_to_json(flow);
    write_file(prepare_out(cfg) / "geodesic.json", dump(j));
    return r.converged ? kExitOk : kExitSolver;
}

int cmd_transport(const Json& cfg, std::ostream& out) {
    const FlowManifold flow = config_flow(cfg);
    const Json& g = section(cfg, "transport");
    require_object(g, "transport", {"x", "y", "tau1", "tau2", "frame", "solver"});
    const ChartPoint x = point_from_json(section(g, "x"), flow, "transport.x");
    const ChartPoint y = point_from_json(section(g, "y"), flow, "transport.y");
    const double tau1 = get_number(g, "tau1", "transport");
    const double tau2 = get_number(g, "tau2", "transport");
    if (!(tau1 < tau2)) throw ConfigError("transport.tau2: must exceed tau1");
    Frame frame = coordinate_frame(flow, tau1, x);
    if (g.contains("frame")) {
        const Json& f = g.at("frame");
        const int d = flow.dim();
        if (!f.is_array() || static_cast<int>(f.size()) != d)
            throw ConfigError("transport.frame: expected a list of " + std::to_string(d) + " vectors");
        Mat cols(d, d);
        for (int j = 0; j < d; ++j) {
            if (!f[j].is_array() || static_cast<int>(f[j].size()) != d)
                throw ConfigError("transport.frame: each vector needs " + std::to_string(d) + " components");
            for (int i = 0; i < d; ++i) {
                if (!f[j][i].is_number()) throw ConfigError("transport.frame: expected numbers");
                cols(i, j) = f[j][i].get<double>();
            }
        }
        frame = gram_schmidt(flow, tau1, x, cols);
    }
    const SolveOptions opts = solver_of(g, "transport");
    const LGeodesicResult r = solve_min_lgeodesic(flow, x, tau1, y, tau2, opts);
    const TransportMap tm = transport_frame(flow, r, frame);
    out << "L = " << std::setprecision(12) << r.action << "\n";
    out << "gram_drift = " << tm.drift << "\n";
    const Json j{{"flow", flow_to_json(flow)},
                 {"geodesic", geodesic_to_json(r)},
                 {"source", {{"point", point_to_json(frame.base.x)}, {"tau", tau1}, {"vectors", matrix_to_json(frame.vectors)}}},
                 {"transported", {{"point", point_to_json(tm.frame.base.x)}, {"tau", tau2},
                                  {"raw", matrix_to_json(tm.transported)}, {"vectors", matrix_to_json(tm.frame.vectors)}}},
                 {"gram_drift", tm.drift}};
    write_file(prepare_out(cfg) / "transport.json", dump(j));
    return r.converged ? kExitOk : kExitSolver;
}

int cmd_walk(const Json& cfg, std::ostream& out) {
    const FlowManifold flow = config_flow(cfg);
    const WalkConfig wc = walk_config_from_config(cfg, flow);
    const WalkPath path = run_coupled_walk(wc);
    const std::filesystem::path dir = prepare_out(cfg);
    write_file(dir / "walk.csv", walk_to_csv(path));
    write_file(dir / "walk.json", dump(walk_to_json(path)));
    if (!path.records.empty())
        out << "Theta = " << std::setprecision(12) << path.records.back().theta << " at t = "
            << path.records.back().t << " (" << path.records.size() << " rows)\n";
    if (path.aborted) {
        out << "walk aborted: " << path.diagnostic << "\n";
        return kExitSolver;
    }
    return kExitOk;
}

void print_report(const ExperimentReport& r, std::ostream& out, int verbosity) {
    out << r.experiment << " on " << r.flow << ": " << (r.pass ? "PASS" : "FAIL")
        << (r.asserted ? "" : " (no assertion)") << "\n";
    if (!r.checks.empty()) {
        out << std::left << std::setw(28) << "check" << std::setw(12) << "passed" << std::setw(10) << "skipped"
            << "worst/tol\n";
        for (const auto& c : r.checks)
            out << std::setw(28) << c.name << std::setw(12)
                << (std::to_string(c.passed) + "/" + std::to_string(c.trials)) << std::setw(10) << c.skipped
                << format_number(c.worst) << (c.pass ? "" : "  FAIL") << "\n";
        out << std::right;
    }
    if (verbosity >= 1) {
        for (const auto& c : r.checkpoints)
            out << "  t = " << format_number(c.t) << "  mean = " << format_number(c.mean)
                << "  se = " << format_number(c.se) << "  n = " << c.n << "\n";
        for (const auto& p : r.paired)
            out << "  diff " << format_number(p.t_from) << " -> " << format_number(p.t_to) << ": "
                << format_number(p.mean) << " (se " << format_number(p.se) << ")" << (p.pass ? "" : "  FAIL")
                << "\n";
    }
    if (verbosity >= 2)
        for (const auto& n : r.notes) out << "  note: " << n << "\n";
}

int cmd_experiment(const Json& cfg, std::ostream& out) {
    const ExperimentSpec spec = experiment_spec_from_config(cfg);
    const ExperimentReport r = run_experiment(spec);
    const std::filesystem::path dir = prepare_out(cfg);
    write_file(dir / "report.json", dump(report_to_json(r)));
    write_file(dir / "report.csv", report_to_csv(r));
    write_file(dir / "report.svg", report_to_svg(r, spec.band));
    print_report(r, out, get_verbosity(cfg));
    return r.pass ? kExitOk : kExitAssertion;
}

int cmd_verify(const Json& cfg, const std::string& which, int trials, std::ostream& out) {
    if (trials < 0) throw ConfigError("--trials: must be non-negative");
    const std::uint64_t seed = get_seed(cfg);
    const int workers = get_workers(cfg);
    Json summary{{"pass", true}, {"trials", trials}, {"seed", seed}, {"flows", Json::array()}};
    bool matched = false;
    bool pass = true;
    for (const auto& [name, flow] : default_flows()) {
        if (which != "all" && which != name) continue;
        matched = true;
        ExperimentSpec spec;
        spec.kind = ExperimentKind::IdentitySuite;
        spec.flow = flow;
        spec.trials = trials;
        spec.seed = seed;
        spec.workers = workers;
        spec.x0.x = Vec::Zero(flow.dim());
        spec.y0 = spec.x0;
        const ExperimentReport r = experiment_identity_suite(spec);
        pass = pass && r.pass;
        Json entry = report_to_json(r);
        entry["name"] = name;
        summary["flows"].push_back(entry);
    }
    if (!matched) throw ConfigError("--flow: expected one of all, flat, sphere, hyperbolic, product");
    summary["pass"] = pass;
    out << summary.dump(2) << "\n";
    if (cfg.contains("out")) write_file(prepare_out(cfg) / "verify.json", dump(summary));
    return pass ? kExitOk : kExitAssertion;
}

}  // namespace

Json load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open " + path);
    try {
        return Json::parse(f);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("config: malformed JSON: ") + e.what());
    }
}

void apply_override(Json& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set: expected key=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value;
    try {
        value = Json::parse(text);
    } catch (const Json::parse_error&) {
        value = text;
    }
    Json* node = &cfg;
    std::stringstream ks(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ks, part, '.')) {
        if (part.empty()) throw ConfigError("--set: empty path component in '" + key + "'");
        parts.push_back(part);
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object()) throw ConfigError("--set: '" + key + "' descends into a non-object");
        node = &(*node)[parts[i]];
        if (node->is_null()) *node = Json::object();
    }
    if (!node->is_object()) throw ConfigError("--set: '" + key + "' descends into a non-object");
    (*node)[parts.back()] = value;
}

void validate_config(const Json& cfg) {
    require_object(cfg, "config", kTopLevel);
    for (const char* key : {"flow", "geodesic", "transport", "walk", "experiment"})
        if (cfg.contains(key) && !cfg.at(key).is_object()) throw ConfigError(std::string(key) + ": expected an object");
    get_seed(cfg);
    get_workers(cfg);
    get_verbosity(cfg);
    get_out(cfg);
    if (cfg.contains("flow")) flow_from_json(cfg.at("flow"), "flow");
}

WalkConfig walk_config_from_config(const Json& cfg, const FlowManifold& flow) {
    const Json empty = Json::object();
    const Json& w = cfg.contains("walk") ? cfg.at("walk") : empty;
    require_object(w, "walk", {"tau_bar1", "tau_bar2", "s_start", "epsilon", "x0", "y0", "max_steps", "replica",
                               "record_sigma", "solver"});
    WalkConfig wc;
    wc.flow = &flow;
    wc.tau_bar1 = get_number_or(w, "tau_bar1", "walk", 1.0);
    wc.tau_bar2 = get_number_or(w, "tau_bar2", "walk", 4.0);
    wc.s_start = get_number_or(w, "s_start", "walk", 1.0);
    wc.epsilon = get_number_or(w, "epsilon", "walk", 0.05);
    wc.x0 = point_or_origin(w, "x0", flow, "walk");
    wc.y0 = point_or_origin(w, "y0", flow, "walk");
    if (w.contains("max_steps")) {
        wc.max_steps = get_int(w, "max_steps", "walk");
    } else {
        if (!(wc.epsilon > 0.0)) throw ConfigError("walk.epsilon: must be positive");
        wc.max_steps = static_cast<int>(
            std::floor((flow.tau_max() / wc.tau_bar2 - wc.s_start) / (wc.epsilon * wc.epsilon) + 1e-9));
    }
    wc.replica = w.contains("replica") ? static_cast<std::uint64_t>(get_int(w, "replica", "walk")) : 0;
    wc.record_sigma = get_bool(w, "record_sigma", "walk", false);
    wc.solve = solver_of(w, "walk");
    wc.seed = get_seed(cfg);
    return wc;
}

ExperimentSpec experiment_spec_from_config(const Json& cfg) {
    ExperimentSpec spec;
    spec.flow = config_flow(cfg);
    const Json& e = section(cfg, "experiment");
    require_object(e, "experiment",
                   {"kind", "tau_bar1", "tau_bar2", "s_start", "epsilon", "checkpoints", "checkpoint_count",
                    "replicas", "x0", "y0", "band", "states", "draws", "sigma_band", "sigma_pass_fraction",
                    "samples", "batches", "trials", "max_failure_rate", "solver"});
    if (!e.contains("kind") || !e.at("kind").is_string()) throw ConfigError("experiment.kind: expected a string");
    try {
        spec.kind = experiment_kind_from_string(e.at("kind").get<std::string>());
    } catch (const ConfigError& err) {
        throw ConfigError(std::string("experiment.kind: ") + err.what());
    }
    const std::string w = "experiment";
    spec.tau_bar1 = get_number_or(e, "tau_bar1", w, spec.tau_bar1);
    spec.tau_bar2 = get_number_or(e, "tau_bar2", w, spec.tau_bar2);
    spec.s_start = get_number_or(e, "s_start", w, spec.s_start);
    spec.epsilon = get_number_or(e, "epsilon", w, spec.epsilon);
    if (!(spec.epsilon > 0.0)) throw ConfigError("experiment.epsilon: must be positive");
    if (!(spec.tau_bar2 > 0.0)) throw ConfigError("experiment.tau_bar2: must be positive");
    if (e.contains("checkpoints")) {
        spec.checkpoints = get_numbers(e, "checkpoints", w);
    } else {
        const int count = e.contains("checkpoint_count") ? get_int(e, "checkpoint_count", w) : 8;
        spec.checkpoints = default_checkpoints(spec.flow, spec.tau_bar2, spec.s_start, spec.epsilon, count);
    }
    if (e.contains("replicas")) spec.replicas = get_int(e, "replicas", w);
    spec.x0 = point_or_origin(e, "x0", spec.flow, w);
    spec.y0 = point_or_origin(e, "y0", spec.flow, w);
    spec.band = get_number_or(e, "band", w, spec.band);
    if (e.contains("states")) spec.states = get_int(e, "states", w);
    if (e.contains("draws")) spec.draws = get_int(e, "draws", w);
    spec.sigma_band = get_number_or(e, "sigma_band", w, spec.sigma_band);
    spec.sigma_pass_fraction = get_number_or(e, "sigma_pass_fraction", w, spec.sigma_pass_fraction);
    if (e.contains("samples")) spec.samples = get_int(e, "samples", w);
    if (e.contains("batches")) spec.batches = get_int(e, "batches", w);
    if (e.contains("trials")) spec.trials = get_int(e, "trials", w);
    spec.max_failure_rate = get_number_or(e, "max_failure_rate", w, spec.max_failure_rate);
    spec.solve = solver_of(e, w);
    spec.seed = get_seed(cfg);
    spec.workers = get_workers(cfg);
    if (spec.kind != ExperimentKind::IdentitySuite) checkpoint_steps(spec);
    return spec;
}

std::vector<std::pair<std::string, FlowManifold>> default_flows() {
    return {{"flat", FlowManifold::flat_torus({1.0, 1.0}, 1.0, 8.0)},
            {"sphere", FlowManifold::round_sphere(2, 1.0, 1.0, 8.0)},
            {"hyperbolic", FlowManifold::hyperbolic_space(2, 30.0, 1.0, 8.0)},
            {"product", FlowManifold::product_sphere_torus(2, 1.0, {1.0}, 1.0, 8.0)}};
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Coupled random walks and L-geometry on model backwards Ricci flows"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    std::uint64_t seed = 0;
    int workers = 0;
    std::string out_dir;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--seed", seed, "Master RNG seed");
    app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--set", sets, "Override a config value, key.path=value (repeatable)");

    auto* geodesic = app.add_subcommand("geodesic", "Minimal L-geodesic between two space-time points");
    auto* transport = app.add_subcommand("transport", "Space-time parallel transport of a frame");
    auto* walk = app.add_subcommand("walk", "One coupled random walk written as CSV");
    auto* experiment = app.add_subcommand("experiment", "Run a configured experiment");
    auto* verify = app.add_subcommand("verify", "Identity battery on the built-in model flows");
    std::string verify_flow = "all";
    int verify_trials = 100;
    verify->add_option("--flow", verify_flow, "all, flat, sphere, hyperbolic or product");
    verify->add_option("--trials", verify_trials, "Trials per check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return kExitOk;
        }
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        Json cfg = Json::object();
        if (!config_path.empty()) cfg = load_config(config_path);
        if (!cfg.is_object()) throw ConfigError("config: top level must be an object");
        if (app.count("--seed")) cfg["seed"] = seed;
        if (app.count("--workers")) cfg["workers"] = workers;
        if (app.count("--out")) cfg["out"] = out_dir;
        for (const auto& s : sets) apply_override(cfg, s);
        validate_config(cfg);
        if (*geodesic) return cmd_geodesic(cfg, out);
        if (*transport) return cmd_transport(cfg, out);
        if (*walk) return cmd_walk(cfg, out);
        if (*experiment) return cmd_experiment(cfg, out);
        if (*verify) return cmd_verify(cfg, verify_flow, verify_trials, out);
    } catch (const SolverError& e) {
        err << "solver error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Json::exception& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitSolver;
    }
    return kExitConfig;
}

}  // namespace ricci
