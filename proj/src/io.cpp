#include "ricci/io.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace ricci {

using namespace detail;

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

std::string short_number(double v, int digits) {
    if (!std::isfinite(v)) return format_number(v);
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, digits);
    return std::string(buf, res.ptr);
}

}  // namespace

Json vector_to_json(const Vec& v) {
    Json a = Json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

Json matrix_to_json(const Mat& m) {
    Json a = Json::array();
    for (int i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        a.push_back(row);
    }
    return a;
}

Json flow_to_json(const FlowManifold& flow) {
    Json params = Json::object();
    switch (flow.kind()) {
    case FlowKind::FlatTorus: params["periods"] = flow.periods(); break;
    case FlowKind::RoundSphere: params["r0"] = flow.r0(); break;
    case FlowKind::HyperbolicSpace: params["c0"] = flow.c0(); break;
    case FlowKind::ProductSphereTorus:
        params["r0"] = flow.r0();
        params["periods"] = flow.periods();
        break;
    }
    return Json{{"kind", to_string(flow.kind())},
                {"dim", flow.dim()},
                {"params", params},
                {"tau_min", flow.tau_min()},
                {"tau_max", flow.tau_max()}};
}

FlowManifold flow_from_json(const Json& j, const std::string& where) {
    require_object(j, where, {"kind", "dim", "params", "tau_min", "tau_max"});
    if (!j.contains("kind") || !j.at("kind").is_string()) throw ConfigError(where + ".kind: expected a string");
    FlowKind kind;
    try {
        kind = flow_kind_from_string(j.at("kind").get<std::string>());
    } catch (const ConfigError& e) {
        throw ConfigError(where + ".kind: " + e.what());
    }
    const int dim = get_int(j, "dim", where);
    const double tau_min = get_number(j, "tau_min", where);
    const double tau_max = get_number(j, "tau_max", where);
    const Json params = j.contains("params") ? j.at("params") : Json::object();
    const std::string pw = where + ".params";
    try {
        switch (kind) {
        case FlowKind::FlatTorus: {
            require_object(params, pw, {"periods"});
            std::vector<double> periods(std::max(dim, 0), 1.0);
            if (params.contains("periods")) periods = get_numbers(params, "periods", pw);
            if (static_cast<int>(periods.size()) != dim)
                throw ConfigError(pw + ".periods: length must equal dim");
            return FlowManifold::flat_torus(periods, tau_min, tau_max);
        }
        case FlowKind::RoundSphere:
            require_object(params, pw, {"r0"});
            return FlowManifold::round_sphere(dim, get_number_or(params, "r0", pw, 1.0), tau_min, tau_max);
        case FlowKind::HyperbolicSpace:
            require_object(params, pw, {"c0"});
            return FlowManifold::hyperbolic_space(dim, get_number(params, "c0", pw), tau_min, tau_max);
        case FlowKind::ProductSphereTorus: {
            require_object(params, pw, {"r0", "periods"});
            const std::vector<double> periods =
                params.contains("periods") ? get_numbers(params, "periods", pw) : std::vector<double>{1.0};
            const int m = dim - static_cast<int>(periods.size());
            return FlowManifold::product_sphere_torus(m, get_number_or(params, "r0", pw, 1.0), periods, tau_min,
                                                      tau_max);
        }
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError(where + ": unsupported flow");
}

Json point_to_json(const ChartPoint& p) {
    return Json{{"chart", p.chart}, {"x", vector_to_json(p.x)}};
}

ChartPoint point_from_json(const Json& j, const FlowManifold& flow, const std::string& where) {
    ChartPoint p;
    std::vector<double> xs;
    if (j.is_array()) {
        for (const auto& v : j) {
            if (!v.is_number()) throw ConfigError(where + ": expected an array of numbers");
            xs.push_back(v.get<double>());
        }
    } else {
        require_object(j, where, {"chart", "x"});
        if (j.contains("chart")) p.chart = get_int(j, "chart", where);
        xs = get_numbers(j, "x", where);
    }
    if (static_cast<int>(xs.size()) != flow.dim()) throw ConfigError(where + ": point has wrong dimension");
    p.x = Vec(flow.dim());
    for (int i = 0; i < flow.dim(); ++i) p.x(i) = xs[i];
    try {
        flow.validate(p);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
    return flow.normalize(p);
}

Json solve_options_to_json(const SolveOptions& o) {
    return Json{{"grid", o.grid},
                {"descent_iterations", o.descent_iterations},
                {"newton_iterations", o.newton_iterations},
                {"residual_tol", o.residual_tol},
                {"method", to_string(o.method)}};
}

SolveOptions solve_options_from_json(const Json& j, const std::string& where) {
    require_object(j, where, {"grid", "descent_iterations", "newton_iterations", "residual_tol", "method"});
    SolveOptions o;
    if (j.contains("grid")) o.grid = get_int(j, "grid", where);
    if (j.contains("descent_iterations")) o.descent_iterations = get_int(j, "descent_iterations", where);
    if (j.contains("newton_iterations")) o.newton_iterations = get_int(j, "newton_iterations", where);
    if (j.contains("residual_tol")) o.residual_tol = get_number(j, "residual_tol", where);
    if (j.contains("method")) {
        if (!j.at("method").is_string()) throw ConfigError(where + ".method: expected a string");
        try {
            o.method = solve_method_from_string(j.at("method").get<std::string>());
        } catch (const std::exception& e) {
            throw ConfigError(where + ".method: " + e.what());
        }
    }
    if (o.grid < 8) throw ConfigError(where + ".grid: must be at least 8");
    if (o.descent_iterations < 0 || o.newton_iterations < 1)
        throw ConfigError(where + ": iteration caps must be positive");
    if (!(o.residual_tol > 0.0)) throw ConfigError(where + ".residual_tol: must be positive");
    return o;
}

Json curve_to_json(const LCurve& curve) {
    Json pts = Json::array();
    for (const auto& p : curve.points) pts.push_back(point_to_json(p));
    return Json{{"tau1", curve.tau1}, {"tau2", curve.tau2}, {"s", curve.s}, {"points", pts}};
}

Json geodesic_to_json(const LGeodesicResult& r) {
    return Json{{"action", r.action},
                {"Z", vector_to_json(r.initial_z.v)},
                {"Z_chart", r.initial_z.base.x.chart},
                {"converged", r.converged},
                {"multiplicity_hint", r.multiplicity_hint},
                {"residual", r.residual},
                {"descent_iterations", r.descent_iterations},
                {"newton_iterations", r.newton_iterations},
                {"method", r.method},
                {"bounds",
                 {{"rho_T", r.bounds.rho_T},
                  {"sandwich_lower", r.bounds.sandwich_lower},
                  {"sandwich_upper", r.bounds.sandwich_upper},
                  {"velocity_max", r.bounds.velocity_max},
                  {"velocity_bound", r.bounds.velocity_bound},
                  {"sandwich_ok", r.bounds.sandwich_ok},
                  {"velocity_ok", r.bounds.velocity_ok}}},
                {"curve", curve_to_json(r.curve)}};
}

Json walk_to_json(const WalkPath& path) {
    Json rows = Json::array();
    for (const WalkRecord& r : path.records) {
        Json row{{"n", r.n},
                 {"t", r.t},
                 {"x", point_to_json(r.x)},
                 {"y", point_to_json(r.y)},
                 {"Lambda", r.lambda},
                 {"Theta", r.theta},
                 {"solver", r.solver},
                 {"multiplicity", r.multiplicity},
                 {"floor_ok", r.floor_ok},
                 {"frame_error", r.frame_error}};
        if (r.has_step) {
            row["zeta"] = r.zeta;
            row["increment_ratio_error"] = r.increment_ratio_error;
            row["transport_drift"] = r.transport_drift;
        }
        if (r.has_sigma) row["sigma"] = r.sigma;
        rows.push_back(row);
    }
    return Json{{"records", rows},
                {"aborted", path.aborted},
                {"diagnostic", path.diagnostic},
                {"solves", path.solves},
                {"retries", path.retries}};
}

Json report_to_json(const ExperimentReport& r) {
    Json cps = Json::array();
    for (const auto& c : r.checkpoints) cps.push_back({{"t", c.t}, {"mean", c.mean}, {"se", c.se}, {"n", c.n}});
    Json paired = Json::array();
    for (const auto& p : r.paired)
        paired.push_back({{"t_from", p.t_from},
                          {"t_to", p.t_to},
                          {"mean", p.mean},
                          {"se", p.se},
                          {"n", p.n},
                          {"pass", p.pass}});
    Json checks = Json::array();
    for (const auto& c : r.checks)
        checks.push_back({{"name", c.name},
                          {"passed", c.passed},
                          {"trials", c.trials},
                          {"skipped", c.skipped},
                          {"worst_ratio", c.worst},
                          {"tolerance", c.tolerance},
                          {"pass", c.pass}});
    Json states = Json::array();
    for (const auto& s : r.states)
        states.push_back({{"t", s.t},
                          {"estimate", s.estimate},
                          {"se", s.se},
                          {"rhs", s.rhs},
                          {"exact", s.exact},
                          {"pass", s.pass}});
    Json diag = Json::object();
    for (const auto& [k, v] : r.diagnostics) diag[k] = v;
    return Json{{"experiment", r.experiment},
                {"flow", r.flow},
                {"pass", r.pass},
                {"asserted", r.asserted},
                {"checkpoints", cps},
                {"paired", paired},
                {"checks", checks},
                {"states", states},
                {"diagnostics", diag},
                {"notes", r.notes}};
}

std::string walk_to_csv(const WalkPath& path) {
    std::ostringstream os;
    const int d = path.records.empty() ? 0 : static_cast<int>(path.records.front().x.x.size());
    os << "n,t,x_chart";
    for (int i = 0; i < d; ++i) os << ",x" << i;
    os << ",y_chart";
    for (int i = 0; i < d; ++i) os << ",y" << i;
    os << ",Lambda,Theta,zeta,sigma,multiplicity,floor_ok,solver_flags\n";
    for (const WalkRecord& r : path.records) {
        os << r.n << ',' << format_number(r.t) << ',' << r.x.chart;
        for (int i = 0; i < d; ++i) os << ',' << format_number(r.x.x(i));
        os << ',' << r.y.chart;
        for (int i = 0; i < d; ++i) os << ',' << format_number(r.y.x(i));
        os << ',' << format_number(r.lambda) << ',' << format_number(r.theta) << ',';
        if (r.has_step) os << format_number(r.zeta);
        os << ',';
        if (r.has_sigma) os << format_number(r.sigma);
        os << ',' << r.multiplicity << ',' << (r.floor_ok ? 1 : 0) << ',' << r.solver << '\n';
    }
    return os.str();
}

std::string report_to_csv(const ExperimentReport& r) {
    std::ostringstream os;
    if (!r.checks.empty() || r.experiment == "identity_suite") {
        os << "check,passed,trials,skipped,worst_ratio,tolerance,pass\n";
        for (const auto& c : r.checks)
            os << c.name << ',' << c.passed << ',' << c.trials << ',' << c.skipped << ',' << format_number(c.worst)
               << ',' << format_number(c.tolerance) << ',' << (c.pass ? 1 : 0) << '\n';
    } else if (!r.states.empty()) {
        os << "t,estimate,se,rhs,exact,pass\n";
        for (const auto& s : r.states)
            os << format_number(s.t) << ',' << format_number(s.estimate) << ',' << format_number(s.se) << ','
               << format_number(s.rhs) << ',' << format_number(s.exact) << ',' << (s.pass ? 1 : 0) << '\n';
    } else {
        os << "t,mean,se,n,diff_from_previous,diff_se,pass\n";
        for (std::size_t k = 0; k < r.checkpoints.size(); ++k) {
            const auto& c = r.checkpoints[k];
            os << format_number(c.t) << ',' << format_number(c.mean) << ',' << format_number(c.se) << ',' << c.n;
            if (k > 0 && k - 1 < r.paired.size()) {
                const auto& p = r.paired[k - 1];
                os << ',' << format_number(p.mean) << ',' << format_number(p.se) << ',' << (p.pass ? 1 : 0);
            } else {
                os << ",,,";
            }
            os << '\n';
        }
    }
    return os.str();
}

std::string report_to_svg(const ExperimentReport& r, double band) {
    const double w = 640, h = 400, left = 70, right = 20, top = 40, bottom = 50;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" viewBox=\"0 0 "
       << w << ' ' << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
       << r.experiment << " on " << r.flow << (r.pass ? " (pass)" : " (fail)") << "</text>\n";
    std::vector<const CheckpointStat*> pts;
    for (const auto& c : r.checkpoints)
        if (std::isfinite(c.mean)) pts.push_back(&c);
    if (pts.empty()) {
        os << "<text x=\"" << w / 2 << "\" y=\"" << h / 2
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">no checkpoint series</text>\n";
        os << "</svg>\n";
        return os.str();
    }
    auto half = [&](const CheckpointStat* c) { return std::isfinite(c->se) ? band * c->se : 0.0; };
    double tmin = pts.front()->t, tmax = pts.front()->t, ymin = pts.front()->mean, ymax = ymin;
    for (const auto* c : pts) {
        tmin = std::min(tmin, c->t);
        tmax = std::max(tmax, c->t);
        ymin = std::min(ymin, c->mean - half(c));
        ymax = std::max(ymax, c->mean + half(c));
    }
    if (tmax == tmin) {
        tmin -= 0.5;
        tmax += 0.5;
    }
    if (ymax == ymin) {
        ymin -= 0.5 * (1.0 + std::abs(ymin));
        ymax += 0.5 * (1.0 + std::abs(ymax));
    }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    auto px = [&](double t) { return left + (t - tmin) / (tmax - tmin) * (w - left - right); };
    auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * (h - top - bottom); };
    auto coord = [&](double x, double y) { return short_number(x, 6) + "," + short_number(y, 6); };

    os << "<g stroke=\"black\" stroke-width=\"1\">\n";
    os << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
       << "\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom << "\"/>\n";
    os << "</g>\n<g font-family=\"sans-serif\" font-size=\"10\">\n";
    for (int k = 0; k <= 4; ++k) {
        const double t = tmin + (tmax - tmin) * k / 4.0;
        const double y = ymin + (ymax - ymin) * k / 4.0;
        os << "<text x=\"" << short_number(px(t), 6) << "\" y=\"" << h - bottom + 15
           << "\" text-anchor=\"middle\">" << short_number(t, 4) << "</text>\n";
        os << "<text x=\"" << left - 5 << "\" y=\"" << short_number(py(y) + 3, 6) << "\" text-anchor=\"end\">"
           << short_number(y, 4) << "</text>\n";
    }
    os << "<text x=\"" << (left + w - right) / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\">t</text>\n";
    os << "</g>\n";

    os << "<polygon fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\" points=\"";
    for (const auto* c : pts) os << coord(px(c->t), py(c->mean + half(c))) << ' ';
    for (auto it = pts.rbegin(); it != pts.rend(); ++it) os << coord(px((*it)->t), py((*it)->mean - half(*it))) << ' ';
    os << "\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\" points=\"";
    for (const auto* c : pts) os << coord(px(c->t), py(c->mean)) << ' ';
    os << "\"/>\n";
    for (const auto* c : pts)
        os << "<circle cx=\"" << short_number(px(c->t), 6) << "\" cy=\"" << short_number(py(c->mean), 6)
           << "\" r=\"3\" fill=\"#08519c\"/>\n";
    os << "<text x=\"" << w - right << "\" y=\"" << top - 5
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">mean &#177; " << short_number(band, 3)
       << " SE</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace ricci
