#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ricci/cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace ricci;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "ricci");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("ricci_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write(const fs::path& dir, const std::string& name, const std::string& text) {
    const fs::path p = dir / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

const std::string kFlat =
    R"("flow": {"kind": "flat_torus", "dim": 2, "params": {"periods": [10, 10]}, "tau_min": 1, "tau_max": 8})";
const std::string kUnitFlat =
    R"("flow": {"kind": "flat_torus", "dim": 2, "params": {"periods": [1, 1]}, "tau_min": 1, "tau_max": 8})";

}  // namespace

TEST_CASE("geodesic subcommand") {
    const fs::path dir = scratch("geodesic");
    const fs::path cfg = write(dir, "g.json", "{" + kFlat + R"(, "geodesic": {"x": [0, 0], "y": [1, 0], "tau1": 1, "tau2": 4}})");
    const Run r = run({"geodesic", "--config", cfg.string(), "--out", (dir / "o").string()});
    CHECK(r.code == kExitOk);
    CHECK(r.out.rfind("L = 0.5\n", 0) == 0);
    CHECK(fs::exists(dir / "o" / "geodesic.json"));
    const Json j = Json::parse(slurp(dir / "o" / "geodesic.json"));
    CHECK(j.at("action").get<double>() == doctest::Approx(0.5).epsilon(1e-6));

    const Run same = run({"geodesic", "--config", cfg.string(), "--out", (dir / "o").string(), "--set",
                          "geodesic.y=[0, 0]"});
    CHECK(same.code == kExitOk);
    CHECK(same.out.rfind("L = 0\n", 0) == 0);
}

TEST_CASE("configuration errors exit with code 1") {
    const fs::path dir = scratch("errors");
    const fs::path bad = write(dir, "bad.json", "{bad");
    CHECK(run({"geodesic", "--config", bad.string()}).code == kExitConfig);

    const fs::path unknown =
        write(dir, "u.json", "{" + kFlat + R"(, "geodesic": {"x": [0, 0], "y": [1, 0], "tau1": 1, "tau2": 4, "foo": 1}})");
    const Run u = run({"geodesic", "--config", unknown.string(), "--out", dir.string()});
    CHECK(u.code == kExitConfig);
    CHECK(u.err.find("geodesic.foo") != std::string::npos);

    const fs::path top = write(dir, "t.json", "{" + kFlat + R"(, "colour": 1})");
    const Run t = run({"walk", "--config", top.string()});
    CHECK(t.code == kExitConfig);
    CHECK(t.err.find("colour") != std::string::npos);

    const fs::path order = write(dir, "o.json", "{" + kFlat + R"(, "geodesic": {"x": [0, 0], "y": [1, 0], "tau1": 4, "tau2": 1}})");
    CHECK(run({"geodesic", "--config", order.string(), "--out", dir.string()}).code == kExitConfig);

    CHECK(run({"geodesic", "--config", (dir / "missing.json").string()}).code == kExitConfig);
    CHECK(run({"nonsense"}).code == kExitConfig);
    CHECK(run({"walk", "--workers", "0"}).code == kExitConfig);
}

TEST_CASE("unconverged solve exits with code 2") {
    const fs::path dir = scratch("solver");
    const fs::path cfg = write(dir, "s.json",
                               R"({"flow": {"kind": "round_sphere", "dim": 2, "params": {"r0": 1}, "tau_min": 1, "tau_max": 8},
        "geodesic": {"x": [0, 0], "y": [0.9, 0.3], "tau1": 1, "tau2": 4,
                     "solver": {"method": "numeric", "residual_tol": 1e-300, "newton_iterations": 1}}})");
    const Run r = run({"geodesic", "--config", cfg.string(), "--out", dir.string()});
    CHECK(r.code == kExitSolver);
}

TEST_CASE("walk subcommand") {
    const fs::path dir = scratch("walk");
    const fs::path cfg = write(dir, "w.json", "{" + kUnitFlat + R"(, "walk": {"y0": [0.2, 0.1], "max_steps": 40}})");
    const Run a = run({"walk", "--config", cfg.string(), "--seed", "5", "--out", (dir / "a").string()});
    const Run b = run({"walk", "--config", cfg.string(), "--seed", "5", "--out", (dir / "b").string()});
    const Run c = run({"walk", "--config", cfg.string(), "--seed", "6", "--out", (dir / "c").string()});
    REQUIRE(a.code == kExitOk);
    REQUIRE(b.code == kExitOk);
    REQUIRE(c.code == kExitOk);
    const std::string csv = slurp(dir / "a" / "walk.csv");
    CHECK(csv == slurp(dir / "b" / "walk.csv"));
    CHECK(csv != slurp(dir / "c" / "walk.csv"));
    CHECK(csv.find('\r') == std::string::npos);
    CHECK(a.out.find("Theta = ") != std::string::npos);

    std::istringstream lines(csv);
    std::string header, row;
    std::getline(lines, header);
    CHECK(header.rfind("n,t,", 0) == 0);
    int floor_col = -1, col = 0;
    std::stringstream hs(header);
    for (std::string cell; std::getline(hs, cell, ','); ++col)
        if (cell == "floor_ok") floor_col = col;
    REQUIRE(floor_col >= 0);
    int rows = 0;
    while (std::getline(lines, row)) {
        ++rows;
        std::stringstream rs(row);
        std::string cell;
        for (int k = 0; k <= floor_col; ++k) std::getline(rs, cell, ',');
        CHECK(cell == "1");
    }
    CHECK(rows == 41);

    const Run zero = run({"walk", "--config", cfg.string(), "--set", "walk.max_steps=0", "--out", (dir / "z").string()});
    CHECK(zero.code == kExitOk);
    const std::string z = slurp(dir / "z" / "walk.csv");
    CHECK(std::count(z.begin(), z.end(), '\n') == 2);
}

TEST_CASE("experiment subcommand") {
    const fs::path dir = scratch("experiment");
    const fs::path cfg = write(dir, "e.json", "{" + kUnitFlat +
                                                  R"(, "experiment": {"kind": "supermartingale_theta", "replicas": 60,
        "checkpoint_count": 4, "y0": [0.2, 0.1]}, "seed": 7})");
    const Run one = run({"experiment", "--config", cfg.string(), "--workers", "1", "--out", (dir / "w1").string()});
    const Run four = run({"experiment", "--config", cfg.string(), "--workers", "4", "--out", (dir / "w4").string()});
    CHECK(one.code == kExitOk);
    CHECK(four.code == kExitOk);
    CHECK(slurp(dir / "w1" / "report.json") == slurp(dir / "w4" / "report.json"));
    CHECK(slurp(dir / "w1" / "report.svg") == slurp(dir / "w4" / "report.svg"));
    CHECK(slurp(dir / "w1" / "report.svg").rfind("<svg", 0) == 0);
    CHECK(fs::exists(dir / "w1" / "report.csv"));
    const Json rep = Json::parse(slurp(dir / "w1" / "report.json"));
    CHECK(rep.at("pass").get<bool>());
    CHECK(rep.at("checkpoints").size() == 4);

    const Run off = run({"experiment", "--config", cfg.string(), "--set", "experiment.checkpoints=[1.0, 1.001]",
                         "--out", (dir / "off").string()});
    CHECK(off.code == kExitConfig);
    CHECK(off.err.find("walk grid") != std::string::npos);

    const Run fail = run({"experiment", "--config", cfg.string(), "--set", "experiment.band=-1000", "--out",
                          (dir / "fail").string()});
    CHECK(fail.code == kExitAssertion);

    const fs::path id = write(dir, "id.json", "{" + kUnitFlat + R"(, "experiment": {"kind": "identity_suite", "trials": 2}})");
    const Run suite = run({"experiment", "--config", id.string(), "--out", (dir / "id").string()});
    CHECK(suite.code == kExitOk);
    CHECK(suite.out.find("transport_isometry") != std::string::npos);
    CHECK(suite.out.find("flow_equation") != std::string::npos);
}

TEST_CASE("verify subcommand") {
    const fs::path dir = scratch("verify");
    const Run empty = run({"verify", "--trials", "0", "--out", dir.string()});
    CHECK(empty.code == kExitOk);
    const Run sphere = run({"verify", "--flow", "sphere", "--trials", "10", "--out", dir.string()});
    CHECK(sphere.code == kExitOk);
    const Json j = Json::parse(sphere.out);
    CHECK(j.is_object());
    CHECK(fs::exists(dir / "verify.json"));
    CHECK(run({"verify", "--flow", "torus-ish", "--trials", "1"}).code == kExitConfig);
}

TEST_CASE("overrides and validation") {
    Json cfg = Json::object();
    apply_override(cfg, "walk.epsilon=0.1");
    apply_override(cfg, "out=some/dir");
    apply_override(cfg, "walk.x0=[0.5, 0.5]");
    CHECK(cfg["walk"]["epsilon"].get<double>() == 0.1);
    CHECK(cfg["out"].get<std::string>() == "some/dir");
    CHECK(cfg["walk"]["x0"].size() == 2);
    CHECK_THROWS_AS(apply_override(cfg, "no_equals_sign"), ConfigError);
    CHECK_NOTHROW(validate_config(cfg));
    cfg["bogus"] = 1;
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);

    const auto flows = default_flows();
    CHECK(flows.size() == 4);
    for (const auto& [name, flow] : flows) {
        const Json j = flow_to_json(flow);
        const FlowManifold back = flow_from_json(j);
        CHECK(flow_to_json(back).dump() == j.dump());
    }
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(-2.5e-10) == "-2.5e-10");
}
