#ifndef RICCI_HARNESS_HPP
#define RICCI_HARNESS_HPP

#include "ricci/stats.hpp"
#include "ricci/walk.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ricci {

enum class ExperimentKind { SupermartingaleTheta, SigmaInequality, TransportCost, IdentitySuite };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::SupermartingaleTheta;
    FlowManifold flow;
    double tau_bar1 = 1.0;
    double tau_bar2 = 4.0;
    double s_start = 1.0;
    double epsilon = 0.05;
    /// Checkpoint times; each must sit on the walk grid s + eps^2 n.
    std::vector<double> checkpoints;
    int replicas = 1000;
    std::uint64_t seed = 1;
    int workers = 1;
    ChartPoint x0;
    ChartPoint y0;
    SolveOptions solve;
    double band = 2.0;

    // SigmaInequality
    int states = 50;
    int draws = 10000;
    double sigma_band = 3.0;
    double sigma_pass_fraction = 0.95;

    // TransportCost
    int samples = 256;
    int batches = 20;

    // IdentitySuite
    int trials = 100;

    double max_failure_rate = 0.01;
};

/// Walk step indices of the checkpoints; throws ConfigError when one is off the grid.
std::vector<int> checkpoint_steps(const ExperimentSpec& spec);
/// `count` checkpoints at steps round(k N / (count - 1)), N covering [s, tau_max / tau_bar2].
std::vector<double> default_checkpoints(const FlowManifold& flow, double tau_bar2, double s_start, double epsilon,
                                        int count);

struct CheckpointStat {
    double t = 0.0;
    double mean = 0.0;
    double se = 0.0;
    long n = 0;
};

struct PairedStat {
    double t_from = 0.0;
    double t_to = 0.0;
    double mean = 0.0;
    double se = 0.0;
    long n = 0;
    bool pass = true;
};

struct CheckResult {
    std::string name;
    long passed = 0;
    long trials = 0;
    long skipped = 0;
    /// Largest error-to-tolerance ratio over the trials; at most 1 when the check passes.
    double worst = 0.0;
    double tolerance = 0.0;
    bool pass = true;
};

struct StateStat {
    double t = 0.0;
    double estimate = 0.0;
    double se = 0.0;
    double rhs = 0.0;
    double exact = 0.0;
    bool pass = true;
};

struct ExperimentReport {
    std::string experiment;
    std::string flow;
    std::vector<CheckpointStat> checkpoints;
    std::vector<PairedStat> paired;
    std::vector<CheckResult> checks;
    std::vector<StateStat> states;
    bool pass = true;
    /// False when the statistics are degenerate and no assertion was made.
    bool asserted = true;
    std::map<std::string, double> diagnostics;
    std::vector<std::string> notes;
    /// Elapsed time; kept out of serialized reports so they stay reproducible.
    double wall_clock_seconds = 0.0;
};

struct EmpiricalCoupling {
    int n = 0;
    std::vector<int> permutation;
    double cost = 0.0;  // mean cost over the matched pairs
    std::vector<double> u;
    std::vector<double> v;
    bool certified = false;
};

/// Minimum-cost perfect matching by shortest augmenting paths with potentials.
EmpiricalCoupling optimal_assignment(const Eigen::MatrixXd& costs);
/// Dual feasibility and complementary slackness of a coupling, relative tolerance `tol`.
bool certify_assignment(const Eigen::MatrixXd& costs, const EmpiricalCoupling& c, double tol = 1e-9);

ExperimentReport experiment_supermartingale(const ExperimentSpec& spec);
ExperimentReport experiment_sigma_inequality(const ExperimentSpec& spec);
ExperimentReport experiment_transport_cost(const ExperimentSpec& spec);
ExperimentReport experiment_identity_suite(const ExperimentSpec& spec);
ExperimentReport run_experiment(const ExperimentSpec& spec);

}  // namespace ricci

#endif
