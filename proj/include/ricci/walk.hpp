#ifndef RICCI_WALK_HPP
#define RICCI_WALK_HPP

#include "ricci/lgeo.hpp"
#include "ricci/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ricci {

struct WalkConfig {
    const FlowManifold* flow = nullptr;
    double tau_bar1 = 1.0;
    double tau_bar2 = 4.0;
    double s_start = 1.0;
    double epsilon = 0.05;
    ChartPoint x0;
    ChartPoint y0;
    std::uint64_t seed = 0;
    std::uint64_t replica = 0;
    int max_steps = 0;
    SolveOptions solve;
    /// Also evaluate the second-order functional for the drawn increment at every step.
    bool record_sigma = false;

    /// Throws ConfigError when the walk would leave the flow interval.
    void validate() const;
    double time(int n) const;
};

struct WalkState {
    int n = 0;
    double t = 0.0;
    ChartPoint x;
    ChartPoint y;
    Frame frame_x;
    std::optional<LGeodesicResult> geodesic;
};

/// One row of a coupled path; zeta and sigma belong to the step that ended at row n.
struct WalkRecord {
    int n = 0;
    double t = 0.0;
    ChartPoint x;
    ChartPoint y;
    double lambda = 0.0;
    double theta = 0.0;
    double zeta = 0.0;
    double sigma = 0.0;
    bool has_step = false;
    bool has_sigma = false;
    std::string solver;
    int multiplicity = 1;
    bool floor_ok = true;
    double increment_ratio_error = 0.0;
    double frame_error = 0.0;
    double transport_drift = 0.0;
};

struct WalkPath {
    std::vector<WalkRecord> records;
    bool aborted = false;
    std::string diagnostic;
    long solves = 0;
    long retries = 0;
};

/// Lower floor on theta implied by the L lower bound.
double theta_floor(const FlowManifold& flow, double tau_bar1, double tau_bar2, double t);

/// Minimal geodesic with the retry policy: warm or full solve, then polyline only.
/// Returns nullopt when every attempt fails.
std::optional<LGeodesicResult> solve_with_retry(const FlowManifold& flow, const ChartPoint& x, double tau1,
                                                const ChartPoint& y, double tau2, const SolveOptions& opts,
                                                bool* retried);

struct StepOutcome {
    WalkState next;
    double zeta = 0.0;
    std::optional<double> sigma;
    double increment_ratio_error = 0.0;
    double transport_drift = 0.0;
};

/// Advances the coupled walk by one step using the geodesic cached in `state`.
StepOutcome coupled_step(const WalkState& state, const Vec& lam, const WalkConfig& cfg);

WalkPath run_coupled_walk(const WalkConfig& cfg);

struct SinglePath {
    std::vector<double> t;
    std::vector<ChartPoint> x;
};

SinglePath run_single_walk(const FlowManifold& flow, double tau_bar, double s_start, double epsilon,
                           const ChartPoint& x0, std::uint64_t seed, int max_steps, std::uint64_t stream = 0,
                           std::uint64_t substream = 0);

}  // namespace ricci

#endif
