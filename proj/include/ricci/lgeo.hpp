#ifndef RICCI_LGEO_HPP
#define RICCI_LGEO_HPP

#include "ricci/geometry.hpp"

#include <atomic>
#include <optional>
#include <string>
#include <vector>

namespace ricci {

/// A space-time curve sampled uniformly in s = sqrt(tau).
/// `velocity` holds dX/ds per node when known (shooting, closed form) and is
/// empty for bare polylines. The flow must outlive the curve.
struct LCurve {
    const FlowManifold* flow = nullptr;
    double tau1 = 0.0;
    double tau2 = 0.0;
    std::vector<double> s;
    std::vector<ChartPoint> points;
    std::vector<Vec> velocity;

    int segments() const { return static_cast<int>(s.size()) - 1; }
};

enum class SolveMethod { Auto, Numeric, ClosedForm };

std::string to_string(SolveMethod m);
SolveMethod solve_method_from_string(const std::string& name);

struct SolveOptions {
    int grid = 256;
    int descent_iterations = 500;
    int newton_iterations = 40;
    double residual_tol = 1e-7;
    SolveMethod method = SolveMethod::Auto;
    /// Initial Z guess in the chart of x; enables the warm-start path.
    std::optional<Vec> warm_start;
    /// Skip shooting and return the best descended polyline.
    bool polyline_only = false;
};

struct BoundCheck {
    double rho_T = 0.0;
    double sandwich_lower = 0.0;
    double sandwich_upper = 0.0;
    double velocity_max = 0.0;
    double velocity_bound = 0.0;
    bool sandwich_ok = true;
    bool velocity_ok = true;
};

struct LGeodesicResult {
    LCurve curve;
    double action = 0.0;
    TangentVec initial_z;
    bool converged = false;
    int multiplicity_hint = 0;
    double residual = 0.0;
    int descent_iterations = 0;
    int newton_iterations = 0;
    std::string method;
    BoundCheck bounds;
};

/// Process-wide tally of bound checks on every solved geodesic.
struct BoundAudit {
    std::atomic<long> solved{0};
    std::atomic<long> sandwich_violations{0};
    std::atomic<long> velocity_violations{0};
};
BoundAudit& bound_audit();

// Constants of the a-priori bounds.
struct VelocityConstants {
    double c1 = 1.0;
    double C1 = 0.0;
    double c2 = 0.0;
    double C2 = 0.0;
};
VelocityConstants velocity_constants(const FlowManifold& flow, double tau1, double tau2);
std::pair<double, double> sandwich_bounds(const FlowManifold& flow, double tau1, double tau2, double rho_T);
BoundCheck check_bounds(const FlowManifold& flow, const LCurve& curve, double action, const ChartPoint& x,
                        const ChartPoint& y);

double l_action(const LCurve& curve);
/// dX/ds at every node by fourth-order finite differences, in each node's chart.
std::vector<Vec> finite_difference_velocity(const LCurve& curve);

LCurve shoot(const FlowManifold& flow, const ChartPoint& x, double tau1, const Vec& z, double tau2,
             int grid = 256, double* action = nullptr);

/// Minimal L-geodesic through the model's closed form (time-reparametrized
/// frozen geodesic of the curved factor, straight line on torus factors).
LGeodesicResult closed_form_lgeodesic(const FlowManifold& flow, const ChartPoint& x, double tau1,
                                      const ChartPoint& y, double tau2, int grid = 256);

/// Action of the closed-form minimizer without building the curve.
double closed_form_action(const FlowManifold& flow, const ChartPoint& x, double tau1, const ChartPoint& y,
                          double tau2);

LGeodesicResult solve_min_lgeodesic(const FlowManifold& flow, const ChartPoint& x, double tau1,
                                    const ChartPoint& y, double tau2, const SolveOptions& opts = {});

double l_distance(const FlowManifold& flow, const ChartPoint& x, double tau1, const ChartPoint& y, double tau2,
                  const SolveOptions& opts = {});

double theta_from_l(int dim, double tau_bar1, double tau_bar2, double t, double l);
double theta(const FlowManifold& flow, double tau_bar1, double tau_bar2, double t, const ChartPoint& x,
             const ChartPoint& y, const SolveOptions& opts = {});

/// Space-time parallel transport of the columns of `xi` along the curve.
/// Returns the transported columns at every node, in that node's chart.
std::vector<Mat> transport_along(const LCurve& curve, const Mat& xi);
Vec space_time_transport(const LCurve& curve, const Vec& xi);

struct TransportMap {
    Frame source;
    Mat transported;  // raw transported columns at (y, tau2)
    Frame frame;      // re-orthonormalized at g(tau2)
    double drift = 0.0;
    std::vector<Mat> along;
};
TransportMap transport_frame(const FlowManifold& flow, const LGeodesicResult& geodesic, const Frame& frame,
                             bool keep_along = false);
TransportMap transport_frame(const FlowManifold& flow, const ChartPoint& x, double tau1, const ChartPoint& y,
                             double tau2, const Frame& frame, const SolveOptions& opts = {});
double gram_drift(const FlowManifold& flow, const LCurve& curve, const Mat& source, const Mat& transported);

struct EndpointDerivatives {
    double d_tau1 = 0.0;
    double d_tau2 = 0.0;
};
EndpointDerivatives dL_boundary(const FlowManifold& flow, const LGeodesicResult& result);

struct LambdaRate {
    double integral = 0.0;
    double boundary = 0.0;
};
LambdaRate dLambda_dt(const FlowManifold& flow, double tau_bar1, double tau_bar2, double t,
                      const LGeodesicResult& result);

/// Quadratic model of the second-order part of the coupled increment:
/// for a unit-ball draw lambda, sigma(lambda) = base + lambda' Q lambda.
struct SigmaForm {
    double t = 0.0;
    double lambda = 0.0;
    double base = 0.0;
    Mat q;
    double rhs = 0.0;
    double expectation() const;
    double evaluate(const Vec& lam) const;
};
SigmaForm sigma_form(const FlowManifold& flow, double tau_bar1, double tau_bar2, double t,
                     const LGeodesicResult& result, const Frame& source);
/// The same functional assembled term by term along the curve, for cross-checks.
double sigma_direct(const FlowManifold& flow, double tau_bar1, double tau_bar2, double t,
                    const LGeodesicResult& result, const Frame& source, const Vec& lam);

struct HessianReport {
    double t = 0.0;
    double lambda = 0.0;
    double lhs = 0.0;            // sum of Hessians by second differences
    double rhs = 0.0;            // closed trace form
    double rhs_h_form = 0.0;     // same bound assembled from the H-form per field
    double dlambda_dt = 0.0;
    double combined_lhs = 0.0;
    double combined_rhs = 0.0;
    int multiplicity_hint = 0;
    bool hessian_ok = false;
    bool combined_ok = false;
};
HessianReport hessian_bound_check(const FlowManifold& flow, double tau_bar1, double tau_bar2, double t,
                                  const ChartPoint& x, const ChartPoint& y, const SolveOptions& opts = {});

struct FirstVariationReport {
    double finite_difference = 0.0;
    double predicted = 0.0;        // 2 sqrt(tau) <gamma', xi> at both ends
    double displayed = 0.0;        // the coefficient sqrt(2t) tau_bar form, half of the above
    double relative_error = 0.0;
};
FirstVariationReport first_variation_check(const FlowManifold& flow, double tau_bar1, double tau_bar2, double t,
                                           const ChartPoint& x, const ChartPoint& y, const Vec& lam,
                                           const SolveOptions& opts = {});

}  // namespace ricci

#endif
