#ifndef RICCI_GEOMETRY_HPP
#define RICCI_GEOMETRY_HPP

#include "ricci/types.hpp"

#include <array>
#include <string>
#include <vector>

namespace ricci {

enum class FlowKind { FlatTorus, RoundSphere, HyperbolicSpace, ProductSphereTorus };

std::string to_string(FlowKind kind);
FlowKind flow_kind_from_string(const std::string& name);

/// A point in one chart of the atlas. Sphere factors use two stereographic
/// charts (0 projects from the south pole, 1 from the north pole); torus
/// factors use periodic coordinates reduced into [0, period).
struct ChartPoint {
    int chart = 0;
    Vec x;
};

struct SpaceTimePoint {
    ChartPoint x;
    double tau = 0.0;
};

struct TangentVec {
    SpaceTimePoint base;
    Vec v;
};

/// Columns of `vectors` are the frame vectors, in the chart of `base`.
struct Frame {
    SpaceTimePoint base;
    Mat vectors;
};

/// Christoffel symbols, gamma[k](i, j) = Γ^k_ij.
struct Christoffel {
    int dim = 0;
    std::array<Mat, kMaxDim> gamma;
    Vec contract(const Vec& a, const Vec& b) const;
};

/// Every curvature quantity at one space-time point, in chart components.
struct CurvaturePack {
    int dim = 0;
    Mat g;
    Mat g_inv;
    Christoffel christoffel;
    std::vector<double> rm;      // Rm_{ijkl}, index ((i*d + j)*d + k)*d + l
    Mat ric;                     // Ric_ij
    Mat ric_sharp;               // (Ric♯)^i_j
    double scalar = 0.0;
    Vec grad_scalar;             // (∇R)^i
    Mat hess_scalar;             // (Hess R)_ij
    double lap_scalar = 0.0;
    double ric_norm2 = 0.0;
    Mat dric_dtau;               // (∂Ric/∂τ)_ij
    std::vector<double> cov_ric; // (∇_k Ric)_ij, index (i*d + j)*d + k

    double riemann(int i, int j, int k, int l) const {
        return rm[((i * dim + j) * dim + k) * dim + l];
    }
    double nabla_ric(int i, int j, int k) const { return cov_ric[(i * dim + j) * dim + k]; }
};

/// A model backwards Ricci flow ∂g/∂τ = 2Ric on a homogeneous space.
///
/// Sign convention: Rm(X,Y,Z,W) = <R(X,Y)W, Z>, so that Rm(X,Y,Y,X) is minus
/// the sectional curvature of span{X,Y} times |X∧Y|², and
/// Ric_jk = g^{il} Rm_{ijlk}.
class FlowManifold {
public:
    static FlowManifold flat_torus(std::vector<double> periods, double tau_min, double tau_max);
    static FlowManifold round_sphere(int dim, double r0, double tau_min, double tau_max);
    static FlowManifold hyperbolic_space(int dim, double c0, double tau_min, double tau_max);
    static FlowManifold product_sphere_torus(int sphere_dim, double r0, std::vector<double> periods,
                                             double tau_min, double tau_max);

    FlowKind kind() const { return kind_; }
    int dim() const { return dim_; }
    int sphere_dim() const { return curved_dim_; }
    int torus_dim() const { return static_cast<int>(periods_.size()); }
    double tau_min() const { return tau_min_; }
    double tau_max() const { return tau_max_; }
    const std::vector<double>& periods() const { return periods_; }
    double r0() const { return r0_; }
    double c0() const { return c0_; }

    /// Bound on |Rm| and |Ric| over the whole flow interval.
    double curvature_bound() const { return c0_bound_; }
    /// Bound on |∇Rm|; every model is locally symmetric.
    double gradient_bound() const { return 0.0; }

    /// Conformal scale of the curved factor at time tau (r² or c); 1 when flat.
    double scale(double tau) const;
    double scale_rate() const;

    void check_time(double tau) const;
    bool has_curved_factor() const { return curved_dim_ > 0; }
    bool curved_is_sphere() const { return kind_ == FlowKind::RoundSphere || kind_ == FlowKind::ProductSphereTorus; }

    // Chart handling.
    ChartPoint normalize(const ChartPoint& p) const;
    void validate(const ChartPoint& p) const;
    /// Coordinates of p in the chart of ref; torus factors use the image nearest ref.
    Vec coords_near(const ChartPoint& p, const ChartPoint& ref) const;
    /// Differential of the transition from p's chart into `target_chart`, at p.
    Mat transition_jacobian(const ChartPoint& p, int target_chart) const;
    Vec push_vector(const ChartPoint& p, const Vec& v, int target_chart) const;
    ChartPoint to_chart(const ChartPoint& p, int target_chart) const;

    // Closed-form local geometry at chart coordinates u (charts share formulas).
    Mat metric(const Vec& u, double tau) const;
    Mat metric_inverse(const Vec& u, double tau) const;
    Mat metric_dtau(const Vec& u, double tau) const;
    double inner(const Vec& u, double tau, const Vec& a, const Vec& b) const;
    double norm2(const Vec& u, double tau, const Vec& a) const { return inner(u, tau, a, a); }
    Christoffel christoffel(const Vec& u) const;
    /// Γ(a,b)^k = Γ^k_ij a^i b^j without building the full tensor.
    Vec gamma_contract(const Vec& u, const Vec& a, const Vec& b) const;
    /// q_l = ½ aᵀ(∂_l g)a, the coordinate gradient of ½|a|²_g at fixed components.
    Vec metric_gradient_quadratic(const Vec& u, double tau, const Vec& a) const;
    Mat ricci(const Vec& u, double tau) const;
    Mat ricci_sharp(const Vec& u, double tau) const;
    double scalar(double tau) const;
    Vec grad_scalar(const Vec& u, double tau) const;
    double ricci_norm2(double tau) const;
    /// Rm(a,b,b,a) under the convention documented on the class.
    double rm_quadratic(const Vec& u, double tau, const Vec& a, const Vec& b) const;

    // Embedding helpers for the curved factor.
    Eigen::VectorXd embed_curved(const ChartPoint& p) const;
    Eigen::VectorXd embed_curved_vector(const ChartPoint& p, const Vec& v) const;

private:
    FlowKind kind_ = FlowKind::FlatTorus;
    int dim_ = 0;
    int curved_dim_ = 0;
    std::vector<double> periods_;
    double r0_ = 0.0;
    double c0_ = 0.0;
    double tau_min_ = 0.0;
    double tau_max_ = 0.0;
    double c0_bound_ = 0.0;

    double curved_sign() const;
    double log_weight_grad(const Vec& u, int i) const;
    double weight(const Vec& u) const;
    void finish_construction();
};

CurvaturePack curvature_pack(const FlowManifold& flow, const SpaceTimePoint& p);

double metric_inner(const FlowManifold& flow, double tau, const TangentVec& v, const TangentVec& w);

Frame gram_schmidt(const FlowManifold& flow, double tau, const ChartPoint& base, const Mat& vectors);
/// The deterministic section: orthonormalized chart coordinate basis.
Frame coordinate_frame(const FlowManifold& flow, double tau, const ChartPoint& base);

ChartPoint frozen_exp(const FlowManifold& flow, double tau, const ChartPoint& x, const Vec& v);
/// Exponential map of g(tau) by RK4 on the geodesic equation, with chart handoff.
ChartPoint frozen_exp_rk4(const FlowManifold& flow, double tau, const ChartPoint& x, const Vec& v,
                          int steps = 256, std::vector<double>* speeds = nullptr);

double rho(const FlowManifold& flow, double tau, const ChartPoint& x, const ChartPoint& y);

double h_form(const CurvaturePack& pack, double tau, const Vec& vel, const Vec& z);
/// The symmetric bilinear form whose diagonal is h_form.
double h_bilinear(const CurvaturePack& pack, double tau, const Vec& vel, const Vec& z1, const Vec& z2);

struct MetricBracket {
    double lower = 0.0;
    double upper = 0.0;
};
/// Bracket for |v|²_{g(tau1)} in terms of |v|²_{g(tau2)} at the same point.
MetricBracket metric_comparison_bound(const FlowManifold& flow, double tau1, double tau2,
                                      const ChartPoint& x, const Vec& v);

}  // namespace ricci

#endif
