#include "ricci/geometry.hpp"

#include "geometry_internal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ricci {

namespace {

double wrap_into(double x, double period) {
    double r = x - period * std::floor(x / period);
    if (r >= period) r -= period;
    if (r < 0.0) r = 0.0;
    return r;
}

// Hysteresis band for the stereographic handoff: a chart is kept while
// |u| <= 2, i.e. while the last embedding coordinate stays on its side of -/+0.6.
constexpr double kHandoffRadius = 2.0;
constexpr double kHandoffHeight = 0.6;

}  // namespace

namespace detail {

double wrap_centered(double dx, double period) {
    return dx - period * std::round(dx / period);
}

}  // namespace detail

using detail::wrap_centered;

std::string to_string(FlowKind kind) {
    switch (kind) {
    case FlowKind::FlatTorus: return "flat_torus";
    case FlowKind::RoundSphere: return "round_sphere";
    case FlowKind::HyperbolicSpace: return "hyperbolic_space";
    case FlowKind::ProductSphereTorus: return "product_sphere_torus";
    }
    return "unknown";
}

FlowKind flow_kind_from_string(const std::string& name) {
    if (name == "flat_torus") return FlowKind::FlatTorus;
    if (name == "round_sphere") return FlowKind::RoundSphere;
    if (name == "hyperbolic_space") return FlowKind::HyperbolicSpace;
    if (name == "product_sphere_torus") return FlowKind::ProductSphereTorus;
    throw ConfigError("unknown flow kind '" + name + "'");
}

Vec Christoffel::contract(const Vec& a, const Vec& b) const {
    Vec out(dim);
    for (int k = 0; k < dim; ++k) out(k) = a.dot(gamma[k] * b);
    return out;
}

// ---------------------------------------------------------------------------
// Construction

FlowManifold FlowManifold::flat_torus(std::vector<double> periods, double tau_min, double tau_max) {
    FlowManifold f;
    f.kind_ = FlowKind::FlatTorus;
    f.periods_ = std::move(periods);
    f.curved_dim_ = 0;
    f.dim_ = static_cast<int>(f.periods_.size());
    f.tau_min_ = tau_min;
    f.tau_max_ = tau_max;
    f.finish_construction();
    return f;
}

FlowManifold FlowManifold::round_sphere(int dim, double r0, double tau_min, double tau_max) {
    FlowManifold f;
    f.kind_ = FlowKind::RoundSphere;
    f.curved_dim_ = dim;
    f.dim_ = dim;
    f.r0_ = r0;
    f.tau_min_ = tau_min;
    f.tau_max_ = tau_max;
    f.finish_construction();
    return f;
}

FlowManifold FlowManifold::hyperbolic_space(int dim, double c0, double tau_min, double tau_max) {
    FlowManifold f;
    f.kind_ = FlowKind::HyperbolicSpace;
    f.curved_dim_ = dim;
    f.dim_ = dim;
    f.c0_ = c0;
    f.tau_min_ = tau_min;
    f.tau_max_ = tau_max;
    f.finish_construction();
    return f;
}

FlowManifold FlowManifold::product_sphere_torus(int sphere_dim, double r0, std::vector<double> periods,
                                                double tau_min, double tau_max) {
    FlowManifold f;
    f.kind_ = FlowKind::ProductSphereTorus;
    f.curved_dim_ = sphere_dim;
    f.periods_ = std::move(periods);
    f.dim_ = sphere_dim + static_cast<int>(f.periods_.size());
    f.r0_ = r0;
    f.tau_min_ = tau_min;
    f.tau_max_ = tau_max;
    f.finish_construction();
    return f;
}

void FlowManifold::finish_construction() {
    if (!(std::isfinite(tau_min_) && std::isfinite(tau_max_)) || tau_min_ < 0.0 || !(tau_max_ > tau_min_))
        throw ConfigError("flow time interval must satisfy 0 <= tau_min < tau_max");
    if (dim_ < 1 || dim_ > kMaxDim)
        throw ConfigError("flow dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
    for (double p : periods_)
        if (!(p > 0.0) || !std::isfinite(p)) throw ConfigError("torus periods must be positive");
    if (kind_ == FlowKind::ProductSphereTorus && periods_.empty())
        throw ConfigError("product flow needs at least one torus period");
    if (curved_dim_ > 0 && curved_dim_ < 2)
        throw ConfigError("curved factor must have dimension >= 2");
    if (curved_is_sphere() && !(r0_ > 0.0)) throw ConfigError("sphere radius r0 must be positive");
    if (kind_ == FlowKind::HyperbolicSpace) {
        if (!(c0_ > 0.0)) throw ConfigError("hyperbolic factor c0 must be positive");
        if (!(scale(tau_max_) > 0.0))
            throw ConfigError("hyperbolic flow becomes degenerate before tau_max");
    }
    if (curved_dim_ == 0) {
        c0_bound_ = 0.0;
        return;
    }
    const double m = curved_dim_;
    const double a_min = std::min(scale(tau_min_), scale(tau_max_));
    const double rm_norm = std::sqrt(2.0 * m * (m - 1.0));
    const double ric_norm = std::sqrt(m) * (m - 1.0);
    c0_bound_ = std::max(rm_norm, ric_norm) / a_min;
}

double FlowManifold::curved_sign() const {
    return kind_ == FlowKind::HyperbolicSpace ? -1.0 : 1.0;
}

double FlowManifold::scale(double tau) const {
    if (curved_dim_ == 0) return 1.0;
    const double m = curved_dim_;
    if (kind_ == FlowKind::HyperbolicSpace) return c0_ - 2.0 * (m - 1.0) * (tau - tau_min_);
    return r0_ * r0_ + 2.0 * (m - 1.0) * (tau - tau_min_);
}

double FlowManifold::scale_rate() const {
    if (curved_dim_ == 0) return 0.0;
    return 2.0 * curved_sign() * (curved_dim_ - 1.0);
}

void FlowManifold::check_time(double tau) const {
    const double slack = 1e-12 * (1.0 + std::abs(tau_max_));
    if (!(tau >= tau_min_ - slack && tau <= tau_max_ + slack)) {
        std::ostringstream os;
        os << "time " << tau << " outside flow interval [" << tau_min_ << ", " << tau_max_ << "]";
        throw std::domain_error(os.str());
    }
}

// ---------------------------------------------------------------------------
// Charts

void FlowManifold::validate(const ChartPoint& p) const {
    if (p.x.size() != dim_) throw std::invalid_argument("point has wrong dimension");
    for (int i = 0; i < dim_; ++i)
        if (!std::isfinite(p.x(i))) throw std::invalid_argument("point has non-finite coordinates");
    if (curved_is_sphere()) {
        if (p.chart != 0 && p.chart != 1) throw std::invalid_argument("sphere chart id must be 0 or 1");
    } else if (p.chart != 0) {
        throw std::invalid_argument("chart id must be 0 for this flow");
    }
    if (kind_ == FlowKind::HyperbolicSpace && p.x.head(curved_dim_).squaredNorm() >= 1.0)
        throw std::invalid_argument("point lies outside the Poincare ball");
}

ChartPoint FlowManifold::normalize(const ChartPoint& p) const {
    ChartPoint q = p;
    if (curved_is_sphere()) {
        const double r2 = q.x.head(curved_dim_).squaredNorm();
        if (r2 > kHandoffRadius * kHandoffRadius) {
            q.x.head(curved_dim_) /= r2;
            q.chart = 1 - q.chart;
        }
    }
    for (int i = 0; i < torus_dim(); ++i) {
        const int k = curved_dim_ + i;
        q.x(k) = wrap_into(q.x(k), periods_[i]);
    }
    return q;
}

Vec FlowManifold::coords_near(const ChartPoint& p, const ChartPoint& ref) const {
    Vec out = p.x;
    if (curved_is_sphere() && p.chart != ref.chart) {
        const double r2 = p.x.head(curved_dim_).squaredNorm();
        const double safe = std::max(r2, std::numeric_limits<double>::min());
        out.head(curved_dim_) = p.x.head(curved_dim_) / safe;
    }
    for (int i = 0; i < torus_dim(); ++i) {
        const int k = curved_dim_ + i;
        out(k) = ref.x(k) + wrap_centered(p.x(k) - ref.x(k), periods_[i]);
    }
    return out;
}

Mat FlowManifold::transition_jacobian(const ChartPoint& p, int target_chart) const {
    Mat j = Mat::Identity(dim_, dim_);
    if (curved_is_sphere() && p.chart != target_chart) {
        const Vec u = p.x.head(curved_dim_);
        const double r2 = u.squaredNorm();
        Mat block = Mat::Identity(curved_dim_, curved_dim_) - 2.0 * u * u.transpose() / r2;
        j.topLeftCorner(curved_dim_, curved_dim_) = block / r2;
    }
    return j;
}

Vec FlowManifold::push_vector(const ChartPoint& p, const Vec& v, int target_chart) const {
    if (!curved_is_sphere() || p.chart == target_chart) return v;
    const Vec u = p.x.head(curved_dim_);
    const double r2 = u.squaredNorm();
    Vec out = v;
    const Vec vc = v.head(curved_dim_);
    out.head(curved_dim_) = (vc - 2.0 * u * (u.dot(vc) / r2)) / r2;
    return out;
}

ChartPoint FlowManifold::to_chart(const ChartPoint& p, int target_chart) const {
    if (!curved_is_sphere() || p.chart == target_chart) return p;
    ChartPoint q = p;
    const double r2 = p.x.head(curved_dim_).squaredNorm();
    q.x.head(curved_dim_) = p.x.head(curved_dim_) / std::max(r2, std::numeric_limits<double>::min());
    q.chart = target_chart;
    return q;
}

// ---------------------------------------------------------------------------
// Local geometry

double FlowManifold::weight(const Vec& u) const {
    const double q = u.head(curved_dim_).squaredNorm();
    return kind_ == FlowKind::HyperbolicSpace ? 2.0 / (1.0 - q) : 2.0 / (1.0 + q);
}

double FlowManifold::log_weight_grad(const Vec& u, int i) const {
    const double q = u.head(curved_dim_).squaredNorm();
    return kind_ == FlowKind::HyperbolicSpace ? 2.0 * u(i) / (1.0 - q) : -2.0 * u(i) / (1.0 + q);
}

Mat FlowManifold::metric(const Vec& u, double tau) const {
    Mat g = Mat::Identity(dim_, dim_);
    if (curved_dim_ > 0) {
        const double w = weight(u);
        const double c = scale(tau) * w * w;
        for (int i = 0; i < curved_dim_; ++i) g(i, i) = c;
    }
    return g;
}

Mat FlowManifold::metric_inverse(const Vec& u, double tau) const {
    Mat g = Mat::Identity(dim_, dim_);
    if (curved_dim_ > 0) {
        const double w = weight(u);
        const double c = 1.0 / (scale(tau) * w * w);
        for (int i = 0; i < curved_dim_; ++i) g(i, i) = c;
    }
    return g;
}

Mat FlowManifold::metric_dtau(const Vec& u, double tau) const {
    (void)tau;
    Mat g = Mat::Zero(dim_, dim_);
    if (curved_dim_ > 0) {
        const double w = weight(u);
        const double c = scale_rate() * w * w;
        for (int i = 0; i < curved_dim_; ++i) g(i, i) = c;
    }
    return g;
}

double FlowManifold::inner(const Vec& u, double tau, const Vec& a, const Vec& b) const {
    const int m = curved_dim_;
    double flat = 0.0;
    for (int i = m; i < dim_; ++i) flat += a(i) * b(i);
    if (m == 0) return flat;
    const double w = weight(u);
    double curved = 0.0;
    for (int i = 0; i < m; ++i) curved += a(i) * b(i);
    return scale(tau) * w * w * curved + flat;
}

Christoffel FlowManifold::christoffel(const Vec& u) const {
    Christoffel c;
    c.dim = dim_;
    for (int k = 0; k < dim_; ++k) c.gamma[k] = Mat::Zero(dim_, dim_);
    const int m = curved_dim_;
    if (m == 0) return c;
    Vec b(m);
    for (int i = 0; i < m; ++i) b(i) = log_weight_grad(u, i);
    for (int k = 0; k < m; ++k)
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                double v = 0.0;
                if (i == k) v += b(j);
                if (j == k) v += b(i);
                if (i == j) v -= b(k);
                c.gamma[k](i, j) = v;
            }
    return c;
}

Vec FlowManifold::gamma_contract(const Vec& u, const Vec& a, const Vec& b) const {
    Vec out = Vec::Zero(dim_);
    const int m = curved_dim_;
    if (m == 0) return out;
    const double q = u.head(m).squaredNorm();
    const double f = kind_ == FlowKind::HyperbolicSpace ? 2.0 / (1.0 - q) : -2.0 / (1.0 + q);
    // ∇log w = f u on the curved block.
    double ub = 0.0, ua = 0.0, ab = 0.0;
    for (int i = 0; i < m; ++i) {
        ub += u(i) * b(i);
        ua += u(i) * a(i);
        ab += a(i) * b(i);
    }
    for (int k = 0; k < m; ++k) out(k) = f * (a(k) * ub + b(k) * ua - ab * u(k));
    return out;
}

Vec FlowManifold::metric_gradient_quadratic(const Vec& u, double tau, const Vec& a) const {
    Vec out = Vec::Zero(dim_);
    const int m = curved_dim_;
    if (m == 0) return out;
    const double w = weight(u);
    const double c = scale(tau) * w * w * a.head(m).squaredNorm();
    for (int l = 0; l < m; ++l) out(l) = c * log_weight_grad(u, l);
    return out;
}

Mat FlowManifold::ricci(const Vec& u, double tau) const {
    (void)tau;
    Mat r = Mat::Zero(dim_, dim_);
    const int m = curved_dim_;
    if (m == 0) return r;
    const double w = weight(u);
    const double c = curved_sign() * (m - 1.0) * w * w;
    for (int i = 0; i < m; ++i) r(i, i) = c;
    return r;
}

Mat FlowManifold::ricci_sharp(const Vec& u, double tau) const {
    (void)u;
    Mat r = Mat::Zero(dim_, dim_);
    const int m = curved_dim_;
    if (m == 0) return r;
    const double c = curved_sign() * (m - 1.0) / scale(tau);
    for (int i = 0; i < m; ++i) r(i, i) = c;
    return r;
}

double FlowManifold::scalar(double tau) const {
    const double m = curved_dim_;
    if (curved_dim_ == 0) return 0.0;
    return curved_sign() * m * (m - 1.0) / scale(tau);
}

Vec FlowManifold::grad_scalar(const Vec& u, double tau) const {
    (void)u;
    (void)tau;
    return Vec::Zero(dim_);
}

double FlowManifold::ricci_norm2(double tau) const {
    const double m = curved_dim_;
    if (curved_dim_ == 0) return 0.0;
    const double a = scale(tau);
    return m * (m - 1.0) * (m - 1.0) / (a * a);
}

double FlowManifold::rm_quadratic(const Vec& u, double tau, const Vec& a, const Vec& b) const {
    const int m = curved_dim_;
    if (m == 0) return 0.0;
    const double w = weight(u);
    const double gs = scale(tau) * w * w;
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (int i = 0; i < m; ++i) {
        ab += a(i) * b(i);
        aa += a(i) * a(i);
        bb += b(i) * b(i);
    }
    const double kappa = curved_sign() / scale(tau);
    return kappa * gs * gs * (ab * ab - aa * bb);
}

Eigen::VectorXd FlowManifold::embed_curved(const ChartPoint& p) const {
    const int m = curved_dim_;
    Eigen::VectorXd e(m + 1);
    const Vec u = p.x.head(m);
    const double q = u.squaredNorm();
    if (kind_ == FlowKind::HyperbolicSpace) {
        for (int i = 0; i < m; ++i) e(i) = 2.0 * u(i) / (1.0 - q);
        e(m) = (1.0 + q) / (1.0 - q);
    } else {
        for (int i = 0; i < m; ++i) e(i) = 2.0 * u(i) / (1.0 + q);
        e(m) = (p.chart == 0 ? (1.0 - q) : (q - 1.0)) / (1.0 + q);
    }
    return e;
}

Eigen::VectorXd FlowManifold::embed_curved_vector(const ChartPoint& p, const Vec& v) const {
    const int m = curved_dim_;
    Eigen::VectorXd e(m + 1);
    const Vec u = p.x.head(m);
    const Vec vc = v.head(m);
    const double q = u.squaredNorm();
    const double uv = u.dot(vc);
    if (kind_ == FlowKind::HyperbolicSpace) {
        const double d = 1.0 - q;
        for (int i = 0; i < m; ++i) e(i) = 2.0 * vc(i) / d + 4.0 * u(i) * uv / (d * d);
        e(m) = 4.0 * uv / (d * d);
    } else {
        const double d = 1.0 + q;
        for (int i = 0; i < m; ++i) e(i) = 2.0 * vc(i) / d - 4.0 * u(i) * uv / (d * d);
        e(m) = (p.chart == 0 ? -4.0 : 4.0) * uv / (d * d);
    }
    return e;
}

// ---------------------------------------------------------------------------
// Free operations

CurvaturePack curvature_pack(const FlowManifold& flow, const SpaceTimePoint& p) {
    flow.check_time(p.tau);
    flow.validate(p.x);
    const int d = flow.dim();
    const Vec& u = p.x.x;
    const double tau = p.tau;
    CurvaturePack c;
    c.dim = d;
    c.g = flow.metric(u, tau);
    c.g_inv = flow.metric_inverse(u, tau);
    c.christoffel = flow.christoffel(u);
    c.ric = flow.ricci(u, tau);
    c.ric_sharp = flow.ricci_sharp(u, tau);
    c.scalar = flow.scalar(tau);
    c.grad_scalar = flow.grad_scalar(u, tau);
    c.hess_scalar = Mat::Zero(d, d);
    c.lap_scalar = 0.0;
    c.ric_norm2 = flow.ricci_norm2(tau);
    c.dric_dtau = Mat::Zero(d, d);
    c.cov_ric.assign(static_cast<std::size_t>(d * d * d), 0.0);
    c.rm.assign(static_cast<std::size_t>(d * d * d * d), 0.0);
    const int m = flow.sphere_dim();
    if (m > 0) {
        const double kappa = (flow.kind() == FlowKind::HyperbolicSpace ? -1.0 : 1.0) / flow.scale(tau);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                for (int k = 0; k < m; ++k)
                    for (int l = 0; l < m; ++l)
                        c.rm[((i * d + j) * d + k) * d + l] =
                            kappa * (c.g(i, k) * c.g(j, l) - c.g(i, l) * c.g(j, k));
    }
    return c;
}

double metric_inner(const FlowManifold& flow, double tau, const TangentVec& v, const TangentVec& w) {
    if (v.base.x.chart != w.base.x.chart || (v.base.x.x - w.base.x.x).norm() > 0.0)
        throw std::invalid_argument("metric_inner: vectors have different base points");
    flow.check_time(tau);
    return flow.inner(v.base.x.x, tau, v.v, w.v);
}

Frame gram_schmidt(const FlowManifold& flow, double tau, const ChartPoint& base, const Mat& vectors) {
    flow.check_time(tau);
    const int d = flow.dim();
    if (vectors.rows() != d || vectors.cols() != d)
        throw std::invalid_argument("gram_schmidt: expected d vectors of dimension d");
    const Mat g = flow.metric(base.x, tau);
    const Mat gram = vectors.transpose() * g * vectors;
    Eigen::SelfAdjointEigenSolver<Mat> es(gram);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (!(lmin > 0.0) || std::sqrt(lmax / lmin) > 1e12)
        throw std::invalid_argument("gram_schmidt: vectors are numerically rank deficient");
    Frame f;
    f.base.x = base;
    f.base.tau = tau;
    f.vectors = vectors;
    for (int i = 0; i < d; ++i) {
        Vec v = f.vectors.col(i);
        for (int pass = 0; pass < 2; ++pass)
            for (int j = 0; j < i; ++j) {
                const Vec e = f.vectors.col(j);
                v -= e * e.dot(g * v);
            }
        v /= std::sqrt(v.dot(g * v));
        f.vectors.col(i) = v;
    }
    return f;
}

Frame coordinate_frame(const FlowManifold& flow, double tau, const ChartPoint& base) {
    return gram_schmidt(flow, tau, base, Mat::Identity(flow.dim(), flow.dim()));
}

namespace detail {

ChartPoint curved_from_embedding(const FlowManifold& flow, const Eigen::VectorXd& e, int preferred,
                                 ChartPoint out) {
    const int m = flow.sphere_dim();
    if (flow.kind() == FlowKind::HyperbolicSpace) {
        for (int i = 0; i < m; ++i) out.x(i) = e(i) / (1.0 + e(m));
        out.chart = 0;
        return out;
    }
    int chart = preferred;
    if (chart == 0 && e(m) < -kHandoffHeight) chart = 1;
    if (chart == 1 && e(m) > kHandoffHeight) chart = 0;
    const double den = chart == 0 ? 1.0 + e(m) : 1.0 - e(m);
    for (int i = 0; i < m; ++i) out.x(i) = e(i) / den;
    out.chart = chart;
    return out;
}

Vec chart_vector_from_embedding(const FlowManifold& flow, const ChartPoint& p, const Eigen::VectorXd& de) {
    const int m = flow.sphere_dim();
    const int d = flow.dim();
    const double q = p.x.head(m).squaredNorm();
    const bool hyperbolic = flow.kind() == FlowKind::HyperbolicSpace;
    const double w = hyperbolic ? 2.0 / (1.0 - q) : 2.0 / (1.0 + q);
    Vec out = Vec::Zero(d);
    for (int j = 0; j < m; ++j) {
        Vec ej = Vec::Zero(d);
        ej(j) = 1.0;
        const Eigen::VectorXd col = flow.embed_curved_vector(p, ej);
        double dot = col.head(m).dot(de.head(m));
        dot += hyperbolic ? -col(m) * de(m) : col(m) * de(m);
        out(j) = dot / (w * w);
    }
    return out;
}

}  // namespace detail

using detail::curved_from_embedding;

ChartPoint frozen_exp(const FlowManifold& flow, double tau, const ChartPoint& x, const Vec& v) {
    flow.check_time(tau);
    flow.validate(x);
    const int m = flow.sphere_dim();
    ChartPoint out = x;
    for (int i = m; i < flow.dim(); ++i) out.x(i) += v(i);
    if (m > 0) {
        const Eigen::VectorXd e = flow.embed_curved(x);
        const Eigen::VectorXd t = flow.embed_curved_vector(x, v);
        Eigen::VectorXd e2;
        if (flow.kind() == FlowKind::HyperbolicSpace) {
            const double th2 = t.head(m).squaredNorm() - t(m) * t(m);
            const double th = std::sqrt(std::max(th2, 0.0));
            e2 = std::cosh(th) * e + (th > 0.0 ? std::sinh(th) / th : 1.0) * t;
        } else {
            const double th = t.norm();
            if (th >= M_PI)
                throw std::invalid_argument("frozen_exp: step exceeds the injectivity scale of the sphere");
            e2 = std::cos(th) * e + (th > 0.0 ? std::sin(th) / th : 1.0) * t;
            e2 /= e2.norm();
        }
        out = curved_from_embedding(flow, e2, x.chart, out);
    }
    return flow.normalize(out);
}

ChartPoint frozen_exp_rk4(const FlowManifold& flow, double tau, const ChartPoint& x, const Vec& v, int steps,
                          std::vector<double>* speeds) {
    flow.check_time(tau);
    flow.validate(x);
    if (steps < 1) throw std::invalid_argument("frozen_exp_rk4: steps must be positive");
    ChartPoint p = x;
    Vec w = v;
    const double h = 1.0 / steps;
    auto acc = [&](const Vec& u, const Vec& vel) { return Vec(-flow.gamma_contract(u, vel, vel)); };
    if (speeds) {
        speeds->clear();
        speeds->push_back(std::sqrt(flow.norm2(p.x, tau, w)));
    }
    for (int n = 0; n < steps; ++n) {
        const Vec u = p.x;
        const Vec k1x = w, k1v = acc(u, w);
        const Vec k2x = w + 0.5 * h * k1v, k2v = acc(u + 0.5 * h * k1x, k2x);
        const Vec k3x = w + 0.5 * h * k2v, k3v = acc(u + 0.5 * h * k2x, k3x);
        const Vec k4x = w + h * k3v, k4v = acc(u + h * k3x, k4x);
        p.x = u + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        w = w + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        const ChartPoint q = flow.normalize(p);
        if (q.chart != p.chart) w = flow.push_vector(p, w, q.chart);
        p = q;
        if (speeds) speeds->push_back(std::sqrt(flow.norm2(p.x, tau, w)));
    }
    return p;
}

double rho(const FlowManifold& flow, double tau, const ChartPoint& x, const ChartPoint& y) {
    flow.check_time(tau);
    const int m = flow.sphere_dim();
    double flat2 = 0.0;
    for (int i = 0; i < flow.torus_dim(); ++i) {
        const int k = m + i;
        const double dx = wrap_centered(y.x(k) - x.x(k), flow.periods()[i]);
        flat2 += dx * dx;
    }
    double curved = 0.0;
    if (m > 0) {
        const double a = std::sqrt(flow.scale(tau));
        if (flow.kind() == FlowKind::HyperbolicSpace) {
            const Vec u = x.x.head(m), v = y.x.head(m);
            const double s = (u - v).norm() / std::sqrt((1.0 - u.squaredNorm()) * (1.0 - v.squaredNorm()));
            curved = a * 2.0 * std::asinh(s);
        } else {
            const Eigen::VectorXd e1 = flow.embed_curved(x), e2 = flow.embed_curved(y);
            curved = a * 2.0 * std::atan2((e1 - e2).norm(), (e1 + e2).norm());
        }
    }
    return std::sqrt(curved * curved + flat2);
}

double h_bilinear(const CurvaturePack& pack, double tau, const Vec& vel, const Vec& z1, const Vec& z2) {
    const int d = pack.dim;
    double rm_term = 0.0;
    double nabla_v = 0.0;
    double nabla_z = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            for (int k = 0; k < d; ++k) {
                const double vj_vk = vel(j) * vel(k);
                for (int l = 0; l < d; ++l) {
                    const double r = pack.riemann(i, j, k, l);
                    if (r == 0.0) continue;
                    rm_term += r * vj_vk * (z1(i) * z2(l) + z2(i) * z1(l));
                }
                const double nr = pack.nabla_ric(i, j, k);
                nabla_v += nr * z1(i) * z2(j) * vel(k);
                nabla_z += nr * vel(i) * (z2(j) * z1(k) + z1(j) * z2(k));
            }
        }
    const Vec r1 = pack.ric_sharp * z1, r2 = pack.ric_sharp * z2;
    return -2.0 * z1.dot(pack.dric_dtau * z2) - z1.dot(pack.hess_scalar * z2) + 2.0 * r1.dot(pack.g * r2) -
           z1.dot(pack.ric * z2) / tau - rm_term - 4.0 * nabla_v + 2.0 * nabla_z;
}

double h_form(const CurvaturePack& pack, double tau, const Vec& vel, const Vec& z) {
    return h_bilinear(pack, tau, vel, z, z);
}

MetricBracket metric_comparison_bound(const FlowManifold& flow, double tau1, double tau2, const ChartPoint& x,
                                      const Vec& v) {
    if (tau1 > tau2) throw std::invalid_argument("metric_comparison_bound: requires tau1 <= tau2");
    flow.check_time(tau1);
    flow.check_time(tau2);
    const double n2 = flow.norm2(x.x, tau2, v);
    const double c = 2.0 * flow.curvature_bound() * (tau2 - tau1);
    return {std::exp(-c) * n2, std::exp(c) * n2};
}

}  // namespace ricci
