#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"

#include <cmath>

using namespace ricci;
using ricci::test::point;
using ricci::test::vec;

namespace {

// Unit-sphere stereographic embedding, written out independently of the library.
Eigen::VectorXd stereo(const Vec& u, int chart, bool hyperbolic) {
    const int m = static_cast<int>(u.size());
    const double q = u.squaredNorm();
    Eigen::VectorXd e(m + 1);
    if (hyperbolic) {
        for (int i = 0; i < m; ++i) e(i) = 2.0 * u(i) / (1.0 - q);
        e(m) = (1.0 + q) / (1.0 - q);
    } else {
        for (int i = 0; i < m; ++i) e(i) = 2.0 * u(i) / (1.0 + q);
        e(m) = (chart == 0 ? 1.0 - q : q - 1.0) / (1.0 + q);
    }
    return e;
}

// Pullback of the ambient (Euclidean or Minkowski) metric by central differences.
Mat pullback_metric(const Vec& u, int chart, bool hyperbolic) {
    const int m = static_cast<int>(u.size());
    const double h = 1e-6;
    Eigen::MatrixXd j(m + 1, m);
    for (int i = 0; i < m; ++i) {
        Vec up = u, dn = u;
        up(i) += h;
        dn(i) -= h;
        j.col(i) = (stereo(up, chart, hyperbolic) - stereo(dn, chart, hyperbolic)) / (2.0 * h);
    }
    Eigen::MatrixXd eta = Eigen::MatrixXd::Identity(m + 1, m + 1);
    if (hyperbolic) eta(m, m) = -1.0;
    return j.transpose() * eta * j;
}

}  // namespace

TEST_CASE("flat torus curvature vanishes") {
    const FlowManifold flow = FlowManifold::flat_torus({1.0, 1.0}, 1.0, 8.0);
    const CurvaturePack pack = curvature_pack(flow, {point({0.3, 0.7}), 2.5});
    CHECK(pack.scalar == 0.0);
    CHECK(pack.ric.norm() == 0.0);
    for (double v : pack.rm) CHECK(v == 0.0);
    CHECK(flow.curvature_bound() == 0.0);
}

TEST_CASE("sphere curvature matches the rescaled round metric") {
    for (int d : {2, 3}) {
        const double r0 = 1.5, tmin = 1.0;
        const FlowManifold flow = FlowManifold::round_sphere(d, r0, tmin, 8.0);
        Rng rng(7, d);
        for (int trial = 0; trial < 20; ++trial) {
            const ChartPoint p = test::random_point(flow, rng);
            const double tau = test::random_time(flow, rng);
            const double r2 = r0 * r0 + 2.0 * (d - 1) * (tau - tmin);
            const CurvaturePack pack = curvature_pack(flow, {p, tau});
            CHECK(pack.scalar == doctest::Approx(d * (d - 1) / r2).epsilon(1e-13));
            CHECK(pack.ric_norm2 == doctest::Approx(d * (d - 1.0) * (d - 1.0) / (r2 * r2)).epsilon(1e-12));
            CHECK(pack.grad_scalar.norm() == 0.0);
            CHECK(pack.lap_scalar == 0.0);
            const Mat g_oracle = r2 * pullback_metric(p.x, p.chart, false);
            CHECK((pack.g - g_oracle).norm() <= 1e-8 * g_oracle.norm());
            // Ric = (d - 1) g_std for the round sphere.
            CHECK((pack.ric - (d - 1) * g_oracle / r2).norm() <= 1e-8 * pack.ric.norm());
            // Sectional curvature 1 / r².
            const Vec a = test::random_vec(d, rng), b = test::random_vec(d, rng);
            const double ab = a.dot(g_oracle * b);
            const double wedge = a.dot(g_oracle * a) * b.dot(g_oracle * b) - ab * ab;
            CHECK(flow.rm_quadratic(p.x, tau, a, b) == doctest::Approx(-wedge / r2).epsilon(1e-7));
        }
    }
}

TEST_CASE("hyperbolic curvature matches the rescaled ball metric") {
    const int d = 3;
    const double c0 = 30.0, tmin = 1.0;
    const FlowManifold flow = FlowManifold::hyperbolic_space(d, c0, tmin, 8.0);
    Rng rng(8, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const ChartPoint p = test::random_point(flow, rng);
        const double tau = test::random_time(flow, rng);
        const double c = c0 - 2.0 * (d - 1) * (tau - tmin);
        const CurvaturePack pack = curvature_pack(flow, {p, tau});
        CHECK(pack.scalar == doctest::Approx(-d * (d - 1) / c).epsilon(1e-13));
        const Mat g_oracle = c * pullback_metric(p.x, p.chart, true);
        CHECK((pack.g - g_oracle).norm() <= 1e-8 * g_oracle.norm());
        CHECK((pack.ric + (d - 1) * g_oracle / c).norm() <= 1e-8 * pack.ric.norm());
    }
}

TEST_CASE("metric_inner") {
    const FlowManifold flat = FlowManifold::flat_torus({1.0, 1.0}, 1.0, 8.0);
    TangentVec v{{point({0.2, 0.4}), 3.0}, vec({1.0, 0.0})};
    CHECK(metric_inner(flat, 3.0, v, v) == 1.0);

    const FlowManifold sphere = FlowManifold::round_sphere(2, 1.0, 1.0, 8.0);
    const ChartPoint p = point({0.3, -0.5});
    TangentVec a{{p, 2.0}, vec({0.7, 0.2})};
    TangentVec b{{p, 2.0}, vec({-0.1, 0.4})};
    const double r2 = 1.0 + 2.0 * (2.0 - 1.0);
    const double std_ab = a.v.dot(pullback_metric(p.x, 0, false) * b.v);
    CHECK(metric_inner(sphere, 2.0, a, b) == doctest::Approx(r2 * std_ab).epsilon(1e-9));
    CHECK(metric_inner(sphere, 2.0, a, b) == doctest::Approx(metric_inner(sphere, 2.0, b, a)).epsilon(1e-15));

    TangentVec zero{{p, 2.0}, vec({0.0, 0.0})};
    CHECK(metric_inner(sphere, 2.0, zero, zero) == 0.0);

    TangentVec elsewhere{{point({0.1, 0.1}), 2.0}, vec({1.0, 0.0})};
    CHECK_THROWS_AS(metric_inner(sphere, 2.0, a, elsewhere), std::invalid_argument);
}

TEST_CASE("gram_schmidt") {
    const FlowManifold flat = FlowManifold::flat_torus({1.0, 1.0}, 1.0, 8.0);
    const Frame f = gram_schmidt(flat, 2.0, point({0.5, 0.5}), Mat::Identity(2, 2));
    CHECK((f.vectors - Mat::Identity(2, 2)).norm() == 0.0);

    const FlowManifold sphere = FlowManifold::round_sphere(3, 1.0, 1.0, 8.0);
    Rng rng(9, 0);
    const ChartPoint p = test::random_point(sphere, rng);
    Mat raw(3, 3);
    for (int j = 0; j < 3; ++j) raw.col(j) = test::random_vec(3, rng);
    const Frame once = gram_schmidt(sphere, 4.0, p, raw);
    const Frame twice = gram_schmidt(sphere, 4.0, p, once.vectors);
    CHECK((twice.vectors - once.vectors).norm() <= 1e-12);
    const Mat gram = once.vectors.transpose() * sphere.metric(p.x, 4.0) * once.vectors;
    CHECK((gram - Mat::Identity(3, 3)).norm() <= 1e-12);

    // r(τ) = 2 at τ = 2.5 when r0 = 1 and d = 2. The chart origin has conformal
    // weight 2 in the stereographic chart, so the coordinate basis scales by 1 / (2 r).
    const FlowManifold s2 = FlowManifold::round_sphere(2, 1.0, 1.0, 8.0);
    const double tau = 2.5;
    CHECK(s2.scale(tau) == doctest::Approx(4.0));
    const Frame pole = coordinate_frame(s2, tau, point({0.0, 0.0}));
    CHECK((pole.vectors - Mat::Identity(2, 2) / 4.0).norm() <= 1e-15);

    Mat singular = Mat::Identity(2, 2);
    singular.col(1) = singular.col(0);
    CHECK_THROWS_AS(gram_schmidt(s2, tau, point({0.1, 0.2}), singular), std::invalid_argument);
}

TEST_CASE("frozen_exp") {
    const FlowManifold flat = FlowManifold::flat_torus({1.0, 1.0}, 1.0, 8.0);
    const ChartPoint x = point({0.9, 0.1});
    const ChartPoint same = frozen_exp(flat, 2.0, x, vec({0.0, 0.0}));
    CHECK((same.x - x.x).norm() == 0.0);
    const ChartPoint moved = frozen_exp(flat, 2.0, x, vec({0.3, -0.4}));
    CHECK(moved.x(0) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(moved.x(1) == doctest::Approx(0.7).epsilon(1e-12));

    // Great circle: rotate the embedded point by |v| / r toward v.
    const FlowManifold sphere = FlowManifold::round_sphere(2, 1.0, 1.0, 8.0);
    Rng rng(10, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const ChartPoint p = test::random_point(sphere, rng);
        const double tau = test::random_time(sphere, rng);
        Vec v = test::random_vec(2, rng);
        v *= (2.5 * rng.uniform()) / std::sqrt(sphere.norm2(p.x, tau, v)) * std::sqrt(sphere.scale(tau));
        const double h = 1e-6;
        Eigen::MatrixXd jac(3, 2);
        for (int i = 0; i < 2; ++i) {
            Vec up = p.x, dn = p.x;
            up(i) += h;
            dn(i) -= h;
            jac.col(i) = (stereo(up, p.chart, false) - stereo(dn, p.chart, false)) / (2.0 * h);
        }
        const Eigen::VectorXd e = stereo(p.x, p.chart, false);
        const Eigen::VectorXd t = jac * v;
        const double angle = std::sqrt(sphere.norm2(p.x, tau, v) / sphere.scale(tau));
        CHECK(t.norm() == doctest::Approx(angle).epsilon(1e-8));
        const Eigen::VectorXd expected = std::cos(angle) * e + std::sin(angle) * t / t.norm();
        const ChartPoint q = frozen_exp(sphere, tau, p, v);
        CHECK((sphere.embed_curved(q) - expected).norm() <= 1e-8);
        const ChartPoint q_rk4 = frozen_exp_rk4(sphere, tau, p, v, 512);
        CHECK((sphere.embed_curved(q_rk4) - expected).norm() <= 1e-8);
    }
    CHECK_THROWS_AS(frozen_exp(sphere, 1.0, point({0.0, 0.0}), vec({2.0, 0.0})), std::invalid_argument);
}

TEST_CASE("frozen_exp_rk4 preserves speed") {
    for (const FlowManifold& flow : test::model_flows()) {
        Rng rng(11, static_cast<int>(flow.kind()));
        for (int trial = 0; trial < 10; ++trial) {
            const ChartPoint p = test::random_point(flow, rng);
            const double tau = test::random_time(flow, rng);
            Vec v = test::random_vec(flow.dim(), rng);
            v *= std::sqrt(flow.scale(tau)) / std::sqrt(flow.norm2(p.x, tau, v));
            std::vector<double> speeds;
            frozen_exp_rk4(flow, tau, p, v, 256, &speeds);
            for (double s : speeds) CHECK(std::abs(s / speeds.front() - 1.0) <= 1e-8);
        }
    }
}

TEST_CASE("rho") {
    const FlowManifold flat = FlowManifold::flat_torus({1.0, 1.0}, 1.0, 8.0);
    CHECK(rho(flat, 1.0, point({0.2, 0.3}), point({0.2, 0.3})) == 0.0);
    CHECK(rho(flat, 1.0, point({0.0, 0.0}), point({0.75, 0.0})) == doctest::Approx(0.25).epsilon(1e-14));

    const FlowManifold sphere = FlowManifold::round_sphere(2, 2.0, 1.0, 8.0);
    const double r = std::sqrt(sphere.scale(1.0));
    CHECK(r == doctest::Approx(2.0));
    CHECK(rho(sphere, 1.0, point({0.0, 0.0}, 0), point({0.0, 0.0}, 1)) == doctest::Approx(2.0 * M_PI).epsilon(1e-14));
    const ChartPoint p = point({0.4, -0.2});
    CHECK(rho(sphere, 3.0, p, p) == 0.0);

    // Frozen exponential of a short vector lands at distance |v|.
    Rng rng(12, 0);
    for (const FlowManifold& flow : test::model_flows()) {
        const ChartPoint x = test::random_point(flow, rng);
        const double tau = test::random_time(flow, rng);
        Vec v = test::random_vec(flow.dim(), rng);
        v *= 0.3 / std::sqrt(flow.norm2(x.x, tau, v));
        CHECK(rho(flow, tau, x, frozen_exp(flow, tau, x, v)) == doctest::Approx(0.3).epsilon(1e-9));
    }
}

TEST_CASE("h_form") {
    const FlowManifold flat = FlowManifold::flat_torus({1.0, 1.0}, 1.0, 8.0);
    const CurvaturePack fp = curvature_pack(flat, {point({0.1, 0.2}), 2.0});
    CHECK(h_form(fp, 2.0, vec({1.0, 2.0}), vec({-0.5, 0.3})) == 0.0);

    for (int d : {2, 3}) {
        const FlowManifold sphere = FlowManifold::round_sphere(d, 1.0, 1.0, 8.0);
        Rng rng(13, d);
        const ChartPoint p = test::random_point(sphere, rng);
        const double tau = 3.0;
        const CurvaturePack pack = curvature_pack(sphere, {p, tau});
        CHECK(h_form(pack, tau, test::random_vec(d, rng), Vec::Zero(d)) == 0.0);

        Vec z = test::random_vec(d, rng);
        z /= std::sqrt(sphere.norm2(p.x, tau, z));
        // ∂Ric/∂τ by finite differences: zero because Ric = (d - 1) g_std.
        const double h = 1e-4;
        const Mat dric = (sphere.ricci(p.x, tau + h) - sphere.ricci(p.x, tau - h)) / (2.0 * h);
        const double r2 = sphere.scale(tau);
        const double ric_zz = (d - 1) / r2;
        const double ric_sharp_z2 = (d - 1.0) * (d - 1.0) / (r2 * r2);
        const double expected = -2.0 * z.dot(dric * z) + 2.0 * ric_sharp_z2 - ric_zz / tau;
        CHECK(h_form(pack, tau, Vec::Zero(d), z) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("metric_comparison_bound") {
    const FlowManifold flat = FlowManifold::flat_torus({1.0, 1.0}, 1.0, 8.0);
    const MetricBracket fb = metric_comparison_bound(flat, 2.0, 5.0, point({0.1, 0.1}), vec({0.3, 0.4}));
    CHECK(fb.lower == doctest::Approx(0.25));
    CHECK(fb.upper == doctest::Approx(0.25));

    const FlowManifold sphere = FlowManifold::round_sphere(2, 1.0, 1.0, 8.0);
    Rng rng(14, 0);
    for (int trial = 0; trial < 100; ++trial) {
        const ChartPoint p = test::random_point(sphere, rng);
        double t1 = test::random_time(sphere, rng), t2 = test::random_time(sphere, rng);
        if (t1 > t2) std::swap(t1, t2);
        const Vec v = test::random_vec(2, rng);
        const MetricBracket b = metric_comparison_bound(sphere, t1, t2, p, v);
        const double n1 = sphere.norm2(p.x, t1, v);
        CHECK(b.lower <= n1);
        CHECK(n1 <= b.upper);
    }
    const ChartPoint p = point({0.2, 0.2});
    const Vec v = vec({1.0, -1.0});
    const MetricBracket same = metric_comparison_bound(sphere, 3.0, 3.0, p, v);
    CHECK(same.lower == doctest::Approx(sphere.norm2(p.x, 3.0, v)).epsilon(1e-15));
    CHECK(same.upper == doctest::Approx(sphere.norm2(p.x, 3.0, v)).epsilon(1e-15));
}

TEST_CASE("flow equation on a grid of points and times") {
    for (const FlowManifold& flow : test::model_flows()) {
        Rng rng(15, static_cast<int>(flow.kind()));
        double worst = 0.0;
        for (int i = 0; i < 10; ++i) {
            const ChartPoint p = test::random_point(flow, rng);
            for (int k = 0; k < 10; ++k) {
                const double h = 1e-4;
                const double tau = flow.tau_min() + h + (flow.tau_max() - flow.tau_min() - 2 * h) * k / 9.0;
                const Mat dg = (flow.metric(p.x, tau + h) - flow.metric(p.x, tau - h)) / (2.0 * h);
                worst = std::max(worst, (dg - 2.0 * flow.ricci(p.x, tau)).cwiseAbs().maxCoeff());
            }
        }
        CHECK(worst <= 1e-6);
    }
}

TEST_CASE("scalar curvature evolution identity") {
    for (const FlowManifold& flow : test::model_flows()) {
        Rng rng(16, static_cast<int>(flow.kind()));
        for (int trial = 0; trial < 20; ++trial) {
            const ChartPoint p = test::random_point(flow, rng);
            const double h = 1e-4;
            const double tau = flow.tau_min() + h + (flow.tau_max() - flow.tau_min() - 2 * h) * rng.uniform();
            const CurvaturePack pack = curvature_pack(flow, {p, tau});
            const double rhs = -pack.lap_scalar - 2.0 * pack.ric_norm2;
            // Analytic rate of the closed-form scalar curvature.
            const double m = flow.sphere_dim();
            double analytic = 0.0;
            if (m > 0) {
                const double a = flow.scale(tau);
                analytic = -m * (m - 1) * (flow.curved_is_sphere() ? 1.0 : -1.0) * flow.scale_rate() / (a * a);
            }
            CHECK(std::abs(analytic - rhs) <= 1e-8);
            const double fd = (flow.scalar(tau + h) - flow.scalar(tau - h)) / (2.0 * h);
            CHECK(std::abs(fd - rhs) <= 1e-6);
        }
    }
}

TEST_CASE("contracted Bianchi identity by finite differences") {
    for (const FlowManifold& flow : test::model_flows()) {
        Rng rng(17, static_cast<int>(flow.kind()));
        const int d = flow.dim();
        for (int trial = 0; trial < 10; ++trial) {
            const ChartPoint p = test::random_point(flow, rng);
            const double tau = test::random_time(flow, rng);
            const Mat ric = flow.ricci(p.x, tau);
            const Mat g_inv = flow.metric_inverse(p.x, tau);
            const Christoffel gam = flow.christoffel(p.x);
            // Fourth-order central differences of Ric in each coordinate.
            std::vector<Mat> dric(d);
            const double h = 1e-3;
            for (int k = 0; k < d; ++k) {
                auto at = [&](double s) {
                    Vec u = p.x;
                    u(k) += s;
                    return Mat(flow.ricci(u, tau));
                };
                dric[k] = (8.0 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12.0 * h);
            }
            Vec div = Vec::Zero(d);
            for (int j = 0; j < d; ++j)
                for (int i = 0; i < d; ++i)
                    for (int k = 0; k < d; ++k) {
                        double cov = dric[k](i, j);
                        for (int m = 0; m < d; ++m)
                            cov -= gam.gamma[m](k, i) * ric(m, j) + gam.gamma[m](k, j) * ric(i, m);
                        div(j) += g_inv(i, k) * cov;
                    }
            const CurvaturePack pack = curvature_pack(flow, {p, tau});
            const Vec half_grad = 0.5 * flow.metric(p.x, tau) * pack.grad_scalar;
            CHECK((div - half_grad).cwiseAbs().maxCoeff() <= 1e-8);
        }
    }
}

TEST_CASE("Riemann tensor symmetries and trace") {
    for (const FlowManifold& flow : test::model_flows()) {
        Rng rng(18, static_cast<int>(flow.kind()));
        const int d = flow.dim();
        const ChartPoint p = test::random_point(flow, rng);
        const CurvaturePack pk = curvature_pack(flow, {p, test::random_time(flow, rng)});
        double worst = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k)
                    for (int l = 0; l < d; ++l) {
                        const double r = pk.riemann(i, j, k, l);
                        worst = std::max(worst, std::abs(r + pk.riemann(j, i, k, l)));
                        worst = std::max(worst, std::abs(r + pk.riemann(i, j, l, k)));
                        worst = std::max(worst, std::abs(r - pk.riemann(k, l, i, j)));
                        worst = std::max(worst, std::abs(r + pk.riemann(j, k, i, l) + pk.riemann(k, i, j, l)));
                    }
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) {
                double tr = 0.0;
                for (int i = 0; i < d; ++i)
                    for (int l = 0; l < d; ++l) tr += pk.g_inv(i, l) * pk.riemann(i, j, l, k);
                worst = std::max(worst, std::abs(tr - pk.ric(j, k)));
            }
        CHECK(worst <= 1e-10);
    }
}

TEST_CASE("chart handoff keeps the point") {
    const FlowManifold sphere = FlowManifold::round_sphere(2, 1.0, 1.0, 8.0);
    const ChartPoint far = point({3.0, 1.0}, 0);
    const ChartPoint n = sphere.normalize(far);
    CHECK(n.chart == 1);
    CHECK((sphere.embed_curved(n) - sphere.embed_curved(far)).norm() <= 1e-14);

    const FlowManifold flat = FlowManifold::flat_torus({1.0, 2.0}, 1.0, 8.0);
    const ChartPoint w = flat.normalize(point({-0.25, 4.5}));
    CHECK(w.x(0) == doctest::Approx(0.75));
    CHECK(w.x(1) == doctest::Approx(0.5));
}
