#include <cmath>
#include <numbers>

#include "doctest.h"
#include "test_util.hpp"

#include "smcsynth/errors.hpp"
#include "smcsynth/synthesis.hpp"

using namespace smcsynth;
using std::numbers::pi;

namespace {

PolytopicSystem example1() { return visual_servo_polytope(pi / 6, pi / 4); }

SynthesisOptions fixed(double param, double phi, double rho) {
    SynthesisOptions o;
    o.param = param;
    o.phi = phi;
    o.rho_fixed = rho;
    return o;
}

SynthesisOptions optimized(double param, double phi) {
    SynthesisOptions o;
    o.param = param;
    o.phi = phi;
    o.optimize = true;
    return o;
}

SynthesisOptions plain(double param) {
    SynthesisOptions o;
    o.param = param;
    return o;
}

double max_real_eig(const Matrix& A) {
    return Eigen::EigenSolver<Eigen::MatrixXd>(testutil::to_eigen(A)).eigenvalues().real().maxCoeff();
}

// Largest eigenvalue of the VSC decrease condition, computed with Eigen.
double vsc_oracle(const Matrix& P, const Matrix& B, const Matrix& K, const Matrix& Q) {
    const Matrix PBK = P * B * K;
    return testutil::eig_max(PBK + PBK.transpose() + Q);
}

double uvc_oracle(const Matrix& P, const Matrix& B, const Matrix& K, const Matrix& Q, double mu) {
    const Matrix BK = B * K;
    const Matrix PBK = P * BK;
    return testutil::eig_max((1.0 / mu) * (BK.transpose() * BK) + (mu / 4) * (P * P) + PBK +
                             PBK.transpose() + Q);
}

}  // namespace

TEST_CASE("Example 1 VSC with fixed rho") {
    const auto sys = example1();
    const VscDesign d = synth_vsc(sys, fixed(0.001, 0.1, 0.25));
    CHECK(d.margin < -1e-8);
    REQUIRE(d.T_bound);
    CHECK(*d.T_bound == doctest::Approx(0.5));
    CHECK(d.rho_fixed);
    CHECK(d.lambda_min_Q >= 1.0 / 0.25 - 1e-6);
    for (std::size_t i = 0; i < 2; ++i) CHECK(d.P(i, i) <= 0.1 + 1e-8);
    CHECK(d.P(0, 1) == 0.0);
    // independent recomputation of the margin
    double m = -INFINITY;
    for (const auto& B : sys.vertices()) m = std::max(m, vsc_oracle(d.P, B, d.K, d.Q));
    CHECK(d.margin == doctest::Approx(m).epsilon(1e-8));
}

TEST_CASE("Example 1 UVC with fixed rho") {
    const auto sys = example1();
    const UvcDesign d = synth_uvc(sys, fixed(1000.0, 0.1, 0.5));
    CHECK(d.margin < -1e-8);
    REQUIRE(d.T_bound);
    CHECK(*d.T_bound == doctest::Approx(0.5));
    CHECK(d.lambda_min_Q >= 1.0 / 0.5 - 1e-6);
    CHECK(testutil::eig_max(d.P) <= 0.1 + 1e-8);
    double m = -INFINITY;
    for (const auto& B : sys.vertices()) m = std::max(m, uvc_oracle(d.P, B, d.K, d.Q, 1000.0));
    CHECK(d.margin == doctest::Approx(m).epsilon(1e-6));
}

TEST_CASE("scalar interval plant needs a negative gain") {
    const PolytopicSystem sys({Matrix{{1.0}}, Matrix{{2.0}}});
    const VscDesign v = synth_vsc(sys, plain(0.5));
    CHECK(v.K(0, 0) < 0.0);
    CHECK_FALSE(v.rho);
    CHECK_FALSE(v.T_bound);
    const UvcDesign u = synth_uvc(sys, plain(1.0));
    CHECK(u.K(0, 0) < 0.0);

    const PolytopicSystem wrong_sign({Matrix{{-1.0}}, Matrix{{1.0}}});
    CHECK_THROWS_AS(synth_vsc(wrong_sign, plain(0.5)), SynthesisInfeasible);
}

TEST_CASE("duplicate vertices give the single-vertex design") {
    const Matrix B{{1.0, 0.2}, {-0.3, 0.8}};
    const VscDesign a = synth_vsc(PolytopicSystem({B}), optimized(0.1, 0.5));
    const VscDesign b = synth_vsc(PolytopicSystem({B, B, B}), optimized(0.1, 0.5));
    CHECK(a.K == b.K);
    CHECK(a.P == b.P);
    CHECK(*a.rho == *b.rho);
}

TEST_CASE("optimized designs satisfy the certificate identities") {
    const auto rov = rov_polytope({});
    const VscDesign v = synth_vsc(rov, optimized(0.2395, 0.4));
    REQUIRE(v.rho);
    CHECK(v.lambda_min_Q >= 1.0 / *v.rho - 1e-6);
    CHECK(*v.T_bound == doctest::Approx(2.0 * *v.rho));
    CHECK(testutil::eig_max(v.P - 0.4 * Matrix::identity(3)) <= 1e-8);

    const UvcDesign u = synth_uvc(rov, optimized(32.9034, 0.4));
    REQUIRE(u.rho);
    CHECK(u.lambda_min_Q >= 1.0 / *u.rho - 1e-6);
    CHECK(*u.T_bound == doctest::Approx(*u.rho));
    CHECK(testutil::eig_max(u.P - 0.4 * Matrix::identity(3)) <= 1e-8);
}

TEST_CASE("certified designs are robust across the hull") {
    const auto rov = rov_polytope({});
    const VscDesign v = synth_vsc(rov, optimized(0.2395, 0.4));
    const UvcDesign u = synth_uvc(rov, optimized(32.9034, 0.4));
    const VscDesign e = synth_vsc(example1(), fixed(0.001, 0.1, 0.25));
    std::mt19937_64 rng(17);
    for (int t = 0; t < 100; ++t) {
        const Matrix B = combine(rov, sample_simplex(4, rng));
        CHECK(vsc_oracle(v.P, B, v.K, v.Q) < 0.0);
        CHECK(uvc_oracle(u.P, B, u.K, u.Q, 32.9034) < 0.0);
        CHECK(max_real_eig(B * v.K) < 0.0);
        CHECK(max_real_eig(B * u.K) < 0.0);
        const Matrix B1 = combine(example1(), sample_simplex(4, rng));
        CHECK(vsc_oracle(e.P, B1, e.K, e.Q) < 0.0);
        CHECK(max_real_eig(B1 * e.K) < 0.0);
    }
}

TEST_CASE("verify rejects a zero gain") {
    const auto sys = example1();
    VscDesign v = synth_vsc(sys, fixed(0.001, 0.1, 0.25));
    v.K = Matrix(2, 2);
    CHECK(verify_vsc(v, sys) == doctest::Approx(lambda_max(SymMatrix(v.Q))));
    CHECK(verify_vsc(v, sys) > 0.0);

    UvcDesign u = synth_uvc(sys, fixed(1000.0, 0.1, 0.5));
    u.K = Matrix(2, 2);
    const Matrix expect = 250.0 * (u.P * u.P) + u.Q;
    CHECK(verify_uvc(u, sys) == doctest::Approx(testutil::eig_max(expect)).epsilon(1e-9));
}

TEST_CASE("UVC margin grows without bound in mu") {
    const auto sys = rov_polytope({});
    const UvcDesign u = synth_uvc(sys, optimized(32.9034, 0.4));
    double prev = verify_uvc(u, sys, 32.9034);
    CHECK(prev < 0.0);
    for (double mu : {1e3, 1e5, 1e7, 1e9}) {
        const double m = verify_uvc(u, sys, mu);
        CHECK(m > prev);
        prev = m;
    }
    CHECK(prev > 1.0);
}

TEST_CASE("reference gains for Example 1 admit certificates") {
    const auto sys = example1();
    const Matrix Kv{{-33.2438, 19.1933}, {-19.1933, -33.2438}};
    const VscDesign v = certify_gain_vsc(sys, Kv, 0.001);
    CHECK(v.K == Kv);
    CHECK(verify_vsc(v, sys) < -1e-8);
    const Matrix Ku{{-52.8970, 30.5401}, {-30.5401, -52.8970}};
    const UvcDesign u = certify_gain_uvc(sys, Ku, 1000.0);
    CHECK(verify_uvc(u, sys) < -1e-8);
}

TEST_CASE("Lyapunov functions and reaching bounds") {
    const auto sys = example1();
    const VscDesign v = synth_vsc(sys, fixed(0.001, 0.1, 0.25));
    const UvcDesign u = synth_uvc(sys, fixed(1000.0, 0.1, 0.5));
    const Vector zero{0.0, 0.0};
    CHECK(reaching_bound_vsc(v, zero) == 0.0);
    CHECK(lyapunov_uvc(u.P, zero) == 0.0);
    CHECK_THROWS_AS(reaching_bound_uvc(u, zero), InvalidInput);
    CHECK(in_omega_vsc(v, zero));
    CHECK(in_omega_uvc(u, zero));

    const Vector s{0.3, -1.1};
    const Vector s2{0.6, -2.2};
    CHECK(reaching_bound_vsc(v, s2) == doctest::Approx(2 * reaching_bound_vsc(v, s)));
    const Vector s3{0.9, -3.3};
    CHECK(reaching_bound_uvc(u, s3) == doctest::Approx(3 * reaching_bound_uvc(u, s)));

    const Matrix I = Matrix::identity(2);
    const Vector e1{1.0, 0.0};
    CHECK(lyapunov_vsc(I, e1) == 1.0);
    CHECK(lyapunov_uvc(I, s) == doctest::Approx(std::hypot(0.3, 1.1)));
    UvcDesign unit = u;
    unit.P = I;
    CHECK(reaching_bound_uvc(unit, s) == doctest::Approx(std::hypot(0.3, 1.1) / u.lambda_min_Q));
    VscDesign vunit = v;
    vunit.P = I;
    CHECK(in_omega_vsc(vunit, e1));
    CHECK_FALSE(in_omega_vsc(vunit, Vector{1.0, 1e-9}));
}

TEST_CASE("initial-condition sets sit inside the guaranteed sets") {
    const auto sys = example1();
    const double phi = 0.1;
    const VscDesign v = synth_vsc(sys, fixed(0.001, phi, 0.25));
    const UvcDesign u = synth_uvc(sys, fixed(1000.0, phi, 0.5));
    std::mt19937_64 rng(3);
    for (int k = 0; k < 1000; ++k) {
        const double th = 2 * pi * testutil::random_matrix(1, 1, rng)(0, 0);
        // x on the sphere x^T x = 1/phi, sigma_i = sign * x_i^2
        const double r = std::sqrt(1.0 / phi);
        const double x1 = r * std::cos(th);
        const double x2 = r * std::sin(th);
        const Vector sv{std::copysign(x1 * x1, x1), std::copysign(x2 * x2, x2)};
        CHECK(in_omega_vsc(v, sv));
        CHECK(reaching_bound_vsc(v, sv) <= *v.T_bound + 1e-9);
        // z = sigma / sqrt(||sigma||) on the sphere z^T z = 1/phi means ||sigma|| = 1/phi
        const Vector su{std::cos(th) / phi, std::sin(th) / phi};
        CHECK(in_omega_uvc(u, su));
        CHECK(reaching_bound_uvc(u, su) <= *u.T_bound + 1e-9);
    }
}

TEST_CASE("Example 2 initial condition lies within the optimized bound") {
    const auto rov = rov_polytope({});
    const Vector s0{1.0, 1.0, pi / 4};
    const VscDesign v = synth_vsc(rov, optimized(0.2395, 0.4));
    // sum |sigma_i| = 2 + pi/4 exceeds 1/phi = 2.5, so inclusion in Omega is not implied
    CHECK(2.0 + pi / 4 > 1.0 / 0.4);
    if (in_omega_vsc(v, s0)) CHECK(reaching_bound_vsc(v, s0) <= *v.T_bound);
    Vector scaled = s0;
    const double V0 = lyapunov_vsc(v.P, s0);
    for (double& x : scaled) x /= V0;
    CHECK(in_omega_vsc(v, scaled));
    CHECK(reaching_bound_vsc(v, scaled) <= *v.T_bound * (1 + 1e-12));
    const UvcDesign u = synth_uvc(rov, optimized(32.9034, 0.4));
    REQUIRE(in_omega_uvc(u, s0));
    CHECK(reaching_bound_uvc(u, s0) <= *u.T_bound);
}

TEST_CASE("sweep") {
    const auto rov = rov_polytope({});
    const auto one = sweep(rov, ControlLaw::Vsc, {0.2395}, 0.4);
    REQUIRE(one.size() == 1);
    CHECK(one[0].status == "ok");
    CHECK(*one[0].T_bound == doctest::Approx(*synth_vsc(rov, optimized(0.2395, 0.4)).T_bound).epsilon(1e-9));

    std::vector<double> mus;
    for (int k = 0; k < 7; ++k) mus.push_back(std::pow(10.0, 0.5 * k));
    const auto rows = sweep(rov, ControlLaw::Uvc, mus, 0.4, {}, 2);
    REQUIRE(rows.size() == mus.size());
    std::optional<double> prev;
    for (const auto& r : rows) {
        if (r.status != "ok") continue;
        if (prev) CHECK(*r.T_bound <= *prev * (1 + 1e-4));
        prev = r.T_bound;
    }
    CHECK(prev);

    const auto serial = sweep(rov, ControlLaw::Uvc, mus, 0.4, {}, 1);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].T_bound == serial[i].T_bound);
}

TEST_CASE("parameter validation") {
    const auto sys = example1();
    CHECK_THROWS_AS(synth_vsc(sys, plain(0.0)), InvalidParameter);
    SynthesisOptions both = fixed(0.001, 0.1, 0.25);
    both.optimize = true;
    CHECK_THROWS_AS(synth_vsc(sys, both), InvalidParameter);
    CHECK_THROWS_AS(parse_control_law("pid"), InvalidInput);
    CHECK(parse_control_law("uvc") == ControlLaw::Uvc);
}
