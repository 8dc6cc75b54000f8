#include <cmath>
#include <numbers>

#include "doctest.h"
#include "test_util.hpp"

#include "smcsynth/errors.hpp"
#include "smcsynth/lmi.hpp"

using namespace smcsynth;
using Eigen::MatrixXd;
using testutil::to_eigen;

namespace {

Vector random_x(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Vector x(n);
    for (double& v : x) v = nd(rng);
    return x;
}

MatrixXd block(const MatrixXd& a, const MatrixXd& b, const MatrixXd& c, const MatrixXd& d) {
    MatrixXd out(a.rows() + c.rows(), a.cols() + b.cols());
    out << a, b, c, d;
    return out;
}

const AffineMatrixInequality& find(const SdpProblem& p, const std::string& label) {
    for (const auto& c : p.constraints)
        if (c.label == label) return c;
    FAIL("missing constraint " << label);
    throw;
}

PolytopicSystem example1() { return visual_servo_polytope(std::numbers::pi / 6, std::numbers::pi / 4); }

}  // namespace

TEST_CASE("layout packing round-trips for every structure") {
    VariableLayout L;
    L.add("D", Structure::Diagonal, 3);
    L.add("S", Structure::Symmetric, 3);
    L.add("F", Structure::Full, 2, 3);
    L.add("r", Structure::Scalar, 1);
    CHECK(L.total_scalars() == 3 + 6 + 6 + 1);
    std::mt19937_64 rng(1);
    const Vector x = random_x(L.total_scalars(), rng);
    Vector y(L.total_scalars(), 0.0);
    for (const auto& b : L.blocks()) {
        if (b.structure == Structure::Scalar)
            L.pack(b.name, Matrix{{L.unpack_scalar(x, b.name)}}, y);
        else
            L.pack(b.name, L.unpack(x, b.name), y);
    }
    CHECK(x == y);

    const Matrix D = L.unpack(x, "D");
    CHECK(D(0, 1) == 0.0);
    const Matrix S = L.unpack(x, "S");
    CHECK(S == S.transpose());
    CHECK_THROWS_AS(L.add("D", Structure::Full, 1, 1), InvalidInput);
    CHECK_THROWS_AS(L.block("nope"), InvalidInput);
}

TEST_CASE("affine evaluation") {
    VariableLayout L;
    L.add("a", Structure::Scalar, 1);
    const Matrix C{{1, 2}, {2, 5}};
    std::map<std::size_t, Matrix> coeffs;
    coeffs.emplace(0, Matrix::identity(2));
    const AffineMatrix e(C, coeffs);
    const Vector zero{0.0};
    CHECK(e.evaluate(zero) == C);
    const Vector two{2.0};
    CHECK(e.evaluate(two) == C + 2.0 * Matrix::identity(2));
    const auto ami = AffineMatrixInequality::from(e, Sense::PositiveSemidefinite, 0.0, "t", 1);
    CHECK(evaluate(ami, two).matrix() == C + 2.0 * Matrix::identity(2));
}

TEST_CASE("scalar VSC vertex block") {
    const PolytopicSystem sys({Matrix{{1.0}}});
    const double xi = 0.3;
    const SdpProblem p = assemble_vsc(sys, xi);
    CHECK(p.layout.total_scalars() == 4);
    const double W = 0.7, X = 1.3, R = 0.4, Z = -2.1;
    Vector x(4);
    p.layout.pack("W", Matrix{{W}}, x);
    p.layout.pack("X", Matrix{{X}}, x);
    p.layout.pack("R", Matrix{{R}}, x);
    p.layout.pack("Z", Matrix{{Z}}, x);
    const SymMatrix M = evaluate(find(p, "vertex 1"), x);
    CHECK(M(0, 0) == doctest::Approx(2 * Z + R));
    CHECK(M(0, 1) == doctest::Approx(W - X + xi * Z));
    CHECK(M(1, 1) == doctest::Approx(-2 * xi * X));
}

TEST_CASE("scalar UVC vertex block") {
    const PolytopicSystem sys({Matrix{{1.0}}});
    const SdpProblem p = assemble_uvc(sys, 4.0);
    const double X = 0.9, R = 0.4, Z = -1.5;
    Vector x(3);
    p.layout.pack("X", Matrix{{X}}, x);
    p.layout.pack("R", Matrix{{R}}, x);
    p.layout.pack("Z", Matrix{{Z}}, x);
    const SymMatrix M = evaluate(find(p, "vertex 1"), x);
    CHECK(M(0, 0) == doctest::Approx(2 * Z + 1 + R));
    CHECK(M(0, 1) == doctest::Approx(Z));
    CHECK(M(1, 1) == doctest::Approx(-4.0));
}

TEST_CASE("Example 1 VSC problem size") {
    LmiOptions o;
    o.include_opt = true;
    o.phi = 0.1;
    const SdpProblem p = assemble_vsc(example1(), 0.001, o);
    CHECK(p.layout.total_scalars() == 12);
    std::size_t vertex_blocks = 0;
    for (const auto& c : p.constraints)
        if (c.label.rfind("vertex", 0) == 0) {
            ++vertex_blocks;
            CHECK(c.order == 4);
        }
    CHECK(vertex_blocks == 4);
    CHECK(p.objective[p.layout.block("rho").offset] == 1.0);

    const SdpProblem q = assemble_vsc(example1(), 0.001);
    for (double v : q.objective) CHECK(v == 0.0);
    const SdpProblem u = assemble_uvc(example1(), 1000.0);
    for (double v : u.objective) CHECK(v == 0.0);
}

TEST_CASE("assembled VSC blocks match direct substitution") {
    const auto sys = rov_polytope({});
    const double xi = 0.2395;
    const double phi = 0.4;
    LmiOptions o;
    o.include_opt = true;
    o.phi = phi;
    const SdpProblem p = assemble_vsc(sys, xi, o);
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        const Vector x = random_x(p.layout.total_scalars(), rng);
        const MatrixXd W = to_eigen(p.layout.unpack(x, "W"));
        const MatrixXd X = to_eigen(p.layout.unpack(x, "X"));
        const MatrixXd R = to_eigen(p.layout.unpack(x, "R"));
        const MatrixXd Z = to_eigen(p.layout.unpack(x, "Z"));
        const double rho = p.layout.unpack_scalar(x, "rho");
        const MatrixXd I = MatrixXd::Identity(3, 3);
        for (std::size_t i = 0; i < 4; ++i) {
            const MatrixXd BZ = to_eigen(sys.vertex(i)) * Z;
            const MatrixXd off = W - X + xi * BZ.transpose();
            const MatrixXd ref = block(BZ + BZ.transpose() + R, off, off.transpose(), -2 * xi * X);
            const MatrixXd got = to_eigen(evaluate(find(p, "vertex " + std::to_string(i + 1)), x));
            CHECK((got - ref).cwiseAbs().maxCoeff() < 1e-12 * (1 + ref.cwiseAbs().maxCoeff()));
        }
        const MatrixXd dec = block(R, X, X, rho * I);
        CHECK((to_eigen(evaluate(find(p, "decay rate [R X; X rho I]"), x)) - dec).cwiseAbs().maxCoeff() < 1e-12);
        const MatrixXd ini = block(phi * I, I, I, 2 * X - W);
        CHECK((to_eigen(evaluate(find(p, "initial set [phi I, I; I, 2X - W]"), x)) - ini).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("assembled UVC blocks match direct substitution") {
    const auto sys = rov_polytope({});
    const double mu = 32.9034;
    LmiOptions o;
    o.include_opt = true;
    o.phi = 0.4;
    const SdpProblem p = assemble_uvc(sys, mu, o);
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
        const Vector x = random_x(p.layout.total_scalars(), rng);
        const MatrixXd X = to_eigen(p.layout.unpack(x, "X"));
        const MatrixXd R = to_eigen(p.layout.unpack(x, "R"));
        const MatrixXd Z = to_eigen(p.layout.unpack(x, "Z"));
        const MatrixXd I = MatrixXd::Identity(3, 3);
        for (std::size_t i = 0; i < 4; ++i) {
            const MatrixXd BZ = to_eigen(sys.vertex(i)) * Z;
            const MatrixXd ref =
                block(BZ + BZ.transpose() + mu / 4 * I + R, BZ.transpose(), BZ, -mu * I);
            const MatrixXd got = to_eigen(evaluate(find(p, "vertex " + std::to_string(i + 1)), x));
            CHECK((got - ref).cwiseAbs().maxCoeff() < 1e-12 * (1 + ref.cwiseAbs().maxCoeff()));
        }
        const MatrixXd ini = block(0.4 * I, I, I, X);
        CHECK((to_eigen(evaluate(find(p, "initial set [phi I, I; I, X]"), x)) - ini).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("coefficients are exactly symmetric") {
    LmiOptions o;
    o.include_opt = true;
    o.phi = 0.4;
    for (const SdpProblem& p : {assemble_vsc(rov_polytope({}), 0.2, o), assemble_uvc(rov_polytope({}), 30, o),
                                assemble_vsc(example1(), 0.001, o), assemble_uvc(example1(), 1000, o)}) {
        for (const auto& c : p.constraints) {
            CHECK(c.constant.matrix() == c.constant.matrix().transpose());
            for (const auto& [k, a] : c.coeffs) CHECK(a.matrix() == a.matrix().transpose());
        }
    }
}

TEST_CASE("standard form") {
    LmiOptions o;
    o.include_opt = true;
    o.phi = 0.1;
    const SdpProblem p = assemble_vsc(example1(), 0.001, o);
    CHECK_FALSE(p.is_standard_form());
    const SdpProblem s = to_standard_form(p);
    CHECK(s.is_standard_form());
    CHECK(to_standard_form(s).constraints.size() == s.constraints.size());

    std::mt19937_64 rng(6);
    for (int t = 0; t < 10; ++t) {
        const Vector x = random_x(p.layout.total_scalars(), rng);
        for (std::size_t c = 0; c < p.constraints.size(); ++c) {
            const auto& orig = p.constraints[c];
            Matrix expect = evaluate(orig, x).matrix();
            if (orig.sense == Sense::NegativeDefinite) expect *= -1.0;
            expect -= orig.strictness_margin * Matrix::identity(orig.order);
            CHECK(testutil::max_abs_diff(evaluate(s.constraints[c], x).matrix(), expect) < 1e-12);
        }
    }

    // M < 0 with margin 1e-6 becomes -M - 1e-6 I >= 0
    SdpProblem one;
    one.constraints.push_back(AffineMatrixInequality::from(AffineMatrix(Matrix{{-2.0}}),
                                                           Sense::NegativeDefinite, 1e-6, "m", 0));
    const auto st = to_standard_form(one);
    CHECK(st.constraints[0].constant(0, 0) == doctest::Approx(2.0 - 1e-6).epsilon(1e-15));
}

TEST_CASE("vertex inequalities extend to the whole hull") {
    // Any x satisfying all vertex blocks satisfies the block rebuilt at B(alpha).
    const auto sys = rov_polytope({});
    const SdpProblem p = assemble_vsc(sys, 0.2395);
    std::mt19937_64 rng(8);
    std::size_t tested = 0;
    for (int t = 0; t < 4000 && tested < 5; ++t) {
        Vector x = random_x(p.layout.total_scalars(), rng);
        bool ok = true;
        for (const auto& c : p.constraints) {
            const double e = c.sense == Sense::NegativeDefinite ? -lambda_max(evaluate(c, x))
                                                                : lambda_min(evaluate(c, x));
            ok = ok && e > 0.0;
        }
        if (!ok) continue;
        ++tested;
        for (int a = 0; a < 100; ++a) {
            const PolytopicSystem single({combine(sys, sample_simplex(4, rng))});
            const SdpProblem q = assemble_vsc(single, 0.2395);
            CHECK(lambda_max(evaluate(find(q, "vertex 1"), x)) < 0.0);
        }
    }
    // Random points are rarely feasible; fall back to a constructed feasible point.
    if (tested == 0) {
        Vector x(p.layout.total_scalars(), 0.0);
        p.layout.pack("X", Matrix::identity(3), x);
        p.layout.pack("W", Matrix::identity(3), x);
        p.layout.pack("R", 1e-3 * Matrix::identity(3), x);
        Matrix Z(4, 3);
        const Matrix Bt = sys.vertex(3).transpose();
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = 0; c < 3; ++c) Z(r, c) = -1e4 * Bt(r, c);
        p.layout.pack("Z", Z, x);
        for (const auto& c : p.constraints)
            if (c.label.rfind("vertex", 0) == 0) REQUIRE(lambda_max(evaluate(c, x)) < 0.0);
        for (int a = 0; a < 100; ++a) {
            const PolytopicSystem single({combine(sys, sample_simplex(4, rng))});
            CHECK(lambda_max(evaluate(find(assemble_vsc(single, 0.2395), "vertex 1"), x)) < 0.0);
        }
    }
}

TEST_CASE("duplicate vertices are assembled once") {
    const Matrix B{{1.0, 0.5}, {0.0, 2.0}};
    const PolytopicSystem dup({B, B, B});
    CHECK(distinct_vertices(dup).size() == 1);
    CHECK(assemble_vsc(dup, 0.1).constraints.size() == assemble_vsc(PolytopicSystem({B}), 0.1).constraints.size());
}

TEST_CASE("parameter validation") {
    const auto sys = example1();
    CHECK_THROWS_AS(assemble_vsc(sys, 0.0), InvalidParameter);
    CHECK_THROWS_AS(assemble_uvc(sys, -1.0), InvalidParameter);
    LmiOptions o;
    o.include_opt = true;
    CHECK_THROWS_AS(assemble_vsc(sys, 0.1, o), InvalidParameter);
    LmiOptions r;
    r.rho_fixed = 0.5;
    CHECK_THROWS_AS(assemble_uvc(sys, 1.0, r), InvalidParameter);
    CHECK_THROWS_AS(assemble_vsc_fixed_gain(sys, Matrix(3, 2), 0.1), InvalidInput);
}
