#include "smcsynth/polytope.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "smcsynth/errors.hpp"

namespace smcsynth {

PolytopicSystem::PolytopicSystem(std::vector<Matrix> vertices) : vertices_(std::move(vertices)) {
    if (vertices_.empty()) throw InvalidInput("polytope needs at least one vertex");
    n_ = vertices_.front().rows();
    m_ = vertices_.front().cols();
    if (n_ == 0 || m_ == 0) throw InvalidInput("vertex dimensions must be positive");
    for (std::size_t k = 0; k < vertices_.size(); ++k) {
        const Matrix& B = vertices_[k];
        if (B.rows() != n_ || B.cols() != m_)
            throw InvalidInput("vertex " + std::to_string(k + 1) + " is " +
                               std::to_string(B.rows()) + "x" + std::to_string(B.cols()) +
                               ", expected " + std::to_string(n_) + "x" + std::to_string(m_));
        if (!B.all_finite())
            throw InvalidInput("vertex " + std::to_string(k + 1) + " has non-finite entries");
    }
}

SimplexPoint::SimplexPoint(Vector weights) : w_(std::move(weights)) {
    if (w_.empty()) throw InvalidSimplexPoint("simplex point needs at least one weight");
    double sum = 0.0;
    for (double v : w_) {
        if (!std::isfinite(v) || v < 0.0)
            throw InvalidSimplexPoint("simplex weights must be finite and nonnegative");
        sum += v;
    }
    if (std::abs(sum - 1.0) > tolerance::simplex_sum)
        throw InvalidSimplexPoint("simplex weights sum to " + std::to_string(sum) + ", not 1");
}

SimplexPoint SimplexPoint::vertex(std::size_t N, std::size_t k) {
    if (k >= N) throw InvalidInput("simplex vertex index out of range");
    Vector w(N, 0.0);
    w[k] = 1.0;
    return SimplexPoint(std::move(w));
}

Matrix combine(const PolytopicSystem& sys, const SimplexPoint& alpha) {
    if (alpha.size() != sys.vertex_count())
        throw InvalidInput("simplex point has " + std::to_string(alpha.size()) +
                           " weights but the polytope has " + std::to_string(sys.vertex_count()) +
                           " vertices");
    Matrix B(sys.state_dim(), sys.input_dim());
    for (std::size_t k = 0; k < sys.vertex_count(); ++k) {
        if (alpha[k] == 0.0) continue;
        B += alpha[k] * sys.vertex(k);
    }
    return B;
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

SimplexPoint sample_simplex(std::size_t N, std::mt19937_64& rng) {
    if (N == 0) throw InvalidInput("simplex dimension must be at least 1");
    if (N == 1) return SimplexPoint({1.0});
    Vector w(N);
    double sum = 0.0;
    for (double& v : w) {
        v = -std::log1p(-uniform01(rng));
        sum += v;
    }
    for (double& v : w) v /= sum;
    return SimplexPoint(std::move(w));
}

SimplexPoint sample_simplex(std::size_t N, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sample_simplex(N, rng);
}

Matrix planar_rotation_like(double c, double s) { return Matrix{{c, s}, {-s, c}}; }

PolytopicSystem visual_servo_polytope(double phi_bar, double delta_bar) {
    if (!std::isfinite(phi_bar) || !std::isfinite(delta_bar))
        throw InvalidInput("visual-servo angles must be finite");
    if (delta_bar < 0.0 || delta_bar > std::numbers::pi / 2)
        throw InvalidInput("delta_bar must lie in [0, pi/2]");
    const Matrix nominal = planar_rotation_like(std::cos(phi_bar), std::sin(phi_bar));
    const double c_lo = std::cos(delta_bar);
    const double s_hi = std::sin(delta_bar);
    std::vector<Matrix> vertices;
    for (double c : {c_lo, 1.0})
        for (double s : {-s_hi, s_hi}) vertices.push_back(planar_rotation_like(c, s) * nominal);
    return PolytopicSystem(std::move(vertices));
}

PolytopicSystem rov_polytope(const RovParameters& p) {
    if (!(p.m0 > 0.0) || !(p.Iz > 0.0)) throw InvalidInput("ROV mass and inertia must be positive");
    if (!(p.g_lo <= p.g_hi)) throw InvalidInput("ROV gain interval requires g_lo <= g_hi");
    const double a = p.psi1;
    const double b = p.psi2;
    const Matrix Psi{{a, a, a, a}, {a, -a, -a, a}, {-b, b, -b, b}};
    const double minv[3] = {1.0 / p.m0, 1.0 / p.m0, 1.0 / p.Iz};
    std::vector<Matrix> vertices;
    for (double g1 : {p.g_lo, p.g_hi})
        for (double g3 : {p.g_lo, p.g_hi}) {
            const double pi[4] = {g1, 1.0, g3, 1.0};
            Matrix B(3, 4);
            for (std::size_t r = 0; r < 3; ++r)
                for (std::size_t c = 0; c < 4; ++c) B(r, c) = minv[r] * Psi(r, c) * pi[c];
            vertices.push_back(std::move(B));
        }
    return PolytopicSystem(std::move(vertices));
}

}  // namespace smcsynth
