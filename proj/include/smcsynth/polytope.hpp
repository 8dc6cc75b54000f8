#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "smcsynth/matkernel.hpp"

namespace smcsynth {

/**
 * Uncertain input matrix B known only to lie in the convex hull of N vertex
 * matrices B_1..B_N, each n x m. Immutable once built.
 */
class PolytopicSystem {
public:
    explicit PolytopicSystem(std::vector<Matrix> vertices);

    std::size_t state_dim() const noexcept { return n_; }
    std::size_t input_dim() const noexcept { return m_; }
    std::size_t vertex_count() const noexcept { return vertices_.size(); }
    const Matrix& vertex(std::size_t k) const { return vertices_.at(k); }
    const std::vector<Matrix>& vertices() const noexcept { return vertices_; }

private:
    std::size_t n_ = 0;
    std::size_t m_ = 0;
    std::vector<Matrix> vertices_;
};

/// A point of the unit simplex: nonnegative weights summing to one.
class SimplexPoint {
public:
    explicit SimplexPoint(Vector weights);

    /// The k-th unit coordinate e_k of the N-simplex.
    static SimplexPoint vertex(std::size_t N, std::size_t k);

    std::size_t size() const noexcept { return w_.size(); }
    double operator[](std::size_t i) const { return w_[i]; }
    const Vector& weights() const noexcept { return w_; }

private:
    Vector w_;
};

/// sum_i alpha_i B_i.
Matrix combine(const PolytopicSystem& sys, const SimplexPoint& alpha);

/// Uniform draw from the simplex via normalized exponential variates.
SimplexPoint sample_simplex(std::size_t N, std::uint64_t seed);
SimplexPoint sample_simplex(std::size_t N, std::mt19937_64& rng);

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
double uniform01(std::mt19937_64& rng);

/// 2x2 matrix [[c, s], [-s, c]].
Matrix planar_rotation_like(double c, double s);

/**
 * Camera-rotation polytope for the planar visual-servo plant
 * B(phi) = B(dphi) B(phi_bar) with |dphi| <= delta_bar.
 *
 * The pair (cos dphi, sin dphi) is overbounded by the box
 * [cos delta_bar, 1] x [-sin delta_bar, sin delta_bar]. Vertex order is
 * (c, s) = (cos, -sin), (cos, +sin), (1, -sin), (1, +sin).
 */
PolytopicSystem visual_servo_polytope(double phi_bar, double delta_bar);

struct RovParameters {
    double m0 = 290.0;                      ///< vehicle mass [kg]
    double Iz = 290.0;                      ///< yaw inertia [kg m^2]
    double psi1 = 0.70710678118654752440;   ///< sqrt(2)/2
    double psi2 = 0.35;                     ///< thruster lever arm [m]
    double g_lo = 0.5;
    double g_hi = 1.0;
};

/**
 * Over-actuated ROV: B(g) = M^{-1} Psi diag(g1, 1, g3, 1) with M =
 * diag(m0, m0, Iz). Vertices are the corners
 * (g1, g3) = (lo, lo), (lo, hi), (hi, lo), (hi, hi).
 */
PolytopicSystem rov_polytope(const RovParameters& p);

}  // namespace smcsynth
