#pragma once

/**
 * Fixed-step RK4 simulation of the closed loops sigma' = B K sgn(sigma) and
 * sigma' = B K sigma / ||sigma||.
 *
 * The discontinuity is smoothed by a boundary layer of width reg_eps:
 * sgn(s_i) becomes s_i / max(|s_i|, reg_eps) and sigma / ||sigma|| becomes
 * sigma / max(||sigma||, reg_eps). Outside the layer both are exact.
 *
 * Inside the layer the right-hand side has Lipschitz constant up to
 * ||BK|| / reg_eps. A single RK4 step of size dt is unstable there once
 * ||BK|| dt / reg_eps exceeds about 2.8 and can stall the state on a
 * spurious fixed point, so each sample interval dt is split into equal RK4
 * substeps with ||BK||_F h / reg_eps <= 1. Samples are still recorded every dt.
 */

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "smcsynth/errors.hpp"
#include "smcsynth/matkernel.hpp"
#include "smcsynth/polytope.hpp"
#include "smcsynth/synthesis.hpp"

namespace smcsynth {

struct SimConfig {
    double dt = 1e-4;
    double horizon = 1.0;
    double reg_eps = 1e-4;
    double reach_tol = 1e-3;
    std::uint64_t seed = 0;
    /// Split each dt into integration_substeps() RK4 steps. With false, one RK4 step per dt.
    bool resolve_layer = true;

    /// Throws InvalidParameter on dt <= 0, horizon < dt, reg_eps <= 0 or reach_tol <= 0.
    void validate() const;
};

/// 4 T_bound, the default horizon for a design with a reaching-time bound.
double default_horizon(double T_bound);

/// Row-major per-step storage; step k is at time k * dt.
struct SimTrace {
    std::size_t n = 0;
    std::size_t m = 0;
    std::vector<double> times;
    std::vector<double> states;
    std::vector<double> inputs;
    std::vector<double> lyapunov;
    /// First time each |sigma_i| drops below reach_tol for good (VSC only).
    std::vector<std::optional<double>> reach_time_per_state;
    /// First time max_i |sigma_i| (VSC) or ||sigma|| (UVC) drops below reach_tol for good.
    std::optional<double> reach_time;

    std::size_t steps() const noexcept { return times.size(); }
    std::span<const double> state(std::size_t k) const { return {states.data() + k * n, n}; }
    std::span<const double> input(std::size_t k) const { return {inputs.data() + k * m, m}; }
};

class SimulationDiverged : public Error {
public:
    SimulationDiverged(const std::string& what, SimTrace partial)
        : Error(what), partial_(std::move(partial)) {}
    const SimTrace& partial() const noexcept { return partial_; }

private:
    SimTrace partial_;
};

inline constexpr std::size_t kMaxSubsteps = 1000000;

/// ceil(||BK||_F dt / reg_eps), at least 1; 1 when resolve_layer is off.
/// Throws InvalidParameter above kMaxSubsteps.
std::size_t integration_substeps(const Matrix& B, const Matrix& K, const SimConfig& cfg);

/// K s with s_i = sigma_i / max(|sigma_i|, reg_eps).
Vector control_vsc(const Matrix& K, std::span<const double> sigma, double reg_eps);
/// K sigma / max(||sigma||, reg_eps).
Vector control_uvc(const Matrix& K, std::span<const double> sigma, double reg_eps);

Vector rhs_vsc(const Matrix& B, const Matrix& K, std::span<const double> sigma, double reg_eps);
Vector rhs_uvc(const Matrix& B, const Matrix& K, std::span<const double> sigma, double reg_eps);

/**
 * Integrates from sigma0 over [0, horizon]. The Lyapunov channel uses P when
 * given (V for VSC, U for UVC); without P it uses the identity weight.
 * Throws SimulationDiverged, carrying the steps computed so far, when the
 * state becomes non-finite or grows without bound.
 */
SimTrace simulate(ControlLaw law, const Matrix& B, const Matrix& K, std::span<const double> sigma0,
                  const SimConfig& cfg, const std::optional<Matrix>& P = std::nullopt);

struct LyapunovCheck {
    std::size_t violations = 0;
    /// Largest increase between consecutive samples outside the layer (may be negative).
    double max_increase = 0.0;
    double tolerance = 0.0;
    std::optional<std::size_t> first_violation;
};

/**
 * Checks that the Lyapunov channel does not increase by more than
 * 10 dt L between consecutive samples that both lie outside the layer.
 * L bounds the channel's rate of change: Lipschitz constant of V or U times a
 * bound on ||sigma'|| over the layer-free region.
 */
LyapunovCheck check_lyapunov_decrease(const SimTrace& trace, ControlLaw law, const Matrix& P,
                                      const Matrix& B, const Matrix& K, const SimConfig& cfg);

struct TrialResult {
    std::size_t index = 0;
    Vector alpha;
    Vector sigma0;
    std::optional<double> reach_time;
    double bound = 0.0;
    /// reach_time / bound; infinity when the trial never reached.
    double ratio = 0.0;
    bool bound_violated = false;
    bool t_bound_violated = false;
    LyapunovCheck lyapunov;
};

struct EmpiricalReport {
    std::size_t trials = 0;
    double max_ratio = 0.0;
    std::vector<TrialResult> results;
    std::vector<std::size_t> bound_violations;
    std::vector<std::size_t> t_bound_violations;
    std::vector<std::size_t> lyapunov_violations;
};

/**
 * Monte-Carlo check of the analytic reaching bound. Each trial draws a
 * simplex point and a nonzero sigma0 in the guaranteed set (rejection
 * sampling from a bounding box) from its own seeded stream, so results do not
 * depend on `jobs`.
 */
EmpiricalReport empirical_vs_bound(const VscDesign& d, const PolytopicSystem& sys,
                                   std::size_t trials, const SimConfig& cfg, std::uint64_t seed,
                                   unsigned jobs = 1);
EmpiricalReport empirical_vs_bound(const UvcDesign& d, const PolytopicSystem& sys,
                                   std::size_t trials, const SimConfig& cfg, std::uint64_t seed,
                                   unsigned jobs = 1);

}  // namespace smcsynth
