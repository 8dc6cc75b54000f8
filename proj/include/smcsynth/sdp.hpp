#pragma once

/**
 * Dense semidefinite programming for small LMI problems:
 *
 *   minimize c^T x  subject to  F_j(x) = C_j + sum_i x_i A_ji >= 0,  j = 1..J.
 *
 * The solver is a primal log-barrier path-following method. Iterates stay
 * strictly inside every constraint, so any returned point is feasible by
 * construction and can be handed to certify() for an independent check.
 *
 * Starting point: x = 0 when it is strictly feasible; otherwise a phase-I
 * problem minimizes a uniform shift s subject to F_j(x) + s I >= 0.
 * A phase-I optimum above `infeasibility_tol` is reported as Infeasible.
 * Phase I is confined to the box |x_i| <= phase1_box.
 *
 * Pure feasibility problems (zero objective) return the feasible point of
 * least infinity norm, found by minimizing beta subject to |x_i| <= beta.
 * The choice among feasible points then does not depend on the path taken.
 */

#include <span>
#include <string>

#include "smcsynth/lmi.hpp"

namespace smcsynth {

struct SolverOptions {
    /// Barrier duality gap m/t at which the solve is declared optimal.
    double gap_tol = 1e-7;
    /// Cap on Newton steps over both phases.
    int max_iter = 200;
    double fraction_to_boundary = 0.98;
    double infeasibility_tol = 1e-6;
    /// Factor applied to the barrier weight t after each centering.
    double barrier_growth = 20.0;
    /// Newton decrement (lambda^2 / 2) below which a point counts as centered.
    double centering_tol = 1e-4;
    /// Phase I searches only |x_i| <= phase1_box.
    double phase1_box = 1e6;
};

enum class SolveStatus { Optimal, Feasible, Infeasible, NumericalFailure };

const char* to_string(SolveStatus s);

struct SdpSolution {
    SolveStatus status = SolveStatus::NumericalFailure;
    Vector x;
    double objective_value = 0.0;
    /// Smallest eigenvalue over all standard-form constraints at x.
    double min_constraint_eig = 0.0;
    int iterations = 0;
    /// Barrier gap m/t at termination (phase II), or of phase I when that decided the outcome.
    double gap = 0.0;
    /// Final phase-I shift when phase I ran; negative means strictly feasible.
    double phase1_shift = 0.0;
    bool phase1_ran = false;
    std::string message;

    bool ok() const noexcept {
        return status == SolveStatus::Optimal || status == SolveStatus::Feasible;
    }
};

SdpSolution solve(const SdpProblem& p, const SolverOptions& opts = {});

/// min_j lambda_min of the standard-form constraints at x. Uses only the matrix kernel.
double certify(const SdpProblem& p, std::span<const double> x);

}  // namespace smcsynth
