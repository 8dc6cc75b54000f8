#pragma once

/**
 * Controller synthesis for the relay law u = K sgn(sigma) (VSC) and the
 * unit-vector law u = K sigma / ||sigma|| (UVC) on a polytopic plant
 * sigma' = B u.
 *
 * Each synth_* call assembles the LMI conditions, solves them, recovers the
 * gain and the Lyapunov certificates, and re-checks the result with
 * verify_*, which works from (K, P, Q) alone and never looks at solver
 * state.
 */

#include <optional>
#include <string>
#include <vector>

#include "smcsynth/lmi.hpp"
#include "smcsynth/polytope.hpp"
#include "smcsynth/sdp.hpp"

namespace smcsynth {

enum class ControlLaw { Vsc, Uvc };

const char* to_string(ControlLaw law);
ControlLaw parse_control_law(const std::string& s);

/// What the solver reported for the design's SDP.
struct SolverReport {
    SolveStatus status = SolveStatus::NumericalFailure;
    int iterations = 0;
    double objective = 0.0;
    double min_constraint_eig = 0.0;
    double gap = 0.0;
    std::string message;
};

struct VscDesign {
    Matrix K;  ///< m x n
    Matrix P;  ///< diagonal, weights of V(sigma) = sum p_i |sigma_i|
    Matrix Q;  ///< decay matrix
    double lambda_min_Q = 0.0;
    std::optional<double> rho;
    bool rho_fixed = false;
    double phi = 0.0;
    double xi = 0.0;
    /// 2 rho: guaranteed reaching time for sigma(0) in the set V <= 1.
    std::optional<double> T_bound;
    /// verify_vsc() at construction time.
    double margin = 0.0;
    SolverReport solver;
};

struct UvcDesign {
    Matrix K;
    Matrix P;  ///< weight of U(sigma) = sigma^T P sigma / ||sigma||
    Matrix Q;
    double lambda_min_Q = 0.0;
    std::optional<double> rho;
    bool rho_fixed = false;
    double phi = 0.0;
    double mu = 0.0;
    /// rho: guaranteed reaching time for sigma(0) in the set U <= 1.
    std::optional<double> T_bound;
    double margin = 0.0;
    SolverReport solver;
};

struct SynthesisOptions {
    /// xi for VSC, mu for UVC.
    double param = 0.0;
    /// Initial-condition set size; required when optimizing or fixing rho.
    double phi = 0.0;
    /// Minimize rho (and with it the reaching-time bound).
    bool optimize = false;
    /// Fix rho to this value instead of minimizing it.
    std::optional<double> rho_fixed;
    double strict_margin = tolerance::strict_margin;
};

VscDesign synth_vsc(const PolytopicSystem& sys, const SynthesisOptions& opts,
                    const SolverOptions& solver = {});
UvcDesign synth_uvc(const PolytopicSystem& sys, const SynthesisOptions& opts,
                    const SolverOptions& solver = {});

/// Recovers certificates for a given gain by solving the VSC conditions with Z = K X.
VscDesign certify_gain_vsc(const PolytopicSystem& sys, const Matrix& K, double xi,
                           const SolverOptions& solver = {},
                           double strict_margin = tolerance::strict_margin);
/// Same for UVC with Z = K X.
UvcDesign certify_gain_uvc(const PolytopicSystem& sys, const Matrix& K, double mu,
                           const SolverOptions& solver = {},
                           double strict_margin = tolerance::strict_margin);

/// max_i lambda_max(P B_i K + K^T B_i^T P + Q). Negative certifies the design.
double verify_vsc(const VscDesign& d, const PolytopicSystem& sys);

/// max_i lambda_max((1/mu) K^T B_i^T B_i K + (mu/4) P^2 + P B_i K + K^T B_i^T P + Q).
double verify_uvc(const UvcDesign& d, const PolytopicSystem& sys);
double verify_uvc(const UvcDesign& d, const PolytopicSystem& sys, double mu);

/// Single-vertex versions of the checks, used for arbitrary B in the hull.
double vsc_condition_max_eig(const Matrix& P, const Matrix& B, const Matrix& K, const Matrix& Q);
double uvc_condition_max_eig(const Matrix& P, const Matrix& B, const Matrix& K, const Matrix& Q,
                             double mu);

/// V(sigma) = sum_i p_i |sigma_i|.
double lyapunov_vsc(const Matrix& P, std::span<const double> sigma);
/// U(sigma) = sigma^T P sigma / ||sigma||, with U(0) = 0.
double lyapunov_uvc(const Matrix& P, std::span<const double> sigma);

/// 2 V(sigma0) / lambda_min(Q).
double reaching_bound_vsc(const VscDesign& d, std::span<const double> sigma0);
/// U(sigma0) / lambda_min(Q); sigma0 must be nonzero.
double reaching_bound_uvc(const UvcDesign& d, std::span<const double> sigma0);

bool in_omega_vsc(const VscDesign& d, std::span<const double> sigma);
bool in_omega_uvc(const UvcDesign& d, std::span<const double> sigma);

struct SweepPoint {
    double param = 0.0;
    std::optional<double> T_bound;
    std::string status;  ///< "ok" or the failure reason
};

/// Minimizes rho for each grid value of xi (VSC) or mu (UVC). Failures are kept as rows.
std::vector<SweepPoint> sweep(const PolytopicSystem& sys, ControlLaw law,
                              const std::vector<double>& grid, double phi,
                              const SolverOptions& solver = {}, unsigned jobs = 1,
                              double strict_margin = tolerance::strict_margin);

}  // namespace smcsynth
