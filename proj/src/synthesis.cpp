#include "smcsynth/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <future>

#include "smcsynth/errors.hpp"

namespace smcsynth {

const char* to_string(ControlLaw law) { return law == ControlLaw::Vsc ? "vsc" : "uvc"; }

ControlLaw parse_control_law(const std::string& s) {
    if (s == "vsc" || s == "VSC") return ControlLaw::Vsc;
    if (s == "uvc" || s == "UVC") return ControlLaw::Uvc;
    throw InvalidInput("unknown control law '" + s + "' (expected vsc or uvc)");
}

namespace {

LmiOptions lmi_options(const SynthesisOptions& o) {
    if (o.optimize && o.rho_fixed)
        throw InvalidParameter("rho cannot be both minimized and fixed");
    LmiOptions l;
    l.include_opt = o.optimize || o.rho_fixed.has_value();
    l.phi = o.phi;
    l.rho_fixed = o.rho_fixed;
    l.strict_margin = o.strict_margin;
    return l;
}

SolverReport report(const SdpSolution& s) {
    return {s.status, s.iterations, s.objective_value, s.min_constraint_eig, s.gap, s.message};
}

void require_solved(const SdpSolution& s) {
    if (s.ok()) return;
    if (s.status == SolveStatus::Infeasible)
        throw SynthesisInfeasible("LMI conditions are infeasible (" + s.message + ")",
                                  s.phase1_shift);
    throw NumericalFailure("SDP solve failed: " + s.message);
}

void require_sigma(std::span<const double> sigma, std::size_t n) {
    if (sigma.size() != n)
        throw InvalidInput("sigma has length " + std::to_string(sigma.size()) + ", expected " +
                           std::to_string(n));
    for (double v : sigma)
        if (!std::isfinite(v)) throw InvalidInput("sigma has non-finite entries");
}

void require_design_shapes(const Matrix& K, const Matrix& P, const Matrix& Q,
                           const PolytopicSystem& sys) {
    const std::size_t n = sys.state_dim();
    const std::size_t m = sys.input_dim();
    if (K.rows() != m || K.cols() != n)
        throw InvalidInput("gain is " + std::to_string(K.rows()) + "x" + std::to_string(K.cols()) +
                           ", system needs " + std::to_string(m) + "x" + std::to_string(n));
    if (P.rows() != n || !P.square() || Q.rows() != n || !Q.square())
        throw InvalidInput("certificate matrices must be " + std::to_string(n) + "x" +
                           std::to_string(n));
}

// Diagonal X -> inverse diagonal entries, rejecting a numerically singular X.
Vector inverse_diagonal(const Matrix& X) {
    Vector d = X.diag();
    const double scale = *std::max_element(d.begin(), d.end());
    Vector inv(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (!(d[i] > 1e-12 * scale) || !(d[i] > 0.0))
            throw NumericalFailure("recovered X is numerically singular");
        inv[i] = 1.0 / d[i];
    }
    return inv;
}

struct VscRecovery {
    Matrix K, P, Q;
};

// K = Z X^-1, P = X^-1 W X^-1, Q = X^-1 R X^-1 with X diagonal.
VscRecovery recover_vsc(const Matrix& W, const Matrix& X, const Matrix& R, const Matrix& Z) {
    const Vector xinv = inverse_diagonal(X);
    const Matrix Xinv = Matrix::diagonal(xinv);
    VscRecovery r;
    r.K = Z * Xinv;
    Vector p(xinv.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = xinv[i] * W(i, i) * xinv[i];
    r.P = Matrix::diagonal(p);
    r.Q = congruence(SymMatrix(R), Xinv).matrix();
    return r;
}

struct UvcRecovery {
    Matrix K, P, Q;
};

// P = X^-1, K = Z X^-1, Q = X^-1 R X^-1 with X symmetric positive definite.
UvcRecovery recover_uvc(const Matrix& X, const Matrix& R, const Matrix& Z) {
    const SymMatrix Xs(X);
    if (!is_positive_definite(Xs)) throw NumericalFailure("recovered X is not positive definite");
    UvcRecovery r;
    const SymMatrix P = inverse_spd(Xs);
    r.P = P.matrix();
    r.K = solve_spd(Xs, Z.transpose()).transpose();
    r.Q = congruence(SymMatrix(R), P.matrix()).matrix();
    return r;
}

}  // namespace

VscDesign synth_vsc(const PolytopicSystem& sys, const SynthesisOptions& opts,
                    const SolverOptions& solver) {
    const LmiOptions lopts = lmi_options(opts);
    const SdpProblem problem = assemble_vsc(sys, opts.param, lopts);
    const SdpSolution sol = solve(problem, solver);
    require_solved(sol);

    const auto& L = problem.layout;
    const VscRecovery rec = recover_vsc(L.unpack(sol.x, "W"), L.unpack(sol.x, "X"),
                                        L.unpack(sol.x, "R"), L.unpack(sol.x, "Z"));
    VscDesign d;
    d.K = rec.K;
    d.P = rec.P;
    d.Q = rec.Q;
    d.lambda_min_Q = lambda_min(SymMatrix(d.Q));
    d.phi = opts.phi;
    d.xi = opts.param;
    if (opts.optimize) d.rho = L.unpack_scalar(sol.x, "rho");
    if (opts.rho_fixed) {
        d.rho = *opts.rho_fixed;
        d.rho_fixed = true;
    }
    if (d.rho) d.T_bound = 2.0 * *d.rho;
    d.solver = report(sol);
    d.margin = verify_vsc(d, sys);
    if (!(d.margin < 0.0))
        throw NumericalFailure("recovered VSC design fails verification (margin " +
                               std::to_string(d.margin) + ")");
    return d;
}

UvcDesign synth_uvc(const PolytopicSystem& sys, const SynthesisOptions& opts,
                    const SolverOptions& solver) {
    const LmiOptions lopts = lmi_options(opts);
    const SdpProblem problem = assemble_uvc(sys, opts.param, lopts);
    const SdpSolution sol = solve(problem, solver);
    require_solved(sol);

    const auto& L = problem.layout;
    const UvcRecovery rec =
        recover_uvc(L.unpack(sol.x, "X"), L.unpack(sol.x, "R"), L.unpack(sol.x, "Z"));
    UvcDesign d;
    d.K = rec.K;
    d.P = rec.P;
    d.Q = rec.Q;
    d.lambda_min_Q = lambda_min(SymMatrix(d.Q));
    d.phi = opts.phi;
    d.mu = opts.param;
    if (opts.optimize) d.rho = L.unpack_scalar(sol.x, "rho");
    if (opts.rho_fixed) {
        d.rho = *opts.rho_fixed;
        d.rho_fixed = true;
    }
    if (d.rho) d.T_bound = *d.rho;
    d.solver = report(sol);
    d.margin = verify_uvc(d, sys);
    if (!(d.margin < 0.0))
        throw NumericalFailure("recovered UVC design fails verification (margin " +
                               std::to_string(d.margin) + ")");
    return d;
}

VscDesign certify_gain_vsc(const PolytopicSystem& sys, const Matrix& K, double xi,
                           const SolverOptions& solver, double strict_margin) {
    const SdpProblem problem = assemble_vsc_fixed_gain(sys, K, xi, strict_margin);
    const SdpSolution sol = solve(problem, solver);
    require_solved(sol);
    const auto& L = problem.layout;
    const Matrix X = L.unpack(sol.x, "X");
    const VscRecovery rec =
        recover_vsc(L.unpack(sol.x, "W"), X, L.unpack(sol.x, "R"), K * X);
    VscDesign d;
    d.K = K;
    d.P = rec.P;
    d.Q = rec.Q;
    d.lambda_min_Q = lambda_min(SymMatrix(d.Q));
    d.xi = xi;
    d.solver = report(sol);
    d.margin = verify_vsc(d, sys);
    return d;
}

UvcDesign certify_gain_uvc(const PolytopicSystem& sys, const Matrix& K, double mu,
                           const SolverOptions& solver, double strict_margin) {
    const SdpProblem problem = assemble_uvc_fixed_gain(sys, K, mu, strict_margin);
    const SdpSolution sol = solve(problem, solver);
    require_solved(sol);
    const auto& L = problem.layout;
    const Matrix X = L.unpack(sol.x, "X");
    const UvcRecovery rec = recover_uvc(X, L.unpack(sol.x, "R"), K * X);
    UvcDesign d;
    d.K = K;
    d.P = rec.P;
    d.Q = rec.Q;
    d.lambda_min_Q = lambda_min(SymMatrix(d.Q));
    d.mu = mu;
    d.solver = report(sol);
    d.margin = verify_uvc(d, sys);
    return d;
}

// ---------------------------------------------------------------------------
// Independent certificate checks

double vsc_condition_max_eig(const Matrix& P, const Matrix& B, const Matrix& K, const Matrix& Q) {
    const Matrix PBK = P * B * K;
    return lambda_max(SymMatrix(PBK + PBK.transpose() + Q));
}

double uvc_condition_max_eig(const Matrix& P, const Matrix& B, const Matrix& K, const Matrix& Q,
                             double mu) {
    const Matrix BK = B * K;
    const Matrix PBK = P * BK;
    const Matrix lhs = (1.0 / mu) * (BK.transpose() * BK) + (mu / 4.0) * (P * P) + PBK +
                       PBK.transpose() + Q;
    return lambda_max(SymMatrix(lhs));
}

double verify_vsc(const VscDesign& d, const PolytopicSystem& sys) {
    require_design_shapes(d.K, d.P, d.Q, sys);
    double worst = -std::numeric_limits<double>::infinity();
    for (const Matrix& B : sys.vertices())
        worst = std::max(worst, vsc_condition_max_eig(d.P, B, d.K, d.Q));
    return worst;
}

double verify_uvc(const UvcDesign& d, const PolytopicSystem& sys, double mu) {
    require_design_shapes(d.K, d.P, d.Q, sys);
    if (!(mu > 0.0)) throw InvalidParameter("mu must be positive");
    double worst = -std::numeric_limits<double>::infinity();
    for (const Matrix& B : sys.vertices())
        worst = std::max(worst, uvc_condition_max_eig(d.P, B, d.K, d.Q, mu));
    return worst;
}

double verify_uvc(const UvcDesign& d, const PolytopicSystem& sys) {
    return verify_uvc(d, sys, d.mu);
}

// ---------------------------------------------------------------------------
// Lyapunov functions, reaching-time bounds and guaranteed sets

double lyapunov_vsc(const Matrix& P, std::span<const double> sigma) {
    double v = 0.0;
    for (std::size_t i = 0; i < sigma.size(); ++i) v += P(i, i) * std::abs(sigma[i]);
    return v;
}

double lyapunov_uvc(const Matrix& P, std::span<const double> sigma) {
    double norm2 = 0.0;
    for (double s : sigma) norm2 += s * s;
    if (norm2 == 0.0) return 0.0;
    const Vector Ps = P * sigma;
    double quad = 0.0;
    for (std::size_t i = 0; i < sigma.size(); ++i) quad += sigma[i] * Ps[i];
    return quad / std::sqrt(norm2);
}

double reaching_bound_vsc(const VscDesign& d, std::span<const double> sigma0) {
    require_sigma(sigma0, d.P.rows());
    return 2.0 * lyapunov_vsc(d.P, sigma0) / d.lambda_min_Q;
}

double reaching_bound_uvc(const UvcDesign& d, std::span<const double> sigma0) {
    require_sigma(sigma0, d.P.rows());
    if (std::all_of(sigma0.begin(), sigma0.end(), [](double v) { return v == 0.0; }))
        throw InvalidInput("the UVC reaching bound is undefined at sigma0 = 0");
    return lyapunov_uvc(d.P, sigma0) / d.lambda_min_Q;
}

bool in_omega_vsc(const VscDesign& d, std::span<const double> sigma) {
    require_sigma(sigma, d.P.rows());
    return lyapunov_vsc(d.P, sigma) <= 1.0;
}

bool in_omega_uvc(const UvcDesign& d, std::span<const double> sigma) {
    require_sigma(sigma, d.P.rows());
    return lyapunov_uvc(d.P, sigma) <= 1.0;
}

// ---------------------------------------------------------------------------

std::vector<SweepPoint> sweep(const PolytopicSystem& sys, ControlLaw law,
                              const std::vector<double>& grid, double phi,
                              const SolverOptions& solver, unsigned jobs, double strict_margin) {
    if (grid.empty()) throw InvalidInput("sweep grid is empty");
    for (double g : grid)
        if (!(g > 0.0) || !std::isfinite(g)) throw InvalidParameter("sweep values must be positive");

    auto run_point = [&](double value) {
        SweepPoint pt;
        pt.param = value;
        SynthesisOptions o;
        o.param = value;
        o.phi = phi;
        o.optimize = true;
        o.strict_margin = strict_margin;
        try {
            pt.T_bound = law == ControlLaw::Vsc ? synth_vsc(sys, o, solver).T_bound
                                                : synth_uvc(sys, o, solver).T_bound;
            pt.status = "ok";
        } catch (const SynthesisInfeasible&) {
            pt.status = "infeasible";
        } catch (const Error& e) {
            pt.status = std::string("failed: ") + e.what();
        }
        return pt;
    };

    std::vector<SweepPoint> out(grid.size());
    const std::size_t width = std::max(1u, jobs);
    for (std::size_t start = 0; start < grid.size(); start += width) {
        const std::size_t stop = std::min(grid.size(), start + width);
        std::vector<std::future<SweepPoint>> futures;
        for (std::size_t i = start; i < stop; ++i)
            futures.push_back(std::async(width == 1 ? std::launch::deferred : std::launch::async,
                                         run_point, grid[i]));
        for (std::size_t i = start; i < stop; ++i) out[i] = futures[i - start].get();
    }
    return out;
}

}  // namespace smcsynth
