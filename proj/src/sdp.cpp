#include "smcsynth/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <utility>

#include "smcsynth/errors.hpp"

namespace smcsynth {

const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Feasible: return "feasible";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::NumericalFailure: return "numerical_failure";
    }
    return "?";
}

namespace {

// One constraint block F(x) = C + sum_i x_i A_i, coefficients stored sparsely.
struct Block {
    std::size_t order = 0;
    Matrix constant;
    std::vector<std::pair<std::size_t, Matrix>> terms;
};

struct BarrierProblem {
    std::size_t num_vars = 0;
    Vector c;
    std::vector<Block> blocks;

    std::size_t barrier_degree() const {
        std::size_t m = 0;
        for (const auto& b : blocks) m += b.order;
        return m;
    }
};

BarrierProblem lower(const SdpProblem& standard) {
    BarrierProblem bp;
    bp.num_vars = standard.layout.total_scalars();
    bp.c = standard.objective;
    for (const auto& ami : standard.constraints) {
        Block b;
        b.order = ami.order;
        b.constant = ami.constant.matrix();
        for (const auto& [k, a] : ami.coeffs) b.terms.emplace_back(k, a.matrix());
        bp.blocks.push_back(std::move(b));
    }
    return bp;
}

// Phase I: append a shift variable s with coefficient I in every block; minimize s.
// A box |x_i| <= box keeps the barrier bounded below when the constraint set
// is a cone-like region that extends to infinity.
BarrierProblem phase_one(const BarrierProblem& bp, double box) {
    BarrierProblem p1 = bp;
    const std::size_t s = bp.num_vars;
    p1.num_vars = bp.num_vars + 1;
    p1.c.assign(p1.num_vars, 0.0);
    p1.c[s] = 1.0;
    for (auto& b : p1.blocks) b.terms.emplace_back(s, Matrix::identity(b.order));
    if (bp.num_vars > 0) {
        const std::size_t n = bp.num_vars;
        Block bounds;
        bounds.order = 2 * n;
        bounds.constant = Matrix::identity(2 * n) * box;
        for (std::size_t i = 0; i < n; ++i) {
            Matrix a(2 * n, 2 * n);
            a(i, i) = 1.0;
            a(n + i, n + i) = -1.0;
            bounds.terms.emplace_back(i, std::move(a));
        }
        p1.blocks.push_back(std::move(bounds));
    }
    return p1;
}

// Feasibility problems: minimize beta subject to the constraints and |x_i| <= beta,
// which selects the least infinity-norm feasible point.
BarrierProblem least_norm(const BarrierProblem& bp) {
    BarrierProblem ln = bp;
    const std::size_t n = bp.num_vars;
    ln.num_vars = n + 1;
    ln.c.assign(n + 1, 0.0);
    ln.c[n] = 1.0;
    Block bounds;
    bounds.order = 2 * n;
    bounds.constant = Matrix(2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        Matrix a(2 * n, 2 * n);
        a(i, i) = -1.0;
        a(n + i, n + i) = 1.0;
        bounds.terms.emplace_back(i, std::move(a));
    }
    bounds.terms.emplace_back(n, Matrix::identity(2 * n));
    ln.blocks.push_back(std::move(bounds));
    return ln;
}

Matrix block_value(const Block& b, std::span<const double> x) {
    Matrix F = b.constant;
    for (const auto& [k, a] : b.terms)
        if (x[k] != 0.0) F += x[k] * a;
    return F;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double frob_inner(const Matrix& a, const Matrix& b) { return dot(a.data(), b.data()); }

// Cholesky solve of H d = rhs with a diagonal shift added on breakdown.
std::optional<Vector> solve_newton(const Matrix& H, const Vector& rhs) {
    const std::size_t n = H.rows();
    double diag_scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) diag_scale = std::max(diag_scale, std::abs(H(i, i)));
    if (diag_scale == 0.0) diag_scale = 1.0;
    double shift = 0.0;
    for (int attempt = 0; attempt < 8; ++attempt) {
        Matrix Hs = H;
        for (std::size_t i = 0; i < n; ++i) Hs(i, i) += shift;
        Matrix L;
        if (try_cholesky(SymMatrix(Hs), L)) {
            const Matrix sol = solve_lower_transpose(L, solve_lower(L, Matrix::column(rhs)));
            Vector d(sol.data().begin(), sol.data().end());
            if (std::all_of(d.begin(), d.end(), [](double v) { return std::isfinite(v); }))
                return d;
        }
        shift = shift == 0.0 ? 1e-14 * diag_scale : shift * 100.0;
    }
    return std::nullopt;
}

enum class PathOutcome { Converged, Stopped, IterationCap, Stalled, LostFeasibility, Unbounded };

struct PathResult {
    PathOutcome outcome = PathOutcome::Stalled;
    Vector x;
    double t = 0.0;
    double gap = std::numeric_limits<double>::infinity();
};

// Per-iteration linearization of the barrier at x.
struct Linearization {
    std::vector<Matrix> chol;                                // L_j with F_j = L_j L_j^T
    std::vector<std::vector<std::pair<std::size_t, Matrix>>> scaled;  // L^-1 A_i L^-T
    Vector barrier_grad;                                     // d/dx of -sum log det F_j
    Matrix hessian;
};

std::optional<Linearization> linearize(const BarrierProblem& bp, std::span<const double> x) {
    Linearization lin;
    lin.barrier_grad.assign(bp.num_vars, 0.0);
    lin.hessian = Matrix(bp.num_vars, bp.num_vars);
    for (const auto& b : bp.blocks) {
        Matrix L;
        if (!try_cholesky(SymMatrix(block_value(b, x)), L)) return std::nullopt;
        std::vector<std::pair<std::size_t, Matrix>> g;
        g.reserve(b.terms.size());
        for (const auto& [k, a] : b.terms) {
            Matrix G = solve_lower(L, solve_lower(L, a).transpose());
            g.emplace_back(k, std::move(G));
        }
        for (std::size_t p = 0; p < g.size(); ++p) {
            lin.barrier_grad[g[p].first] -= g[p].second.trace();
            for (std::size_t q = p; q < g.size(); ++q) {
                const double h = frob_inner(g[p].second, g[q].second);
                lin.hessian(g[p].first, g[q].first) += h;
                if (g[p].first != g[q].first)
                    lin.hessian(g[q].first, g[p].first) += h;
                else if (p != q)
                    lin.hessian(g[p].first, g[q].first) += h;
            }
        }
        lin.chol.push_back(std::move(L));
        lin.scaled.push_back(std::move(g));
    }
    return lin;
}

// Eigenvalues of L^-1 (sum_i d_i A_i) L^-T per block: they give the exact
// barrier along the ray x + a d and the distance to the boundary.
std::vector<Vector> step_spectra(const Linearization& lin, const Vector& d) {
    std::vector<Vector> spectra;
    spectra.reserve(lin.scaled.size());
    for (const auto& g : lin.scaled) {
        const std::size_t r = g.empty() ? 0 : g.front().second.rows();
        if (r == 0) {
            spectra.emplace_back();
            continue;
        }
        Matrix D(r, r);
        for (const auto& [k, G] : g)
            if (d[k] != 0.0) D += d[k] * G;
        spectra.push_back(sym_eigenvalues(SymMatrix(D)));
    }
    return spectra;
}

class PathFollower {
public:
    PathFollower(const BarrierProblem& bp, const SolverOptions& opts, int& iterations)
        : bp_(bp), opts_(opts), iterations_(iterations) {}

    /// Follows the central path from strictly feasible x0. `stop` is polled after each step.
    template <typename Stop>
    PathResult run(Vector x0, Stop&& stop) {
        PathResult res;
        res.x = std::move(x0);
        const double m = static_cast<double>(bp_.barrier_degree());
        auto lin = linearize(bp_, res.x);
        if (!lin) {
            res.outcome = PathOutcome::LostFeasibility;
            return res;
        }
        res.t = initial_weight(*lin);

        for (;;) {
            const auto centered = center(res, stop);
            if (centered) {
                res.outcome = *centered;
                res.gap = m / res.t;
                return res;
            }
            res.gap = m / res.t;
            if (res.gap <= opts_.gap_tol) {
                res.outcome = PathOutcome::Converged;
                return res;
            }
            if (stop(res.x, res.t, /*centered=*/true)) {
                res.outcome = PathOutcome::Stopped;
                return res;
            }
            res.t *= opts_.barrier_growth;
        }
    }

private:
    double initial_weight(const Linearization& lin) const {
        const auto hc = solve_newton(lin.hessian, bp_.c);
        const auto hg = solve_newton(lin.hessian, lin.barrier_grad);
        if (!hc || !hg) return 1.0;
        const double denom = dot(bp_.c, *hc);
        if (!(denom > 0.0)) return 1.0;
        const double t = -dot(bp_.c, *hg) / denom;
        if (!std::isfinite(t) || t <= 0.0) return 1.0;
        return std::clamp(t, 1e-6, 1e6);
    }

    // Newton iterations on t c^T x + barrier(x). Returns an outcome only when
    // the path has to be abandoned; nullopt means "centered".
    template <typename Stop>
    std::optional<PathOutcome> center(PathResult& res, Stop& stop) {
        for (;;) {
            auto lin = linearize(bp_, res.x);
            if (!lin) return PathOutcome::LostFeasibility;

            Vector grad = lin->barrier_grad;
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += res.t * bp_.c[i];
            Vector neg(grad.size());
            for (std::size_t i = 0; i < grad.size(); ++i) neg[i] = -grad[i];
            const auto dir = solve_newton(lin->hessian, neg);
            if (!dir) return PathOutcome::Stalled;
            const Vector& d = *dir;
            const double slope = dot(grad, d);
            if (-slope / 2.0 <= opts_.centering_tol) return std::nullopt;

            const auto spectra = step_spectra(*lin, d);
            double alpha_max = std::numeric_limits<double>::infinity();
            for (const auto& ev : spectra)
                if (!ev.empty() && ev.front() < 0.0) alpha_max = std::min(alpha_max, -1.0 / ev.front());
            // A direction that never meets the boundary is taken as a plain Newton
            // step; genuine divergence is caught by the magnitude check below.
            double alpha = std::min(1.0, opts_.fraction_to_boundary * alpha_max);

            const double cd = res.t * dot(bp_.c, d);
            auto merit = [&](double a) {
                double f = a * cd;
                for (const auto& ev : spectra)
                    for (double l : ev) f -= std::log1p(a * l);
                return f;
            };
            bool accepted = false;
            for (int k = 0; k < 60; ++k) {
                if (merit(alpha) <= 0.01 * alpha * slope) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted) return PathOutcome::Stalled;

            for (std::size_t i = 0; i < d.size(); ++i) res.x[i] += alpha * d[i];
            ++iterations_;
            for (double v : res.x)
                if (!std::isfinite(v) || std::abs(v) > 1e14) return PathOutcome::Unbounded;
            if (stop(res.x, res.t, /*centered=*/false)) return PathOutcome::Stopped;
            if (iterations_ >= opts_.max_iter) return PathOutcome::IterationCap;
        }
    }

    const BarrierProblem& bp_;
    const SolverOptions& opts_;
    int& iterations_;
};

void require_finite_problem(const SdpProblem& p) {
    if (p.objective.size() != p.layout.total_scalars())
        throw InvalidInput("objective length does not match the variable layout");
    for (double v : p.objective)
        if (!std::isfinite(v)) throw InvalidInput("objective has non-finite entries");
    for (const auto& c : p.constraints) {
        if (!c.constant.matrix().all_finite())
            throw InvalidInput("constraint '" + c.label + "' has non-finite constant");
        for (const auto& [k, a] : c.coeffs)
            if (!a.matrix().all_finite())
                throw InvalidInput("constraint '" + c.label + "' has non-finite coefficient");
    }
}

double min_block_eig(const BarrierProblem& bp, std::span<const double> x) {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& b : bp.blocks) lo = std::min(lo, lambda_min(SymMatrix(block_value(b, x))));
    return lo;
}

const char* describe(PathOutcome o) {
    switch (o) {
        case PathOutcome::Converged: return "converged";
        case PathOutcome::Stopped: return "stopped";
        case PathOutcome::IterationCap: return "iteration cap reached";
        case PathOutcome::Stalled: return "line search stalled";
        case PathOutcome::LostFeasibility: return "iterate left the feasible region";
        case PathOutcome::Unbounded: return "problem appears unbounded";
    }
    return "?";
}

}  // namespace

double certify(const SdpProblem& p, std::span<const double> x) {
    if (x.size() != p.layout.total_scalars())
        throw InvalidInput("decision vector has length " + std::to_string(x.size()) +
                           ", expected " + std::to_string(p.layout.total_scalars()));
    const SdpProblem standard = to_standard_form(p);
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& c : standard.constraints) lo = std::min(lo, lambda_min(evaluate(c, x)));
    return lo;
}

SdpSolution solve(const SdpProblem& problem, const SolverOptions& opts) {
    require_finite_problem(problem);
    if (opts.max_iter <= 0) throw InvalidParameter("max_iter must be positive");
    if (!(opts.gap_tol > 0.0)) throw InvalidParameter("gap tolerance must be positive");
    if (!(opts.phase1_box > 0.0)) throw InvalidParameter("phase-I box must be positive");

    const SdpProblem standard = to_standard_form(problem);
    const BarrierProblem bp = lower(standard);
    const bool feasibility_only =
        std::all_of(bp.c.begin(), bp.c.end(), [](double v) { return v == 0.0; });

    SdpSolution sol;
    sol.x.assign(bp.num_vars, 0.0);
    int iterations = 0;

    auto finish = [&](SolveStatus status, std::string message) {
        sol.status = status;
        sol.message = std::move(message);
        sol.iterations = iterations;
        sol.objective_value = dot(bp.c, sol.x);
        sol.min_constraint_eig = bp.blocks.empty() ? 0.0 : certify(standard, sol.x);
        if (sol.ok() && sol.min_constraint_eig < tolerance::certificate_floor) {
            sol.status = SolveStatus::NumericalFailure;
            sol.message += "; returned point fails the eigenvalue check";
        }
        return sol;
    };

    if (bp.blocks.empty()) {
        if (!feasibility_only) return finish(SolveStatus::NumericalFailure, "unconstrained objective");
        return finish(SolveStatus::Feasible, "no constraints");
    }

    const double origin_margin = min_block_eig(bp, sol.x);

    if (!(origin_margin > 0.0)) {
        const BarrierProblem p1 = phase_one(bp, opts.phase1_box);
        Vector x1(p1.num_vars, 0.0);
        const std::size_t s = bp.num_vars;
        x1[s] = -origin_margin + 1.0;
        const double m1 = static_cast<double>(p1.barrier_degree());

        // Centered points bound the phase-I optimum from below by s - m/t. Once that
        // bound is positive the problem is infeasible; the path still runs on so
        // that the reported shift is the phase-I optimum.
        bool proven_infeasible = false;
        PathFollower follower(p1, opts, iterations);
        const PathResult r = follower.run(std::move(x1), [&](const Vector& x, double t, bool centered) {
            if (x[s] < 0.0) return true;
            if (centered && x[s] - m1 / t > opts.infeasibility_tol) proven_infeasible = true;
            return false;
        });

        sol.phase1_ran = true;
        sol.phase1_shift = r.x[s];
        sol.gap = r.gap;
        std::copy(r.x.begin(), r.x.begin() + static_cast<std::ptrdiff_t>(bp.num_vars), sol.x.begin());

        if (!(r.x[s] < 0.0)) {
            std::ostringstream msg;
            if (r.outcome == PathOutcome::Converged || proven_infeasible) {
                if (r.x[s] > opts.infeasibility_tol) {
                    msg << "infeasible: phase-I shift " << r.x[s] << " > " << opts.infeasibility_tol;
                    return finish(SolveStatus::Infeasible, msg.str());
                }
                msg << "marginal: phase-I optimum " << r.x[s] << " is within tolerance of zero";
            } else {
                msg << "phase I: " << describe(r.outcome) << " (shift " << r.x[s] << ")";
            }
            return finish(SolveStatus::NumericalFailure, msg.str());
        }
    }

    if (feasibility_only && bp.num_vars == 0) return finish(SolveStatus::Feasible, "no variables");

    const BarrierProblem work = feasibility_only ? least_norm(bp) : bp;
    Vector x0 = sol.x;
    if (feasibility_only) {
        double bound = 0.0;
        for (double v : sol.x) bound = std::max(bound, std::abs(v));
        x0.push_back(2.0 * bound + 1.0);
    }

    PathFollower follower(work, opts, iterations);
    const PathResult r = follower.run(std::move(x0), [](const Vector&, double, bool) { return false; });
    std::copy(r.x.begin(), r.x.begin() + static_cast<std::ptrdiff_t>(bp.num_vars), sol.x.begin());
    sol.gap = r.gap;
    if (r.outcome == PathOutcome::Converged) {
        std::ostringstream msg;
        if (feasibility_only)
            msg << "feasible, least-norm point at gap " << r.gap;
        else
            msg << "optimal, gap " << r.gap;
        return finish(feasibility_only ? SolveStatus::Feasible : SolveStatus::Optimal, msg.str());
    }
    std::ostringstream msg;
    msg << "phase II: " << describe(r.outcome) << " at gap " << r.gap;
    return finish(SolveStatus::NumericalFailure, msg.str());
}

}  // namespace smcsynth
