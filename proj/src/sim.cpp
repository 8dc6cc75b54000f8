#include "smcsynth/sim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <random>

namespace smcsynth {

void SimConfig::validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidParameter("dt must be positive");
    if (!(horizon >= dt) || !std::isfinite(horizon))
        throw InvalidParameter("horizon must be at least dt");
    if (!(reg_eps > 0.0)) throw InvalidParameter("reg_eps must be positive");
    if (!(reach_tol > 0.0)) throw InvalidParameter("reach_tol must be positive");
}

double default_horizon(double T_bound) {
    if (!(T_bound > 0.0) || !std::isfinite(T_bound))
        throw InvalidParameter("reaching-time bound must be positive");
    return 4.0 * T_bound;
}

namespace {

constexpr double kFlushToZero = 1e-250;

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double norm_inf(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s = std::max(s, std::abs(x));
    return s;
}

void require_shapes(const Matrix& B, const Matrix& K, std::size_t n) {
    if (B.rows() != n || K.cols() != n || B.cols() != K.rows())
        throw InvalidInput("B is " + std::to_string(B.rows()) + "x" + std::to_string(B.cols()) +
                           ", K is " + std::to_string(K.rows()) + "x" + std::to_string(K.cols()) +
                           ", sigma has length " + std::to_string(n));
}

double channel(ControlLaw law, const Matrix& P, std::span<const double> sigma) {
    return law == ControlLaw::Vsc ? lyapunov_vsc(P, sigma) : lyapunov_uvc(P, sigma);
}

// First time after which `metric` stays at or below tol; nullopt if it never settles.
std::optional<double> settle_time(const std::vector<double>& times,
                                  const std::vector<double>& metric, double tol) {
    std::size_t k = metric.size();
    while (k > 0 && metric[k - 1] <= tol) --k;
    if (k == metric.size()) return std::nullopt;
    return times[k];
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

Vector control_vsc(const Matrix& K, std::span<const double> sigma, double reg_eps) {
    Vector s(sigma.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = sigma[i] / std::max(std::abs(sigma[i]), reg_eps);
    return K * s;
}

Vector control_uvc(const Matrix& K, std::span<const double> sigma, double reg_eps) {
    const double scale = 1.0 / std::max(norm2(sigma), reg_eps);
    Vector s(sigma.begin(), sigma.end());
    for (double& v : s) v *= scale;
    return K * s;
}

Vector rhs_vsc(const Matrix& B, const Matrix& K, std::span<const double> sigma, double reg_eps) {
    require_shapes(B, K, sigma.size());
    return B * control_vsc(K, sigma, reg_eps);
}

Vector rhs_uvc(const Matrix& B, const Matrix& K, std::span<const double> sigma, double reg_eps) {
    require_shapes(B, K, sigma.size());
    return B * control_uvc(K, sigma, reg_eps);
}

std::size_t integration_substeps(const Matrix& B, const Matrix& K, const SimConfig& cfg) {
    cfg.validate();
    if (!cfg.resolve_layer) return 1;
    const double stiffness = (B * K).frobenius_norm() * cfg.dt / cfg.reg_eps;
    if (!std::isfinite(stiffness)) throw InvalidInput("closed-loop gain B K is not finite");
    if (stiffness > static_cast<double>(kMaxSubsteps))
        throw InvalidParameter("the boundary layer needs more than " + std::to_string(kMaxSubsteps) +
                               " RK4 substeps per dt; reduce dt or widen reg_eps");
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(stiffness)));
}

SimTrace simulate(ControlLaw law, const Matrix& B, const Matrix& K, std::span<const double> sigma0,
                  const SimConfig& cfg, const std::optional<Matrix>& P) {
    cfg.validate();
    const std::size_t n = sigma0.size();
    require_shapes(B, K, n);
    for (double v : sigma0)
        if (!std::isfinite(v)) throw InvalidInput("sigma0 has non-finite entries");
    const Matrix weight = P ? *P : Matrix::identity(n);
    if (weight.rows() != n || weight.cols() != n) throw InvalidInput("P does not match sigma0");

    auto u_of = [&](std::span<const double> s) {
        return law == ControlLaw::Vsc ? control_vsc(K, s, cfg.reg_eps) : control_uvc(K, s, cfg.reg_eps);
    };

    // sigma' = BK w(sigma), evaluated without allocating.
    const Matrix BK = B * K;
    Vector w(n);
    auto f = [&](const Vector& s, Vector& out) {
        if (law == ControlLaw::Vsc) {
            for (std::size_t i = 0; i < n; ++i) w[i] = s[i] / std::max(std::abs(s[i]), cfg.reg_eps);
        } else {
            const double scale = 1.0 / std::max(norm2(s), cfg.reg_eps);
            for (std::size_t i = 0; i < n; ++i) w[i] = s[i] * scale;
        }
        for (std::size_t r = 0; r < n; ++r) {
            double acc = 0.0;
            for (std::size_t c = 0; c < n; ++c) acc += BK(r, c) * w[c];
            out[r] = acc;
        }
    };

    const auto steps = static_cast<std::size_t>(std::floor(cfg.horizon / cfg.dt + 1e-9));
    const std::size_t sub = integration_substeps(B, K, cfg);
    SimTrace tr;
    tr.n = n;
    tr.m = K.rows();
    tr.times.reserve(steps + 1);
    tr.states.reserve((steps + 1) * n);
    tr.inputs.reserve((steps + 1) * tr.m);
    tr.lyapunov.reserve(steps + 1);

    auto record = [&](std::size_t k, const Vector& s) {
        tr.times.push_back(static_cast<double>(k) * cfg.dt);
        tr.states.insert(tr.states.end(), s.begin(), s.end());
        const Vector u = u_of(s);
        tr.inputs.insert(tr.inputs.end(), u.begin(), u.end());
        tr.lyapunov.push_back(channel(law, weight, s));
    };

    const double blowup = 1e12 * std::max(1.0, norm_inf(sigma0));
    Vector s(sigma0.begin(), sigma0.end());
    Vector tmp(n), k1(n), k2(n), k3(n), k4(n);
    record(0, s);
    const double h = cfg.dt / static_cast<double>(sub);
    for (std::size_t k = 1; k <= steps; ++k) {
        for (std::size_t j = 0; j < sub; ++j) {
            f(s, k1);
            for (std::size_t i = 0; i < n; ++i) tmp[i] = s[i] + 0.5 * h * k1[i];
            f(tmp, k2);
            for (std::size_t i = 0; i < n; ++i) tmp[i] = s[i] + 0.5 * h * k2[i];
            f(tmp, k3);
            for (std::size_t i = 0; i < n; ++i) tmp[i] = s[i] + h * k3[i];
            f(tmp, k4);
            for (std::size_t i = 0; i < n; ++i) {
                s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                // Inside the layer the state decays exponentially; stop it before subnormals.
                if (std::abs(s[i]) < kFlushToZero) s[i] = 0.0;
            }
        }

        const bool finite = std::all_of(s.begin(), s.end(), [](double v) { return std::isfinite(v); });
        if (!finite || norm_inf(s) > blowup)
            throw SimulationDiverged("simulation diverged at t = " +
                                         std::to_string(static_cast<double>(k) * cfg.dt),
                                     std::move(tr));
        record(k, s);
    }

    std::vector<double> metric(tr.steps());
    for (std::size_t k = 0; k < tr.steps(); ++k)
        metric[k] = law == ControlLaw::Vsc ? norm_inf(tr.state(k)) : norm2(tr.state(k));
    tr.reach_time = settle_time(tr.times, metric, cfg.reach_tol);

    if (law == ControlLaw::Vsc) {
        tr.reach_time_per_state.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < tr.steps(); ++k) metric[k] = std::abs(tr.states[k * n + i]);
            tr.reach_time_per_state[i] = settle_time(tr.times, metric, cfg.reach_tol);
        }
    }
    return tr;
}

LyapunovCheck check_lyapunov_decrease(const SimTrace& trace, ControlLaw law, const Matrix& P,
                                      const Matrix& B, const Matrix& K, const SimConfig& cfg) {
    const std::size_t n = trace.n;
    require_shapes(B, K, n);
    const double bk = (B * K).frobenius_norm();
    double lipschitz = 0.0;
    if (law == ControlLaw::Vsc) {
        // |V(a) - V(b)| <= ||p||_2 ||a - b||_2 and ||sigma'||_2 <= ||BK||_F sqrt(n).
        lipschitz = norm2(P.diag()) * bk * std::sqrt(static_cast<double>(n));
    } else {
        // ||grad U|| <= 3 lambda_max(P) and ||sigma'||_2 <= ||BK||_F.
        lipschitz = 3.0 * lambda_max(SymMatrix(P)) * bk;
    }

    LyapunovCheck out;
    out.tolerance = 10.0 * cfg.dt * lipschitz;
    out.max_increase = -std::numeric_limits<double>::infinity();
    auto outside = [&](std::size_t k) {
        const auto s = trace.state(k);
        return (law == ControlLaw::Vsc ? norm_inf(s) : norm2(s)) > cfg.reg_eps;
    };
    for (std::size_t k = 0; k + 1 < trace.steps(); ++k) {
        if (!outside(k) || !outside(k + 1)) continue;
        const double inc = trace.lyapunov[k + 1] - trace.lyapunov[k];
        out.max_increase = std::max(out.max_increase, inc);
        if (inc > out.tolerance) {
            if (!out.first_violation) out.first_violation = k;
            ++out.violations;
        }
    }
    if (std::isinf(out.max_increase)) out.max_increase = 0.0;
    return out;
}

namespace {

struct DesignView {
    ControlLaw law;
    const Matrix& K;
    const Matrix& P;
    std::optional<double> T_bound;
    std::function<double(std::span<const double>)> bound;
    std::function<bool(std::span<const double>)> in_omega;
};

EmpiricalReport run_trials(const DesignView& d, const PolytopicSystem& sys, std::size_t trials,
                           const SimConfig& cfg, std::uint64_t seed, unsigned jobs) {
    cfg.validate();
    const std::size_t n = sys.state_dim();
    if (d.K.rows() != sys.input_dim() || d.K.cols() != n)
        throw InvalidInput("design gain does not match the system dimensions");

    // Half-widths of a box that contains the guaranteed set.
    Vector half(n);
    if (d.law == ControlLaw::Vsc) {
        for (std::size_t i = 0; i < n; ++i) half[i] = 1.0 / d.P(i, i);
    } else {
        std::fill(half.begin(), half.end(), 1.0 / lambda_min(SymMatrix(d.P)));
    }

    auto trial = [&](std::size_t index) {
        std::mt19937_64 rng(splitmix64(seed ^ splitmix64(index)));
        TrialResult r;
        r.index = index;
        const SimplexPoint alpha = sample_simplex(sys.vertex_count(), rng);
        r.alpha = alpha.weights();
        Vector s(n);
        for (;;) {
            for (std::size_t i = 0; i < n; ++i) s[i] = (2.0 * uniform01(rng) - 1.0) * half[i];
            if (norm2(s) > 0.0 && d.in_omega(s)) break;
        }
        r.sigma0 = s;
        r.bound = d.bound(s);
        const Matrix B = combine(sys, alpha);
        const SimTrace tr = simulate(d.law, B, d.K, s, cfg, d.P);
        r.reach_time = tr.reach_time;
        r.ratio = tr.reach_time ? *tr.reach_time / r.bound : std::numeric_limits<double>::infinity();
        r.bound_violated = !tr.reach_time || *tr.reach_time > r.bound;
        r.t_bound_violated = d.T_bound && (!tr.reach_time || *tr.reach_time > *d.T_bound);
        r.lyapunov = check_lyapunov_decrease(tr, d.law, d.P, B, d.K, cfg);
        return r;
    };

    EmpiricalReport rep;
    rep.trials = trials;
    rep.results.resize(trials);
    const std::size_t width = std::max(1u, jobs);
    for (std::size_t start = 0; start < trials; start += width) {
        const std::size_t stop = std::min(trials, start + width);
        std::vector<std::future<TrialResult>> futures;
        for (std::size_t i = start; i < stop; ++i)
            futures.push_back(
                std::async(width == 1 ? std::launch::deferred : std::launch::async, trial, i));
        for (std::size_t i = start; i < stop; ++i) rep.results[i] = futures[i - start].get();
    }
    for (const TrialResult& r : rep.results) {
        rep.max_ratio = std::max(rep.max_ratio, r.ratio);
        if (r.bound_violated) rep.bound_violations.push_back(r.index);
        if (r.t_bound_violated) rep.t_bound_violations.push_back(r.index);
        if (r.lyapunov.violations > 0) rep.lyapunov_violations.push_back(r.index);
    }
    return rep;
}

}  // namespace

EmpiricalReport empirical_vs_bound(const VscDesign& d, const PolytopicSystem& sys,
                                   std::size_t trials, const SimConfig& cfg, std::uint64_t seed,
                                   unsigned jobs) {
    const DesignView view{ControlLaw::Vsc, d.K, d.P, d.T_bound,
                          [&](std::span<const double> s) { return reaching_bound_vsc(d, s); },
                          [&](std::span<const double> s) { return in_omega_vsc(d, s); }};
    return run_trials(view, sys, trials, cfg, seed, jobs);
}

EmpiricalReport empirical_vs_bound(const UvcDesign& d, const PolytopicSystem& sys,
                                   std::size_t trials, const SimConfig& cfg, std::uint64_t seed,
                                   unsigned jobs) {
    const DesignView view{ControlLaw::Uvc, d.K, d.P, d.T_bound,
                          [&](std::span<const double> s) { return reaching_bound_uvc(d, s); },
                          [&](std::span<const double> s) { return in_omega_uvc(d, s); }};
    return run_trials(view, sys, trials, cfg, seed, jobs);
}

}  // namespace smcsynth
