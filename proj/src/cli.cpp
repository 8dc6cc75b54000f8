#include "smcsynth/cli.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "smcsynth/errors.hpp"
#include "smcsynth/io.hpp"
#include "smcsynth/sim.hpp"
#include "smcsynth/synthesis.hpp"

namespace smcsynth::cli {

namespace {

struct Flags {
    std::string config;
    std::string design;
    std::string out;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    std::optional<std::size_t> vertex;
    std::string alpha;
    std::string grid;
    std::size_t trials = 50;

    std::optional<double> sdp_tol;
    std::optional<int> sdp_max_iter;
    std::optional<double> sdp_margin;
    std::optional<double> dt;
    std::optional<double> reg_eps;
    std::optional<double> reach_tol;
    std::optional<double> horizon;
};

SolverOptions solver_options(const Flags& f) {
    SolverOptions o;
    if (f.sdp_tol) o.gap_tol = *f.sdp_tol;
    if (f.sdp_max_iter) o.max_iter = *f.sdp_max_iter;
    return o;
}

double strict_margin(const Flags& f) { return f.sdp_margin.value_or(tolerance::strict_margin); }

// Config values first, then command-line overrides.
SimConfig sim_config(const Flags& f, const ScenarioConfig& sc, std::optional<double> T_bound) {
    SimConfig c = sc.sim;
    if (!sc.horizon_set && T_bound) c.horizon = default_horizon(*T_bound);
    if (f.dt) c.dt = *f.dt;
    if (f.reg_eps) c.reg_eps = *f.reg_eps;
    if (f.reach_tol) c.reach_tol = *f.reach_tol;
    if (f.horizon) c.horizon = *f.horizon;
    if (f.seed) c.seed = *f.seed;
    c.validate();
    return c;
}

void emit(const Json& j, const std::string& path, std::ostream& out) {
    const std::string text = j.dump(2) + "\n";
    if (path.empty())
        out << text;
    else
        write_text_file(path, text);
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("none"); }

double design_param(const LoadedDesign& d, const ScenarioConfig& sc) {
    if (d.param) return *d.param;
    if (sc.law != d.law)
        throw InvalidInput(std::string("design law '") + to_string(d.law) +
                           "' does not match config law '" + to_string(sc.law) + "'");
    return sc.param;
}

void require_matching(const LoadedDesign& d, const PolytopicSystem& sys) {
    if (d.K.rows() != sys.input_dim() || d.K.cols() != sys.state_dim())
        throw InvalidInput("design gain is " + std::to_string(d.K.rows()) + "x" +
                           std::to_string(d.K.cols()) + ", system needs " +
                           std::to_string(sys.input_dim()) + "x" + std::to_string(sys.state_dim()));
}

// Certificates for a loaded design, recovering them by a fixed-gain solve when absent.
void complete_design(LoadedDesign& d, const ScenarioConfig& sc, const Flags& f) {
    require_matching(d, sc.system);
    if (!d.gain_only) return;
    const double param = design_param(d, sc);
    if (d.law == ControlLaw::Vsc)
        d.vsc = certify_gain_vsc(sc.system, d.K, param, solver_options(f), strict_margin(f));
    else
        d.uvc = certify_gain_uvc(sc.system, d.K, param, solver_options(f), strict_margin(f));
}

// ---------------------------------------------------------------------------

int cmd_synth(const Flags& f, std::ostream& out, std::ostream& err) {
    const ScenarioConfig sc = load_scenario(f.config);
    const SynthesisOptions so = sc.synthesis_options(strict_margin(f));
    Json j;
    if (sc.law == ControlLaw::Vsc) {
        const VscDesign d = synth_vsc(sc.system, so, solver_options(f));
        j = design_to_json(d);
        err << "vsc design: margin " << fmt(d.margin) << ", T_bound " << fmt(d.T_bound) << "\n";
    } else {
        const UvcDesign d = synth_uvc(sc.system, so, solver_options(f));
        j = design_to_json(d);
        err << "uvc design: margin " << fmt(d.margin) << ", T_bound " << fmt(d.T_bound) << "\n";
    }
    emit(j, f.out, out);
    return kOk;
}

int cmd_verify(const Flags& f, std::ostream& out, std::ostream& err) {
    const ScenarioConfig sc = load_scenario(f.config);
    LoadedDesign d = design_from_json(read_json_file(f.design));
    const bool recovered = d.gain_only;
    try {
        complete_design(d, sc, f);
    } catch (const SynthesisInfeasible& e) {
        out << "certified: no\nreason: no certificates exist for this gain (" << e.what() << ")\n";
        return kUncertified;
    }

    double margin = 0.0;
    double lmq = 0.0;
    std::optional<double> rho;
    Json report;
    if (d.law == ControlLaw::Vsc) {
        margin = verify_vsc(*d.vsc, sc.system);
        lmq = d.vsc->lambda_min_Q;
        rho = d.vsc->rho;
        report = design_to_json(*d.vsc);
    } else {
        margin = verify_uvc(*d.uvc, sc.system);
        lmq = d.uvc->lambda_min_Q;
        rho = d.uvc->rho;
        report = design_to_json(*d.uvc);
    }
    report["margin"] = margin;

    out << "law: " << to_string(d.law) << "\n";
    out << "certificates: " << (recovered ? "recovered by fixed-gain solve" : "from design file") << "\n";
    out << "margin: " << fmt(margin) << "\n";
    out << "lambda_min_Q: " << fmt(lmq) << "\n";
    if (rho) {
        const bool consistent = lmq >= 1.0 / *rho - 1e-6;
        out << "rho: " << fmt(*rho) << " (lambda_min_Q >= 1/rho: " << (consistent ? "yes" : "no") << ")\n";
    }
    const bool ok = margin < 0.0;
    out << "certified: " << (ok ? "yes" : "no") << "\n";
    if (!f.out.empty()) emit(report, f.out, out);
    (void)err;
    return ok ? kOk : kUncertified;
}

SimplexPoint pick_alpha(const Flags& f, const PolytopicSystem& sys) {
    if (f.vertex && !f.alpha.empty()) throw InvalidInput("give --vertex or --alpha, not both");
    const std::size_t N = sys.vertex_count();
    if (f.vertex) {
        if (*f.vertex < 1 || *f.vertex > N)
            throw InvalidInput("--vertex " + std::to_string(*f.vertex) + " is out of range 1.." +
                               std::to_string(N));
        return SimplexPoint::vertex(N, *f.vertex - 1);
    }
    if (!f.alpha.empty()) {
        Vector a;
        std::stringstream ss(f.alpha);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                std::size_t used = 0;
                a.push_back(std::stod(tok, &used));
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw InvalidInput("--alpha entry '" + tok + "' is not a number");
            }
        }
        if (a.size() != N)
            throw InvalidInput("--alpha has " + std::to_string(a.size()) + " weights, the system has " +
                               std::to_string(N) + " vertices");
        return SimplexPoint(std::move(a));
    }
    throw InvalidInput("simulate needs --vertex or --alpha");
}

int cmd_simulate(const Flags& f, std::ostream& out, std::ostream& err) {
    const ScenarioConfig sc = load_scenario(f.config);
    LoadedDesign d = design_from_json(read_json_file(f.design));
    if (!sc.sigma0) throw InvalidInput("config has no 'sigma0'");
    try {
        complete_design(d, sc, f);
    } catch (const SynthesisInfeasible& e) {
        err << "warning: no certificates for this gain; Lyapunov channel uses the identity weight\n";
    }
    const Vector& s0 = *sc.sigma0;
    const SimplexPoint alpha = pick_alpha(f, sc.system);
    const Matrix B = combine(sc.system, alpha);

    std::optional<Matrix> P;
    std::optional<double> T_bound;
    std::optional<double> bound;
    const bool zero = std::all_of(s0.begin(), s0.end(), [](double v) { return v == 0.0; });
    if (d.vsc) {
        P = d.vsc->P;
        T_bound = d.vsc->T_bound;
        bound = reaching_bound_vsc(*d.vsc, s0);
    } else if (d.uvc) {
        P = d.uvc->P;
        T_bound = d.uvc->T_bound;
        if (!zero) bound = reaching_bound_uvc(*d.uvc, s0);
    }
    const SimConfig cfg = sim_config(f, sc, T_bound);
    const SimTrace tr = simulate(d.law, B, d.K, s0, cfg, P);

    out << "reach_time: " << fmt(tr.reach_time) << "\n";
    for (std::size_t i = 0; i < tr.reach_time_per_state.size(); ++i)
        out << "reach_time_sigma_" << i + 1 << ": " << fmt(tr.reach_time_per_state[i]) << "\n";
    if (bound) {
        out << "bound: " << fmt(*bound) << "\n";
        out << "within_bound: " << (tr.reach_time && *tr.reach_time <= *bound ? "yes" : "no") << "\n";
    }
    if (T_bound) {
        out << "T_bound: " << fmt(*T_bound) << "\n";
        out << "within_T_bound: " << (tr.reach_time && *tr.reach_time <= *T_bound ? "yes" : "no") << "\n";
    }

    if (!f.out.empty()) {
        write_text_file(f.out + ".csv", trace_to_csv(tr));
        Json extra = {{"law", to_string(d.law)},
                      {"alpha", alpha.weights()},
                      {"sigma0", s0},
                      {"bound", bound ? Json(*bound) : Json(nullptr)},
                      {"T_bound", T_bound ? Json(*T_bound) : Json(nullptr)},
                      {"substeps", integration_substeps(B, d.K, cfg)}};
        write_text_file(f.out + ".reach.json", reach_to_json(tr, cfg, extra).dump(2) + "\n");
        err << "wrote " << f.out << ".csv and " << f.out << ".reach.json\n";
    }
    return kOk;
}

int cmd_sweep(const Flags& f, std::ostream& out, std::ostream& err) {
    const ScenarioConfig sc = load_scenario(f.config);
    if (!(sc.phi > 0.0)) throw InvalidInput("sweep needs 'phi' in the config");
    const std::vector<double> grid = parse_grid(f.grid);
    const auto rows = sweep(sc.system, sc.law, grid, sc.phi, solver_options(f), f.jobs, strict_margin(f));
    const std::string csv = sweep_to_csv(rows);
    if (f.out.empty())
        out << csv;
    else
        write_text_file(f.out, csv);
    std::size_t ok = 0;
    for (const auto& r : rows) ok += r.status == "ok";
    err << ok << " of " << rows.size() << " grid points solved\n";
    return kOk;
}

template <typename Design>
Json report_to_json(const EmpiricalReport& rep, const Design& d, const SimConfig& cfg,
                    std::uint64_t seed) {
    Json results = Json::array();
    for (const auto& r : rep.results)
        results.push_back({{"index", r.index},
                           {"alpha", r.alpha},
                           {"sigma0", r.sigma0},
                           {"reach_time", r.reach_time ? Json(*r.reach_time) : Json(nullptr)},
                           {"bound", r.bound},
                           {"ratio", std::isfinite(r.ratio) ? Json(r.ratio) : Json(nullptr)},
                           {"bound_violated", r.bound_violated},
                           {"t_bound_violated", r.t_bound_violated},
                           {"lyapunov_violations", r.lyapunov.violations},
                           {"lyapunov_max_increase", r.lyapunov.max_increase},
                           {"lyapunov_tolerance", r.lyapunov.tolerance}});
    return {{"trials", rep.trials},
            {"seed", seed},
            {"dt", cfg.dt},
            {"reg_eps", cfg.reg_eps},
            {"reach_tol", cfg.reach_tol},
            {"horizon", cfg.horizon},
            {"T_bound", d.T_bound ? Json(*d.T_bound) : Json(nullptr)},
            {"max_ratio", std::isfinite(rep.max_ratio) ? Json(rep.max_ratio) : Json(nullptr)},
            {"bound_violations", rep.bound_violations},
            {"t_bound_violations", rep.t_bound_violations},
            {"lyapunov_violations", rep.lyapunov_violations},
            {"results", results}};
}

int cmd_montecarlo(const Flags& f, std::ostream& out, std::ostream& err) {
    const ScenarioConfig sc = load_scenario(f.config);
    LoadedDesign d = design_from_json(read_json_file(f.design));
    try {
        complete_design(d, sc, f);
    } catch (const SynthesisInfeasible& e) {
        err << "design is not certified: " << e.what() << "\n";
        return kUncertified;
    }
    const std::uint64_t seed = f.seed.value_or(sc.sim.seed);
    auto run = [&](const auto& design) {
        // Without rho the sampled set is still V <= 1 (or U <= 1), where the bound is at most this.
        std::optional<double> horizon_basis = design.T_bound;
        if (!horizon_basis)
            horizon_basis = (d.law == ControlLaw::Vsc ? 2.0 : 1.0) / design.lambda_min_Q;
        const SimConfig cfg = sim_config(f, sc, horizon_basis);
        const EmpiricalReport rep = empirical_vs_bound(design, sc.system, f.trials, cfg, seed, f.jobs);
        out << "trials: " << rep.trials << "\n";
        out << "max_ratio: " << fmt(rep.max_ratio) << "\n";
        out << "bound_violations: " << rep.bound_violations.size() << "\n";
        out << "t_bound_violations: " << rep.t_bound_violations.size() << "\n";
        out << "lyapunov_violations: " << rep.lyapunov_violations.size() << "\n";
        if (!f.out.empty()) emit(report_to_json(rep, design, cfg, seed), f.out, out);
    };
    if (d.vsc)
        run(*d.vsc);
    else
        run(*d.uvc);
    return kOk;
}

}  // namespace

std::vector<double> parse_grid(const std::string& spec) {
    std::string body = spec;
    bool log = false;
    if (const auto comma = body.find(','); comma != std::string::npos) {
        const std::string mode = body.substr(comma + 1);
        if (mode != "log" && mode != "lin") throw InvalidInput("grid mode must be 'log' or 'lin'");
        log = mode == "log";
        body = body.substr(0, comma);
    }
    std::vector<std::string> parts;
    std::stringstream ss(body);
    std::string tok;
    while (std::getline(ss, tok, ':')) parts.push_back(tok);
    if (parts.size() != 3) throw InvalidInput("grid must look like start:stop:steps[,log]");
    double start = 0.0;
    double stop = 0.0;
    long steps = 0;
    try {
        std::size_t u0 = 0, u1 = 0, u2 = 0;
        start = std::stod(parts[0], &u0);
        stop = std::stod(parts[1], &u1);
        steps = std::stol(parts[2], &u2);
        if (u0 != parts[0].size() || u1 != parts[1].size() || u2 != parts[2].size())
            throw std::invalid_argument(spec);
    } catch (const std::exception&) {
        throw InvalidInput("grid '" + spec + "' is not start:stop:steps");
    }
    if (steps <= 0) throw InvalidInput("grid is empty");
    if (!(start > 0.0) || !(stop > 0.0)) throw InvalidInput("grid values must be positive");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (long k = 0; k < steps; ++k) {
        const double t = steps == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(steps - 1);
        out.push_back(log ? std::exp(std::log(start) + t * (std::log(stop) - std::log(start)))
                          : start + t * (stop - start));
    }
    out.front() = start;
    if (steps > 1) out.back() = stop;
    return out;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Sliding-mode controller synthesis for polytopic systems"};
    app.require_subcommand(1);
    app.fallthrough();
    Flags f;

    app.add_option("--sdp-tol", f.sdp_tol, "SDP barrier gap tolerance");
    app.add_option("--sdp-max-iter", f.sdp_max_iter, "SDP Newton step cap");
    app.add_option("--sdp-margin", f.sdp_margin, "strictness margin for the LMIs");
    app.add_option("--dt", f.dt, "simulation sample step [s]");
    app.add_option("--reg-eps", f.reg_eps, "boundary-layer width");
    app.add_option("--reach-tol", f.reach_tol, "reaching detection threshold");
    app.add_option("--horizon", f.horizon, "simulation horizon [s]");
    app.add_option("--seed", f.seed, "random seed");
    app.add_option("--jobs", f.jobs, "parallel workers")->check(CLI::PositiveNumber);
    app.add_option("--out", f.out, "output path or prefix");

    auto* synth = app.add_subcommand("synth", "solve the LMI conditions and print the design");
    synth->add_option("--config", f.config, "scenario config")->required();

    auto* verify = app.add_subcommand("verify", "certify a design against a system");
    verify->add_option("--design", f.design, "design JSON")->required();
    verify->add_option("--config", f.config, "scenario config")->required();

    auto* simulate_cmd = app.add_subcommand("simulate", "simulate the closed loop at one plant");
    simulate_cmd->add_option("--design", f.design, "design JSON")->required();
    simulate_cmd->add_option("--config", f.config, "scenario config")->required();
    simulate_cmd->add_option("--vertex", f.vertex, "vertex index, 1-based");
    simulate_cmd->add_option("--alpha", f.alpha, "comma-separated simplex weights");

    auto* sweep_cmd = app.add_subcommand("sweep", "minimize the reaching-time bound over a grid");
    sweep_cmd->add_option("--config", f.config, "scenario config")->required();
    sweep_cmd->add_option("--grid", f.grid, "start:stop:steps[,log]")->required();

    auto* mc = app.add_subcommand("montecarlo", "check the reaching bound on random samples");
    mc->add_option("--design", f.design, "design JSON")->required();
    mc->add_option("--config", f.config, "scenario config")->required();
    mc->add_option("--trials", f.trials, "number of trials");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInputError;
    }

    try {
        if (synth->parsed()) return cmd_synth(f, out, err);
        if (verify->parsed()) return cmd_verify(f, out, err);
        if (simulate_cmd->parsed()) return cmd_simulate(f, out, err);
        if (sweep_cmd->parsed()) return cmd_sweep(f, out, err);
        if (mc->parsed()) return cmd_montecarlo(f, out, err);
    } catch (const SynthesisInfeasible& e) {
        err << "infeasible: " << e.what() << " (best phase-I shift " << e.best_margin() << ")\n";
        return kUncertified;
    } catch (const NumericalFailure& e) {
        err << "uncertified: " << e.what() << "\n";
        return kUncertified;
    } catch (const SimulationDiverged& e) {
        err << "error: " << e.what() << "\n";
        return kUncertified;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    } catch (const Json::exception& e) {
        err << "error: malformed input: " << e.what() << "\n";
        return kInputError;
    }
    return kInputError;
}

}  // namespace smcsynth::cli
