#include "smcsynth/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "smcsynth/errors.hpp"

namespace smcsynth {

namespace {

double number(const Json& j, const std::string& what) {
    if (!j.is_number()) throw InvalidInput("'" + what + "' must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw InvalidInput("'" + what + "' must be finite");
    return v;
}

double required_number(const Json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) throw InvalidInput(where + " is missing '" + key + "'");
    return number(obj.at(key), key);
}

std::optional<double> optional_number(const Json& obj, const std::string& key) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    return number(obj.at(key), key);
}

void require_object(const Json& j, const std::string& what) {
    if (!j.is_object()) throw InvalidInput(what + " must be a JSON object");
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

Json optional_to_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json solver_to_json(const SolverReport& r) {
    return {{"status", to_string(r.status)},
            {"iterations", r.iterations},
            {"objective", r.objective},
            {"min_constraint_eig", r.min_constraint_eig},
            {"gap", r.gap},
            {"message", r.message}};
}

SolverReport solver_from_json(const Json& j) {
    SolverReport r;
    if (!j.is_object()) return r;
    const std::string status = j.value("status", "numerical_failure");
    if (status == "optimal") r.status = SolveStatus::Optimal;
    else if (status == "feasible") r.status = SolveStatus::Feasible;
    else if (status == "infeasible") r.status = SolveStatus::Infeasible;
    r.iterations = j.value("iterations", 0);
    r.objective = j.value("objective", 0.0);
    r.min_constraint_eig = j.value("min_constraint_eig", 0.0);
    r.gap = j.value("gap", 0.0);
    r.message = j.value("message", "");
    return r;
}

}  // namespace

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw InvalidInput("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw InvalidInput("failed writing '" + path.string() + "'");
}

Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const Json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j.front().is_array() || j.front().empty())
        throw InvalidInput("'" + what + "' must be a non-empty array of rows");
    const std::size_t rows = j.size();
    const std::size_t cols = j.front().size();
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        const Json& row = j.at(r);
        if (!row.is_array() || row.size() != cols)
            throw InvalidInput("'" + what + "' has rows of different lengths");
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = number(row.at(c), what);
    }
    return m;
}

Vector vector_from_json(const Json& j, const std::string& what) {
    if (!j.is_array()) throw InvalidInput("'" + what + "' must be an array of numbers");
    Vector v;
    v.reserve(j.size());
    for (const Json& x : j) v.push_back(number(x, what));
    return v;
}

Json system_to_json(const PolytopicSystem& sys) {
    Json verts = Json::array();
    for (const Matrix& B : sys.vertices()) verts.push_back(matrix_to_json(B));
    return {{"n", sys.state_dim()}, {"m", sys.input_dim()}, {"vertices", verts}};
}

PolytopicSystem system_from_json(const Json& j) {
    require_object(j, "system");
    if (!j.contains("vertices") || !j.at("vertices").is_array())
        throw InvalidInput("system is missing 'vertices'");
    std::vector<Matrix> verts;
    for (std::size_t k = 0; k < j.at("vertices").size(); ++k)
        verts.push_back(matrix_from_json(j.at("vertices").at(k), "vertices[" + std::to_string(k) + "]"));
    PolytopicSystem sys(std::move(verts));
    if (j.contains("n") && j.at("n") != sys.state_dim())
        throw InvalidInput("system 'n' does not match the vertex row count");
    if (j.contains("m") && j.at("m") != sys.input_dim())
        throw InvalidInput("system 'm' does not match the vertex column count");
    return sys;
}

PolytopicSystem system_from_spec(const Json& j) {
    require_object(j, "system");
    const bool has_builder = j.contains("builder");
    const bool has_vertices = j.contains("vertices");
    if (has_builder == has_vertices)
        throw InvalidInput("system needs exactly one of 'builder' or 'vertices'");
    if (has_vertices) return system_from_json(j);

    const std::string builder = j.at("builder").is_string() ? j.at("builder").get<std::string>() : "";
    if (builder == "visual_servo")
        return visual_servo_polytope(required_number(j, "phi_bar", "visual_servo system"),
                                     required_number(j, "delta_bar", "visual_servo system"));
    if (builder == "rov") {
        RovParameters p;
        p.m0 = optional_number(j, "m0").value_or(p.m0);
        p.Iz = optional_number(j, "Iz").value_or(p.Iz);
        p.psi1 = optional_number(j, "psi1").value_or(p.psi1);
        p.psi2 = optional_number(j, "psi2").value_or(p.psi2);
        p.g_lo = optional_number(j, "g_lo").value_or(p.g_lo);
        p.g_hi = optional_number(j, "g_hi").value_or(p.g_hi);
        return rov_polytope(p);
    }
    throw InvalidInput("unknown system builder '" + builder + "' (expected visual_servo or rov)");
}

Json design_to_json(const VscDesign& d) {
    return {{"law", "vsc"},
            {"K", matrix_to_json(d.K)},
            {"P", matrix_to_json(d.P)},
            {"Q", matrix_to_json(d.Q)},
            {"lambda_min_Q", d.lambda_min_Q},
            {"rho", optional_to_json(d.rho)},
            {"rho_fixed", d.rho_fixed},
            {"phi", d.phi},
            {"xi", d.xi},
            {"T_bound", optional_to_json(d.T_bound)},
            {"margin", d.margin},
            {"solver", solver_to_json(d.solver)}};
}

Json design_to_json(const UvcDesign& d) {
    return {{"law", "uvc"},
            {"K", matrix_to_json(d.K)},
            {"P", matrix_to_json(d.P)},
            {"Q", matrix_to_json(d.Q)},
            {"lambda_min_Q", d.lambda_min_Q},
            {"rho", optional_to_json(d.rho)},
            {"rho_fixed", d.rho_fixed},
            {"phi", d.phi},
            {"mu", d.mu},
            {"T_bound", optional_to_json(d.T_bound)},
            {"margin", d.margin},
            {"solver", solver_to_json(d.solver)}};
}

LoadedDesign design_from_json(const Json& j) {
    require_object(j, "design");
    if (!j.contains("law") || !j.at("law").is_string()) throw InvalidInput("design is missing 'law'");
    if (!j.contains("K")) throw InvalidInput("design is missing 'K'");
    LoadedDesign out;
    out.law = parse_control_law(j.at("law").get<std::string>());
    out.K = matrix_from_json(j.at("K"), "K");
    out.param = optional_number(j, out.law == ControlLaw::Vsc ? "xi" : "mu");

    const bool has_p = j.contains("P") && !j.at("P").is_null();
    const bool has_q = j.contains("Q") && !j.at("Q").is_null();
    if (has_p != has_q) throw InvalidInput("design must give both 'P' and 'Q' or neither");
    out.gain_only = !has_p;
    if (out.gain_only) return out;

    const Matrix P = matrix_from_json(j.at("P"), "P");
    const Matrix Q = matrix_from_json(j.at("Q"), "Q");
    const std::size_t n = out.K.cols();
    if (P.rows() != n || P.cols() != n || Q.rows() != n || Q.cols() != n)
        throw InvalidInput("P and Q must be " + std::to_string(n) + "x" + std::to_string(n));
    const double lmq = lambda_min(SymMatrix(Q));

    auto fill = [&](auto& d) {
        d.K = out.K;
        d.P = P;
        d.Q = Q;
        d.lambda_min_Q = lmq;
        d.rho = optional_number(j, "rho");
        d.rho_fixed = j.value("rho_fixed", false);
        d.phi = optional_number(j, "phi").value_or(0.0);
        d.T_bound = optional_number(j, "T_bound");
        d.margin = optional_number(j, "margin").value_or(0.0);
        d.solver = solver_from_json(j.value("solver", Json::object()));
    };
    if (out.law == ControlLaw::Vsc) {
        VscDesign d;
        fill(d);
        d.xi = out.param.value_or(0.0);
        out.vsc = std::move(d);
    } else {
        if (!out.param) throw InvalidInput("UVC design with certificates must record 'mu'");
        UvcDesign d;
        fill(d);
        d.mu = *out.param;
        out.uvc = std::move(d);
    }
    return out;
}

Json problem_to_json(const SdpProblem& p) {
    Json layout = Json::array();
    for (const auto& b : p.layout.blocks())
        layout.push_back({{"name", b.name},
                          {"structure", to_string(b.structure)},
                          {"rows", b.rows},
                          {"cols", b.cols},
                          {"offset", b.offset},
                          {"size", b.size}});
    Json constraints = Json::array();
    for (const auto& c : p.constraints) {
        Json coeffs = Json::object();
        for (const auto& [k, a] : c.coeffs) coeffs[std::to_string(k)] = matrix_to_json(a.matrix());
        constraints.push_back({{"label", c.label},
                               {"order", c.order},
                               {"sense", to_string(c.sense)},
                               {"strictness_margin", c.strictness_margin},
                               {"constant", matrix_to_json(c.constant.matrix())},
                               {"coeffs", coeffs}});
    }
    return {{"num_scalars", p.layout.total_scalars()},
            {"layout", layout},
            {"objective", p.objective},
            {"constraints", constraints}};
}

SynthesisOptions ScenarioConfig::synthesis_options(double strict_margin) const {
    SynthesisOptions o;
    o.param = param;
    o.phi = phi;
    o.optimize = optimize;
    o.rho_fixed = rho_fixed;
    o.strict_margin = strict_margin;
    return o;
}

ScenarioConfig scenario_from_json(const Json& j) {
    require_object(j, "config");
    if (!j.contains("system")) throw InvalidInput("config is missing 'system'");
    ScenarioConfig cfg(system_from_spec(j.at("system")));

    if (!j.contains("law") || !j.at("law").is_string()) throw InvalidInput("config is missing 'law'");
    cfg.law = parse_control_law(j.at("law").get<std::string>());
    const std::string key = cfg.law == ControlLaw::Vsc ? "xi" : "mu";
    const std::string other = cfg.law == ControlLaw::Vsc ? "mu" : "xi";
    if (j.contains(other)) throw InvalidInput("'" + other + "' does not apply to the " + to_string(cfg.law) + " law");
    cfg.param = required_number(j, key, "config");
    if (!(cfg.param > 0.0)) throw InvalidParameter(key + " must be positive");

    const auto phi = optional_number(j, "phi");
    cfg.rho_fixed = optional_number(j, "rho_fixed");
    cfg.optimize = j.contains("optimize") ? j.at("optimize").get<bool>() : (phi && !cfg.rho_fixed);
    if ((cfg.optimize || cfg.rho_fixed) && !phi)
        throw InvalidInput("config needs 'phi' to optimize or fix rho");
    if (phi) {
        if (!(*phi > 0.0)) throw InvalidParameter("phi must be positive");
        cfg.phi = *phi;
    }
    if (cfg.rho_fixed && !(*cfg.rho_fixed > 0.0)) throw InvalidParameter("rho_fixed must be positive");

    if (j.contains("sigma0")) {
        cfg.sigma0 = vector_from_json(j.at("sigma0"), "sigma0");
        if (cfg.sigma0->size() != cfg.system.state_dim())
            throw InvalidInput("sigma0 has length " + std::to_string(cfg.sigma0->size()) +
                               ", system has n = " + std::to_string(cfg.system.state_dim()));
    }

    if (j.contains("sim")) {
        const Json& s = j.at("sim");
        require_object(s, "sim");
        cfg.sim.dt = optional_number(s, "dt").value_or(cfg.sim.dt);
        cfg.sim.reg_eps = optional_number(s, "reg_eps").value_or(cfg.sim.reg_eps);
        cfg.sim.reach_tol = optional_number(s, "reach_tol").value_or(cfg.sim.reach_tol);
        if (const auto h = optional_number(s, "horizon")) {
            cfg.sim.horizon = *h;
            cfg.horizon_set = true;
        }
        if (s.contains("seed")) cfg.sim.seed = s.at("seed").get<std::uint64_t>();
    }
    return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    const Json j = read_json_file(path);
    try {
        return scenario_from_json(j);
    } catch (const Json::exception& e) {
        throw InvalidInput("'" + path.string() + "': " + e.what());
    }
}

std::string trace_to_csv(const SimTrace& tr) {
    std::ostringstream os;
    os << "t";
    for (std::size_t i = 1; i <= tr.n; ++i) os << ",sigma_" << i;
    for (std::size_t i = 1; i <= tr.m; ++i) os << ",u_" << i;
    os << ",lyap\n";
    for (std::size_t k = 0; k < tr.steps(); ++k) {
        os << fmt(tr.times[k]);
        for (double v : tr.state(k)) os << ',' << fmt(v);
        for (double v : tr.input(k)) os << ',' << fmt(v);
        os << ',' << fmt(tr.lyapunov[k]) << '\n';
    }
    return os.str();
}

Json reach_to_json(const SimTrace& tr, const SimConfig& cfg, const Json& extra) {
    Json per = Json::array();
    for (const auto& r : tr.reach_time_per_state) per.push_back(optional_to_json(r));
    Json j = {{"reach_time", optional_to_json(tr.reach_time)},
              {"reach_time_per_state", per},
              {"dt", cfg.dt},
              {"horizon", cfg.horizon},
              {"reg_eps", cfg.reg_eps},
              {"reach_tol", cfg.reach_tol},
              {"steps", tr.steps()}};
    for (const auto& [k, v] : extra.items()) j[k] = v;
    return j;
}

std::string sweep_to_csv(const std::vector<SweepPoint>& rows) {
    std::ostringstream os;
    os << "param,T_bound,status\n";
    for (const auto& r : rows)
        os << fmt(r.param) << ',' << (r.T_bound ? fmt(*r.T_bound) : "") << ',' << csv_field(r.status)
           << '\n';
    return os.str();
}

}  // namespace smcsynth
