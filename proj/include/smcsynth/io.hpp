#pragma once

// JSON and CSV interchange: systems, designs, scenario configs, traces, sweeps.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "smcsynth/lmi.hpp"
#include "smcsynth/polytope.hpp"
#include "smcsynth/sim.hpp"
#include "smcsynth/synthesis.hpp"

namespace smcsynth {

using Json = nlohmann::json;

/// Parses a file; errors name the path. Throws InvalidInput.
Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

Json matrix_to_json(const Matrix& m);
/// Nested arrays of numbers, all rows the same length. `what` names the field in errors.
Matrix matrix_from_json(const Json& j, const std::string& what);
Vector vector_from_json(const Json& j, const std::string& what);

/// {"n": n, "m": m, "vertices": [B_1, ...]}
Json system_to_json(const PolytopicSystem& sys);
PolytopicSystem system_from_json(const Json& j);

/**
 * A system spec: explicit vertices, or a builder
 *   {"builder": "visual_servo", "phi_bar": .., "delta_bar": ..}
 *   {"builder": "rov", "m0": .., "Iz": .., "psi1": .., "psi2": .., "g_lo": .., "g_hi": ..}
 * where omitted ROV fields take their defaults.
 */
PolytopicSystem system_from_spec(const Json& j);

Json design_to_json(const VscDesign& d);
Json design_to_json(const UvcDesign& d);

/// A design file. With only "law" and "K" it is gain-only and carries no certificates.
struct LoadedDesign {
    ControlLaw law = ControlLaw::Vsc;
    Matrix K;
    bool gain_only = true;
    std::optional<VscDesign> vsc;
    std::optional<UvcDesign> uvc;
    /// xi or mu when the file records it.
    std::optional<double> param;
};

LoadedDesign design_from_json(const Json& j);

/// Debug dump: layout, objective and dense constraint matrices.
Json problem_to_json(const SdpProblem& p);

struct ScenarioConfig {
    explicit ScenarioConfig(PolytopicSystem sys) : system(std::move(sys)) {}

    PolytopicSystem system;
    ControlLaw law = ControlLaw::Vsc;
    /// xi (VSC) or mu (UVC).
    double param = 0.0;
    double phi = 0.0;
    std::optional<double> rho_fixed;
    bool optimize = false;
    std::optional<Vector> sigma0;
    SimConfig sim;
    /// True when the config set sim.horizon explicitly.
    bool horizon_set = false;

    SynthesisOptions synthesis_options(double strict_margin = tolerance::strict_margin) const;
};

/**
 * Keys: "system" (spec as above), "law" ("vsc" | "uvc"), "xi" or "mu",
 * "phi", "rho_fixed", "optimize" (defaults to true when phi is given and
 * rho_fixed is not), "sigma0", "sim" {"dt", "horizon", "reg_eps",
 * "reach_tol", "seed"}.
 */
ScenarioConfig scenario_from_json(const Json& j);
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Header `t,sigma_1..sigma_n,u_1..u_m,lyap`, one row per sample.
std::string trace_to_csv(const SimTrace& tr);
/// Reach times plus the run settings; `extra` entries are merged in.
Json reach_to_json(const SimTrace& tr, const SimConfig& cfg, const Json& extra = Json::object());

/// Header `param,T_bound,status`; T_bound is empty for failed points.
std::string sweep_to_csv(const std::vector<SweepPoint>& rows);

}  // namespace smcsynth
