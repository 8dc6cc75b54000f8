#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "smcsynth/cli.hpp"
#include "smcsynth/errors.hpp"
#include "smcsynth/io.hpp"

using namespace smcsynth;

namespace {

const std::filesystem::path kConfigs = SMCSYNTH_CONFIG_DIR;

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "smcsynth");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string cfg(const std::string& name) { return (kConfigs / name).string(); }

std::filesystem::path scratch() {
    auto dir = std::filesystem::temp_directory_path() / "smcsynth_cli_test";
    std::filesystem::create_directories(dir);
    return dir;
}

std::string write(const std::string& name, const Json& j) {
    const auto path = scratch() / name;
    std::ofstream(path) << j.dump(2);
    return path.string();
}

}  // namespace

TEST_CASE("grid parsing") {
    CHECK(cli::parse_grid("1:3:3") == std::vector<double>{1, 2, 3});
    const auto g = cli::parse_grid("1:1000:4,log");
    REQUIRE(g.size() == 4);
    CHECK(g[0] == 1.0);
    CHECK(g[1] == doctest::Approx(10.0));
    CHECK(g[3] == 1000.0);
    CHECK(cli::parse_grid("0.5:0.5:1") == std::vector<double>{0.5});
    CHECK_THROWS_AS(cli::parse_grid("1:2:0"), InvalidInput);
    CHECK_THROWS_AS(cli::parse_grid("1:2"), InvalidInput);
    CHECK_THROWS_AS(cli::parse_grid("-1:2:3"), InvalidInput);
    CHECK_THROWS_AS(cli::parse_grid("1:2:3,cubic"), InvalidInput);
}

TEST_CASE("synth then verify") {
    const auto r = run({"synth", "--config", cfg("example1_vsc.json")});
    REQUIRE(r.code == cli::kOk);
    const Json d = Json::parse(r.out);
    CHECK(d.at("T_bound").get<double>() == doctest::Approx(0.5));
    const std::string path = write("e1v.json", d);
    const auto v = run({"verify", "--design", path, "--config", cfg("example1_vsc.json")});
    CHECK(v.code == cli::kOk);
    CHECK(v.out.find("certified: yes") != std::string::npos);
}

TEST_CASE("input errors exit with 1") {
    const auto missing = run({"synth", "--config", "/no/such/config.json"});
    CHECK(missing.code == cli::kInputError);
    CHECK(missing.err.find("/no/such/config.json") != std::string::npos);

    Json bad = read_json_file(cfg("example1_vsc.json"));
    bad["xi"] = 0.0;
    const auto zero = run({"synth", "--config", write("xi0.json", bad)});
    CHECK(zero.code == cli::kInputError);
    CHECK(zero.err.find("xi must be positive") != std::string::npos);

    CHECK(run({}).code == cli::kInputError);
    CHECK(run({"frobnicate"}).code == cli::kInputError);
    CHECK(run({"sweep", "--config", cfg("example2_vsc.json"), "--grid", "1:2:0"}).code == cli::kInputError);
}

TEST_CASE("uncertified gains exit with 2") {
    const std::string zero = write("zero.json", Json{{"law", "vsc"}, {"xi", 0.001}, {"K", {{0.0, 0.0}, {0.0, 0.0}}}});
    const auto r = run({"verify", "--design", zero, "--config", cfg("example1_vsc.json")});
    CHECK(r.code == cli::kUncertified);
    CHECK(r.out.find("certified: no") != std::string::npos);

    Json tight = read_json_file(cfg("example1_vsc.json"));
    tight["rho_fixed"] = 1e-4;
    CHECK(run({"synth", "--config", write("tight.json", tight)}).code == cli::kUncertified);
}

TEST_CASE("reference UVC gain verifies after the fixed-gain solve") {
    const auto r = run({"verify", "--design", cfg("example1_reference_uvc_gain.json"), "--config",
                        cfg("example1_uvc.json")});
    CHECK(r.code == cli::kOk);
    CHECK(r.out.find("recovered") != std::string::npos);
}

TEST_CASE("simulate writes the trace and sidecar") {
    const auto prefix = (scratch() / "ex1").string();
    const auto r = run({"simulate", "--design", cfg("example1_reference_vsc_gain.json"), "--config",
                        cfg("example1_vsc.json"), "--vertex", "3", "--out", prefix});
    REQUIRE(r.code == cli::kOk);
    const Json side = read_json_file(prefix + ".reach.json");
    CHECK(side.at("reach_time").get<double>() < 0.5);
    CHECK(side.at("alpha") == Json{0.0, 0.0, 1.0, 0.0});
    std::ifstream csv(prefix + ".csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "t,sigma_1,sigma_2,u_1,u_2,lyap");

    CHECK(run({"simulate", "--design", cfg("example1_reference_vsc_gain.json"), "--config",
               cfg("example1_vsc.json"), "--vertex", "5"})
              .code == cli::kInputError);
    CHECK(run({"simulate", "--design", cfg("example1_reference_vsc_gain.json"), "--config",
               cfg("example1_vsc.json"), "--alpha", "0.5,0.25,0.25"})
              .code == cli::kInputError);
}

TEST_CASE("simulate from the origin") {
    Json c = read_json_file(cfg("example1_uvc.json"));
    c["sigma0"] = {0.0, 0.0};
    const auto r = run({"simulate", "--design", cfg("example1_reference_uvc_gain.json"), "--config",
                        write("origin.json", c), "--alpha", "0.25,0.25,0.25,0.25", "--horizon", "0.01"});
    REQUIRE(r.code == cli::kOk);
    CHECK(r.out.find("reach_time: 0\n") != std::string::npos);
}

TEST_CASE("single-point sweep matches synth") {
    const auto s = run({"sweep", "--config", cfg("example2_uvc.json"), "--grid", "32.9034:32.9034:1"});
    REQUIRE(s.code == cli::kOk);
    const auto d = run({"synth", "--config", cfg("example2_uvc.json")});
    REQUIRE(d.code == cli::kOk);
    const double T = Json::parse(d.out).at("T_bound").get<double>();
    std::istringstream in(s.out);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    const auto c1 = row.find(',');
    const auto c2 = row.find(',', c1 + 1);
    CHECK(std::stod(row.substr(c1 + 1, c2 - c1 - 1)) == doctest::Approx(T).epsilon(1e-12));
    CHECK(row.substr(c2 + 1) == "ok");
}

TEST_CASE("montecarlo is reproducible for a fixed seed") {
    const auto d = run({"synth", "--config", cfg("example2_vsc.json")});
    REQUIRE(d.code == cli::kOk);
    const std::string design = write("e2v.json", Json::parse(d.out));
    const auto a = run({"montecarlo", "--design", design, "--config", cfg("example2_vsc.json"),
                        "--trials", "3", "--seed", "11", "--jobs", "2"});
    const auto b = run({"montecarlo", "--design", design, "--config", cfg("example2_vsc.json"),
                        "--trials", "3", "--seed", "11"});
    REQUIRE(a.code == cli::kOk);
    CHECK(a.out == b.out);
    CHECK(a.out.find("bound_violations: 0") != std::string::npos);
}
