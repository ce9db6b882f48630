#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "distortion_lab/growth_json.hpp"

namespace fs = std::filesystem;
using distortion_lab::json;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

const fs::path kSamples = DISTORTION_LAB_SAMPLES;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("distortion_lab_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Run {
  int code = -1;
  std::string err;
};

Run run(const std::string& args, const fs::path& out) {
  const fs::path err = out / "stderr.txt";
  const std::string cmd = std::string(DISTORTION_LAB_CLI) + " " + args + " --out '" + out.string() + "' 2> '" +
                          err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream is(err);
  std::stringstream ss;
  ss << is.rdbuf();
  r.err = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

std::string sample(const char* name) { return "--config '" + (kSamples / name).string() + "'"; }

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("growth command", "[cli]") {
  const auto out = scratch("growth");
  REQUIRE(run("growth " + sample("growth_t4.json"), out).code == 0);
  const json r = load(out / "growth_report.json");
  CHECK_THAT(r["calderon"][0]["value"].get<double>(), WithinAbs(5.0, 1e-6));
  CHECK(r["strict_convex"] == true);
  CHECK(r["decomposition"]["lambda"].get<double>() == 0.5);
  CHECK(r["decomposition"]["identity_residual"]["max"].get<double>() <= 1e-8);
  CHECK(r["decomposition"]["phi_tilde_le_phi"] == true);
  CHECK_THAT(r["decomposition"]["I_tilde"].get<double>(),
             WithinAbs(r["decomposition"]["I"].get<double>(), 1e-6));

  const auto t2 = write_config(out, "t2.json", R"({"phi_path": ")" + (kSamples / "phi_t2.json").string() + R"("})");
  REQUIRE(run("growth --config '" + t2.string() + "'", out).code == 0);
  CHECK(load(out / "growth_report.json")["strict_convex"] == true);

  const Run c = run("growth " + sample("growth_constant.json"), out);
  CHECK(c.code == 2);
  CHECK_THAT(c.err, ContainsSubstring("nonconstant required"));
}

TEST_CASE("seq command", "[cli]") {
  const auto out = scratch("seq");
  REQUIRE(run("seq " + sample("seq_laminate_t2.json") + " --plot", out).code == 0);
  const json r = load(out / "experiment.json");
  CHECK(r["verdict"] == "inequality-holds");
  CHECK(r["limit_value"].get<double>() == 4.0);
  REQUIRE(r["sequence_values"].size() == 20);
  for (const auto& v : r["sequence_values"]) CHECK_THAT(v.get<double>(), WithinAbs(5.0, 1e-12));
  const std::string csv = slurp(out / "sequence.csv");
  CHECK(csv.rfind("j,value\n1,5\n2,5\n", 0) == 0);
  const std::string svg = slurp(out / "sequence.svg");
  CHECK_THAT(svg, ContainsSubstring("<polyline"));
  CHECK_THAT(svg, ContainsSubstring("limit 4"));

  REQUIRE(run("seq " + sample("seq_laminate_sqrt.json") + " --jmax 8", out).code == 0);
  const json s = load(out / "experiment.json");
  CHECK(s["verdict"] == "strict-violation");
  CHECK(s["sequence_values"].size() == 8);
  CHECK(s["margin"].get<double>() >= 0.048);

  REQUIRE(run("seq " + sample("seq_left_jump.json"), out).code == 0);
  CHECK(load(out / "experiment.json")["verdict"] == "strict-violation");
}

TEST_CASE("sharpness command", "[cli]") {
  const auto out = scratch("sharpness");
  REQUIRE(run("sharpness " + sample("sharpness_sqrt.json"), out).code == 0);
  json r = load(out / "sharpness_report.json");
  CHECK(r["dispatch"]["reason"] == "non-convex");
  CHECK(r["experiments"][0]["verdict"] == "strict-violation");

  REQUIRE(run("sharpness " + sample("sharpness_t2.json"), out).code == 0);
  r = load(out / "sharpness_report.json");
  CHECK(r["dispatch"]["reason"] == "certified-good");
  CHECK(r["experiments"].size() == 4);
  for (const auto& e : r["experiments"]) CHECK(e["verdict"] == "inequality-holds");

  REQUIRE(run("sharpness " + sample("sharpness_constant.json"), out).code == 0);
  r = load(out / "sharpness_report.json");
  CHECK(r["dispatch"]["sequence"]["kind"] == "cantor");
  CHECK(r["consistent"] == true);

  const auto bounded = write_config(out, "bounded.json", R"({"phi": {"pieces": [{"from": 0, "to": "inf", "kind": "constant", "coeffs": [1]}]}})");
  const Run b = run("sharpness --config '" + bounded.string() + "'", out);
  CHECK(b.code == 2);
  CHECK_THAT(b.err, ContainsSubstring("phi(inf) = inf"));
}

TEST_CASE("map and criteria commands", "[cli]") {
  const auto out = scratch("map");
  const auto cfg = write_config(out, "map.json",
                                R"({"mapping": {"kind": "stretch", "c": 2, "n": 3, "res": 8}, "export_qcgrid": true})");
  REQUIRE(run("map --config '" + cfg.string() + "'", out).code == 0);
  json r = load(out / "map_report.json");
  CHECK(r["K"]["min"].get<double>() == 4.0);
  CHECK(r["P"]["max"].get<double>() == 2.0);
  const std::string csv = slurp(out / "dilatation.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 513);

  const auto back = write_config(out, "back.json", R"({"mapping": {"kind": "qcgrid", "path": "mapping.qcgrid"}})");
  REQUIRE(run("map --config '" + back.string() + "'", out).code == 0);
  r = load(out / "map_report.json");
  CHECK(r["source"] == "sampled");
  CHECK_THAT(r["K"]["min"].get<double>(), WithinAbs(4.0, 1e-12));
  CHECK_THAT(r["K"]["max"].get<double>(), WithinAbs(4.0, 1e-12));

  REQUIRE(run("map " + sample("map_stretch.json") + " --res 32", out).code == 0);
  r = load(out / "map_report.json");
  CHECK(r["res"][0] == 32);
  CHECK_THAT(r["functional_value"].get<double>(), WithinAbs(4.0, 1e-9));

  REQUIRE(run("criteria " + sample("criteria_closed_forms.json"), out).code == 0);
  r = load(out / "criteria_report.json");
  const auto& reps = r["reports"];
  CHECK(reps[0]["verdict"] == "holds");
  CHECK(reps[1]["verdict"] == "holds");
  CHECK(reps[2]["verdict"] == "fails");
  CHECK(reps[5]["forms_agree"] == true);
  CHECK(slurp(out / "criteria.csv").rfind("check,scale,value\n", 0) == 0);
}

TEST_CASE("outputs are byte-identical across runs", "[cli]") {
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  for (const auto& dir : {a, b}) {
    REQUIRE(run("seq " + sample("seq_laminate_sqrt.json") + " --plot", dir).code == 0);
    REQUIRE(run("sharpness " + sample("sharpness_sqrt.json"), dir).code == 0);
    REQUIRE(run("map " + sample("map_stretch.json"), dir).code == 0);
  }
  for (const char* f : {"experiment.json", "sequence.csv", "sequence.svg", "sharpness_report.json", "map_report.json",
                        "dilatation.csv"}) {
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const auto c = scratch("det_threads");
  REQUIRE(run("map " + sample("map_stretch.json"), c).code == 0);
  CHECK(slurp(c / "dilatation.csv") == slurp(a / "dilatation.csv"));
  REQUIRE(std::system(("DISTORTION_LAB_THREADS=1 " + std::string(DISTORTION_LAB_CLI) + " map " +
                       sample("map_stretch.json") + " --out '" + c.string() + "'")
                          .c_str()) == 0);
  CHECK(slurp(c / "dilatation.csv") == slurp(a / "dilatation.csv"));
}

TEST_CASE("exit codes", "[cli]") {
  const auto out = scratch("exit");
  const auto bad = write_config(out, "bad.json", "{\n  \"phi\": {\n    \"pieces\": [,]\n  }\n}\n");
  Run r = run("growth --config '" + bad.string() + "'", out);
  CHECK(r.code == 2);
  CHECK_THAT(r.err, ContainsSubstring("bad.json:3"));

  const auto missing = write_config(out, "missing.json", R"({"calderon": []})");
  r = run("growth --config '" + missing.string() + "'", out);
  CHECK(r.code == 2);
  CHECK_THAT(r.err, ContainsSubstring("phi: missing field"));

  const auto params = write_config(out, "params.json",
                                   R"({"sequence": {"kind": "laminate", "params": {"t1": 1, "t2": 3, "lambda": 2}}, "phi": {"pieces": [{"from": 0, "to": "inf", "kind": "power", "coeffs": [1, 2]}]}})");
  r = run("seq --config '" + params.string() + "'", out);
  CHECK(r.code == 2);
  CHECK_THAT(r.err, ContainsSubstring("sequence.params"));

  CHECK(run("seq " + sample("seq_laminate_t2.json") + " --jmax 2", out).code == 2);
  CHECK(run("seq " + sample("seq_laminate_t2.json") + " --jmax 31", out).code == 2);
  CHECK(run("map " + sample("map_stretch.json") + " --res 4", out).code == 2);
  CHECK(run("map " + sample("map_stretch.json") + " --res 2048", out).code == 2);
  CHECK(run("bogus " + sample("map_stretch.json"), out).code == 2);
  CHECK(run("growth", out).code == 2);

  CHECK(run("growth --config '" + (out / "nope.json").string() + "'", out).code == 4);
  const auto blocker = write_config(out, "file", "x");
  const std::string cmd = std::string(DISTORTION_LAB_CLI) + " growth " + sample("growth_t4.json") + " --out '" +
                          (blocker / "sub").string() + "' 2>/dev/null";
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 4);
}
