#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "distortion_lab/distortion_lab.hpp"

namespace dl = distortion_lab;
namespace fs = std::filesystem;
using dl::json;

namespace {

enum Exit { kOk = 0, kInput = 2, kBreach = 3, kIo = 4 };

struct Config {
  std::string command;
  fs::path config;
  fs::path out = ".";
  std::optional<int> jmax;
  std::optional<int> res;
  bool plot = false;
};

struct InvariantBreach : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json load_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw dl::Error(dl::ErrorCode::Io, "cannot open " + path.string());
  std::stringstream buf;
  buf << is.rdbuf();
  const std::string text = buf.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = text.substr(0, std::min(e.byte, text.size()));
    const auto line = 1 + std::count(upto.begin(), upto.end(), '\n');
    throw dl::Error(dl::ErrorCode::InvalidInput,
                    path.string() + ":" + std::to_string(line) + ": malformed JSON (" + e.what() + ")");
  }
}

// Relative paths inside a config resolve against the config's directory.
fs::path resolve(const Config& cfg, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : cfg.config.parent_path() / path;
}

dl::GrowthFunction growth_from(const Config& cfg, const json& j, const char* key) {
  const std::string path_key = std::string(key) + "_path";
  if (j.contains(path_key)) {
    const json& pj = j.at(path_key);
    if (!pj.is_string()) throw dl::Error(dl::ErrorCode::InvalidInput, path_key + ": expected a string");
    return dl::parse_growth(load_json(resolve(cfg, pj.get<std::string>())), key);
  }
  return dl::parse_growth(dl::require(j, key, "config"), key);
}

void write_text(const Config& cfg, const std::string& name, const std::string& text) {
  const fs::path p = cfg.out / name;
  std::ofstream os(p, std::ios::binary);
  if (!os) throw dl::Error(dl::ErrorCode::Io, "cannot write " + p.string());
  os << text;
  if (!os) throw dl::Error(dl::ErrorCode::Io, "write failed: " + p.string());
}

void write_json(const Config& cfg, const std::string& name, const json& j) { write_text(cfg, name, j.dump(2) + "\n"); }

bool is_constant(const dl::GrowthFunction& g) {
  if (g.domain_end() < dl::kInf || g(dl::kInf) != g(0.0)) return false;
  for (int i = 0; i <= 400; ++i) {
    if (g(std::pow(10.0, -8.0 + i * 0.04)) != g(0.0)) return false;
  }
  return true;
}

json stats(const std::vector<double>& v) {
  double lo = dl::kInf, hi = -dl::kInf;
  dl::CompensatedSum s;
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    s += x;
  }
  return {{"min", dl::json_number(lo)}, {"max", dl::json_number(hi)},
          {"mean", dl::json_number(v.empty() ? 0.0 : s.value() / static_cast<double>(v.size()))}};
}

int run_growth(const Config& cfg) {
  const json c = load_json(cfg.config);
  const dl::GrowthFunction phi = growth_from(cfg, c, "phi");
  if (is_constant(phi)) throw dl::Error(dl::ErrorCode::InvalidInput, "phi: nonconstant required (phi is constant on [0, inf])");
  json rep;
  rep["phi"] = dl::growth_to_json(phi);
  const auto sc = dl::is_strictly_convex(phi);
  rep["convex"] = sc.convex;
  rep["strict_convex"] = sc.strictly_convex;
  rep["convexity_inconclusive"] = sc.inconclusive;
  rep["worst_midpoint_gap"] = dl::json_number(sc.worst_gap);
  if (!sc.note.empty()) rep["convexity_note"] = sc.note;

  json cal = json::array();
  if (c.contains("calderon")) {
    const json& list = c.at("calderon");
    if (!list.is_array()) throw dl::Error(dl::ErrorCode::InvalidInput, "calderon: expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string where = "calderon[" + std::to_string(i) + "]";
      const double alpha = dl::read_field(list[i], "alpha", where);
      const double t_star = dl::read_field_or(list[i], "t_star", where, 1.0);
      json e{{"alpha", alpha}, {"t_star", t_star}};
      try {
        e["value"] = dl::json_number(dl::calderon_integral(phi, alpha, t_star));
      } catch (const dl::Error& err) {
        if (err.code() != dl::ErrorCode::Inconclusive) throw;
        e["value"] = "inconclusive";
        e["note"] = err.what();
      }
      cal.push_back(e);
    }
  }
  rep["calderon"] = cal;

  if (c.contains("decompose")) {
    const json& d = c.at("decompose");
    const double alpha = dl::read_field(d, "alpha", "decompose");
    const double alpha_tilde = dl::read_field(d, "alpha_tilde", "decompose");
    const double t_star = dl::read_field_or(d, "t_star", "decompose", 0.0);
    const double t_max = dl::read_field_or(d, "t_max", "decompose", 100.0);
    const int points = d.contains("points") ? dl::read_int(d.at("points"), "decompose.points", 2, 10000000) : 10000;
    const auto r = dl::decompose(phi, alpha, alpha_tilde, t_star);
    double worst = 0.0, worst_t = 0.0;
    dl::CompensatedSum mean;
    bool below = true;
    for (int i = 0; i < points; ++i) {
      const double t = t_max * i / (points - 1);
      if (t >= phi.domain_end()) break;
      const double p = phi(t);
      const double pt = r.phi_tilde(t);
      if (pt > p * (1.0 + 1e-12) + 1e-300) below = false;
      const double res = std::abs(r.psi(pt) - p) / std::max(1.0, p);
      mean += res;
      if (res > worst) worst = res, worst_t = t;
    }
    json dj;
    dj["alpha"] = alpha;
    dj["alpha_tilde"] = alpha_tilde;
    dj["lambda"] = dl::json_number(r.lambda);
    dj["T_star"] = dl::json_number(r.T_star);
    dj["S_star"] = dl::json_number(r.S_star);
    dj["t_star"] = dl::json_number(r.t_star);
    dj["I"] = dl::json_number(r.I);
    dj["I_tilde"] = dl::json_number(dl::calderon_derivative_integral(r.phi_tilde, alpha_tilde, r.t_star));
    dj["phi_tilde_le_phi"] = below;
    dj["identity_residual"] = {{"grid_points", points}, {"t_max", t_max}, {"max", dl::json_number(worst)},
                               {"argmax", dl::json_number(worst_t)}, {"mean", dl::json_number(mean.value() / points)}};
    rep["decomposition"] = dj;
  }
  write_json(cfg, "growth_report.json", rep);
  return kOk;
}

std::vector<int> read_res(const json& j, int n, const std::string& path) {
  if (j.is_number_integer()) return std::vector<int>(static_cast<std::size_t>(n), dl::read_int(j, path, 8, 1024));
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    throw dl::Error(dl::ErrorCode::InvalidInput, path + ": expected an integer or n integers");
  }
  std::vector<int> r;
  for (std::size_t i = 0; i < j.size(); ++i) r.push_back(dl::read_int(j[i], path + "[" + std::to_string(i) + "]", 8, 1024));
  return r;
}

dl::GridMapping mapping_from(const Config& cfg, const json& m) {
  const json& kj = dl::require(m, "kind", "mapping");
  if (!kj.is_string()) throw dl::Error(dl::ErrorCode::InvalidInput, "mapping.kind: expected a string");
  const std::string kind = kj.get<std::string>();
  const int n = m.contains("n") ? dl::read_int(m.at("n"), "mapping.n", 2, 6) : 3;
  std::vector<int> res(static_cast<std::size_t>(n), 16);
  if (m.contains("res")) res = read_res(m.at("res"), n, "mapping.res");
  if (kind == "stretch") {
    const double c = dl::read_field(m, "c", "mapping");
    if (!(c > 0.0) || !std::isfinite(c)) throw dl::Error(dl::ErrorCode::InvalidInput, "mapping.c: must be positive");
    return dl::affine_stretch(c, n, res);
  }
  if (kind == "affine") {
    const json& A = dl::require(m, "A", "mapping");
    if (!A.is_array() || static_cast<int>(A.size()) != n) throw dl::Error(dl::ErrorCode::InvalidInput, "mapping.A: expected n rows");
    dl::AffineMap map = dl::AffineMap::identity(n);
    for (int r = 0; r < n; ++r) {
      const json& row = A[static_cast<std::size_t>(r)];
      if (!row.is_array() || static_cast<int>(row.size()) != n) {
        throw dl::Error(dl::ErrorCode::InvalidInput, "mapping.A[" + std::to_string(r) + "]: expected n entries");
      }
      for (int k = 0; k < n; ++k) map.A(r, k) = dl::read_number(row[static_cast<std::size_t>(k)], "mapping.A");
    }
    return dl::GridMapping::affine(dl::Box::unit(n), res, map);
  }
  if (kind == "qcgrid") {
    const json& p = dl::require(m, "path", "mapping");
    if (!p.is_string()) throw dl::Error(dl::ErrorCode::InvalidInput, "mapping.path: expected a string");
    const fs::path path = resolve(cfg, p.get<std::string>());
    std::ifstream is(path, std::ios::binary);
    if (!is) throw dl::Error(dl::ErrorCode::Io, "cannot open " + path.string());
    return dl::read_qcgrid(is);
  }
  if (kind == "member") {
    const auto spec = dl::parse_sequence_spec(dl::require(m, "sequence", "mapping"), "mapping.sequence");
    const int j = dl::read_int(dl::require(m, "j", "mapping"), "mapping.j", 1, 30);
    return spec.sequence.member(j);
  }
  throw dl::Error(dl::ErrorCode::InvalidInput, "mapping.kind: unknown kind \"" + kind + "\"");
}

int run_map(const Config& cfg) {
  const json c = load_json(cfg.config);
  dl::GridMapping m = mapping_from(cfg, dl::require(c, "mapping", "config"));
  if (cfg.res) {
    m = m.analytic() ? m.with_resolution(std::vector<int>(static_cast<std::size_t>(m.dim()), *cfg.res))
                     : throw dl::Error(dl::ErrorCode::InvalidInput, "--res cannot resample a QCGRID mapping");
  }
  const bool sampled = c.value("sampled", false);
  if (sampled && m.analytic()) m = m.sample();
  const auto field = dl::dilatation_field(m);
  json rep;
  rep["n"] = m.dim();
  rep["res"] = m.resolution();
  rep["box"] = dl::box_to_json(m.box());
  rep["source"] = m.analytic() ? "analytic" : "sampled";
  rep["cells"] = field.size();
  rep["boundary_cells"] = field.boundary_cells;
  rep["J"] = stats(field.J);
  rep["op_norm"] = stats(field.op_norm);
  rep["K"] = stats(field.K);
  rep["P"] = stats(field.P);
  if (c.contains("phi") || c.contains("phi_path")) {
    dl::FunctionalSpec spec;
    spec.phi = growth_from(cfg, c, "phi");
    if (c.contains("weight")) spec.weight = dl::parse_weight(c.at("weight"), "weight");
    if (c.contains("omega")) spec.omega = dl::parse_box(c.at("omega"), "omega");
    rep["phi_label"] = spec.phi.label();
    rep["functional_value"] = dl::json_number(dl::functional_value(field, spec));
  }
  write_json(cfg, "map_report.json", rep);
  std::ostringstream csv;
  dl::write_dilatation_csv(csv, field);
  write_text(cfg, "dilatation.csv", csv.str());
  if (c.value("export_qcgrid", false)) {
    std::ostringstream grid(std::ios::binary);
    dl::write_qcgrid(grid, m);
    write_text(cfg, "mapping.qcgrid", grid.str());
  }
  return kOk;
}

dl::FunctionalSpec functional_from(const Config& cfg, const json& c) {
  dl::FunctionalSpec spec;
  spec.phi = growth_from(cfg, c, "phi");
  if (c.contains("weight")) spec.weight = dl::parse_weight(c.at("weight"), "weight");
  if (c.contains("omega")) spec.omega = dl::parse_box(c.at("omega"), "omega");
  return spec;
}

dl::ExperimentOptions options_from(const Config& cfg, const json& c, int j_max) {
  dl::ExperimentOptions opt;
  opt.j_max = cfg.jmax ? *cfg.jmax : j_max;
  if (c.contains("mode")) {
    const std::string mode = c.at("mode").is_string() ? c.at("mode").get<std::string>() : "";
    if (mode == "exact") opt.mode = dl::EvalMode::exact;
    else if (mode == "sampled") opt.mode = dl::EvalMode::sampled;
    else throw dl::Error(dl::ErrorCode::InvalidInput, "mode: expected \"exact\" or \"sampled\"");
  }
  if (cfg.res) opt.cap = *cfg.res;
  return opt;
}

int run_seq(const Config& cfg) {
  const json c = load_json(cfg.config);
  const auto sspec = dl::parse_sequence_spec(dl::require(c, "sequence", "config"));
  const auto spec = functional_from(cfg, c);
  const auto opt = options_from(cfg, c, sspec.j_max);
  const auto r = dl::semicontinuity_experiment(sspec.sequence, spec, opt);
  write_json(cfg, "experiment.json", dl::experiment_to_json(r, sspec.sequence, spec));
  std::vector<std::pair<double, double>> rows;
  for (std::size_t j = 0; j < r.values.size(); ++j) rows.push_back({static_cast<double>(j + 1), r.values[j]});
  std::ostringstream csv;
  dl::write_series_csv(csv, "j", "value", rows);
  write_text(cfg, "sequence.csv", csv.str());
  if (cfg.plot) {
    std::ostringstream svg;
    dl::write_sequence_svg(svg, r.values, r.limit_value,
                           std::string(dl::to_string(sspec.sequence.kind)) + ", phi = " + spec.phi.label());
    write_text(cfg, "sequence.svg", svg.str());
  }
  if (c.contains("export_member")) {
    const int j = dl::read_int(c.at("export_member"), "export_member", 1, 30);
    std::ostringstream grid(std::ios::binary);
    dl::write_qcgrid(grid, sspec.sequence.member(j));
    write_text(cfg, "member.qcgrid", grid.str());
  }
  return kOk;
}

std::vector<double> read_point(const json& c, const char* key, int n) {
  if (!c.contains(key)) return std::vector<double>(static_cast<std::size_t>(n), 0.5);
  const json& p = c.at(key);
  if (!p.is_array() || static_cast<int>(p.size()) != n) {
    throw dl::Error(dl::ErrorCode::InvalidInput, std::string(key) + ": expected " + std::to_string(n) + " numbers");
  }
  std::vector<double> x;
  for (const auto& v : p) x.push_back(dl::read_number(v, key));
  return x;
}

dl::RadialFunction radial_from(const json& j, const std::string& path) {
  if (!j.is_object()) throw dl::Error(dl::ErrorCode::InvalidInput, path + ": expected {c, a, p, k}");
  return dl::RadialFunction::symbolic(dl::read_field_or(j, "c", path, 0.0), dl::read_field_or(j, "a", path, 0.0),
                                      dl::read_field_or(j, "p", path, 0.0), dl::read_field_or(j, "k", path, 0.0));
}

std::vector<double> schedule_from(const json& j, const std::string& path) {
  std::vector<double> eps;
  if (!j.contains("eps")) return eps;
  const json& e = j.at("eps");
  if (!e.is_array()) throw dl::Error(dl::ErrorCode::InvalidInput, path + ".eps: expected an array");
  for (const auto& v : e) eps.push_back(dl::read_number(v, path + ".eps"));
  return eps;
}

int run_criteria(const Config& cfg) {
  const json c = load_json(cfg.config);
  const int n = c.contains("n") ? dl::read_int(c.at("n"), "n", 2, 6) : 3;
  const auto x0 = read_point(c, "x0", n);
  const json& checks = dl::require(c, "checks", "config");
  if (!checks.is_array()) throw dl::Error(dl::ErrorCode::InvalidInput, "checks: expected an array");
  json reports = json::array();
  std::vector<std::pair<std::string, std::pair<double, double>>> rows;
  auto record = [&](const dl::ConditionReport& r, const std::string& name) {
    json e = dl::condition_to_json(r);
    e["name"] = name;
    reports.push_back(e);
    for (const auto& ev : r.evidence) rows.push_back({name, ev});
  };
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const json& k = checks[i];
    const std::string where = "checks[" + std::to_string(i) + "]";
    const json& tj = dl::require(k, "type", where);
    if (!tj.is_string()) throw dl::Error(dl::ErrorCode::InvalidInput, where + ".type: expected a string");
    const std::string type = tj.get<std::string>();
    const std::string name = k.value("name", type + "_" + std::to_string(i));
    const auto eps = schedule_from(k, where);
    const double eps0 = dl::read_field_or(k, "eps0", where, 0.5);
    auto dominant = [&] {
      const json& q = dl::require(k, "Q", where);
      const auto centre = q.contains("center") ? read_point(q, "center", n) : x0;
      return dl::Dominant::radial(n, centre, radial_from(q, where + ".Q"));
    };
    if (type == "divergence_integral") {
      record(dl::divergence_integral(radial_from(dl::require(k, "q", where), where + ".q"), n, eps0, eps), name);
    } else if (type == "ball_average") {
      record(dl::ball_average_limsup(dominant(), x0, eps.empty() ? dl::default_schedule(eps0) : eps), name);
    } else if (type == "log_order") {
      record(dl::log_order_condition(dominant(), x0, eps, eps0), name);
    } else if (type == "ring") {
      record(dl::ring_condition(dominant(), x0, radial_from(dl::require(k, "psi", where), where + ".psi"), eps, eps0),
             name);
    } else if (type == "phi_divergence") {
      const auto phi = growth_from(cfg, k, "phi");
      const double alpha = dl::read_field(k, "alpha", where);
      const double p1 = phi(1.0);
      const double delta = dl::read_field_or(k, "delta", where, std::max(2.0 * p1, p1 + 1.0));
      const auto r = dl::phi_divergence(phi, alpha, delta);
      record(r.direct, name + ".direct");
      record(r.log_form, name + ".log_form");
      reports.back()["forms_agree"] = r.agree;
    } else {
      throw dl::Error(dl::ErrorCode::InvalidInput, where + ".type: unknown check \"" + type + "\"");
    }
  }
  write_json(cfg, "criteria_report.json", {{"n", n}, {"x0", dl::json_numbers(x0)}, {"reports", reports}});
  std::ostringstream csv;
  csv << "check,scale,value\n";
  for (const auto& [name, ev] : rows) csv << name << "," << dl::format_double(ev.first) << "," << dl::format_double(ev.second) << "\n";
  write_text(cfg, "criteria.csv", csv.str());
  return kOk;
}

int run_sharpness(const Config& cfg) {
  const json c = load_json(cfg.config);
  const auto phi = growth_from(cfg, c, "phi");
  const int n = c.contains("n") ? dl::read_int(c.at("n"), "n", 2, 6) : 3;
  if (phi(dl::kInf) != dl::kInf) {
    throw dl::Error(dl::ErrorCode::InvalidInput, "phi: sharpness needs phi(inf) = inf (set points.inf or use an unbounded phi)");
  }
  const int j_max = cfg.jmax ? *cfg.jmax : (c.contains("j_max") ? dl::read_int(c.at("j_max"), "j_max", 3, 30) : 20);
  dl::FunctionalSpec spec;
  spec.phi = phi;
  dl::ExperimentOptions opt;
  opt.j_max = j_max;
  const auto d = dl::counterexample_for(phi, n);
  json rep;
  rep["phi"] = dl::growth_to_json(phi);
  rep["n"] = n;
  rep["dispatch"] = dl::dispatch_to_json(d);
  json runs = json::array();
  bool consistent = true;
  auto run = [&](const dl::MappingSequence& s, dl::Verdict expected) {
    const auto r = dl::semicontinuity_experiment(s, spec, opt);
    json e = dl::experiment_to_json(r, s, spec);
    e["expected"] = dl::to_string(expected);
    runs.push_back(e);
    if (r.verdict != expected) consistent = false;
  };
  if (d.sequence) {
    run(*d.sequence, dl::Verdict::strict_violation);
  } else {
    for (const auto& s : dl::stock_sequences(n)) run(s, dl::Verdict::holds);
  }
  rep["experiments"] = runs;
  rep["consistent"] = consistent;
  write_json(cfg, "sharpness_report.json", rep);
  if (!consistent) throw InvariantBreach("sharpness: experiment verdicts do not match dispatch reason " +
                                         std::string(dl::to_string(d.reason)));
  return kOk;
}

int dispatch(const Config& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec || !fs::is_directory(cfg.out)) {
    throw dl::Error(dl::ErrorCode::Io, "output directory " + cfg.out.string() + " is not writable");
  }
  if (cfg.command == "growth") return run_growth(cfg);
  if (cfg.command == "map") return run_map(cfg);
  if (cfg.command == "seq") return run_seq(cfg);
  if (cfg.command == "criteria") return run_criteria(cfg);
  return run_sharpness(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distortion and growth-function experiments", "distortion-lab"};
  app.require_subcommand(1, 1);
  Config cfg;
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"growth", "convexity, Calderon integrals and decomposition of a growth function"},
      {"map", "dilatation field of a mapping"},
      {"seq", "semicontinuity experiment on a mapping sequence"},
      {"criteria", "integral condition checks"},
      {"sharpness", "counterexample dispatch for a growth function"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", cfg.config, "JSON config")->required();
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--jmax", cfg.jmax, "sequence length")->check(CLI::Range(3, 30));
    sub->add_option("--res", cfg.res, "grid resolution per axis")->check(CLI::Range(8, 1024));
    sub->add_flag("--plot", cfg.plot, "write SVG plots");
    sub->callback([&cfg, sub] { cfg.command = sub->get_name(); });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }
  try {
    return dispatch(cfg);
  } catch (const InvariantBreach& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBreach;
  } catch (const dl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == dl::ErrorCode::Io ? kIo : kInput;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  }
}
