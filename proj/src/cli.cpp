#include "dplopt/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "dplopt/dpl_model.hpp"
#include "dplopt/error.hpp"
#include "dplopt/fitting.hpp"
#include "dplopt/json_io.hpp"
#include "dplopt/manifest.hpp"
#include "dplopt/presets.hpp"
#include "dplopt/ratio_optimizer.hpp"
#include "dplopt/simulator.hpp"

namespace dplopt {
namespace {

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::optional<std::uint64_t> seed;
  std::string output;
  std::string format;
  RunManifest manifest;
  std::string started;
};

std::string shortest(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path);
  f << text;
  if (!f) throw Error("write failed: " + path);
}

void deliver(Context& ctx, const std::string& text) {
  if (ctx.output.empty()) {
    ctx.out << text;
    return;
  }
  write_file(ctx.output, text);
  std::ostringstream side;
  write_json(side, ctx.manifest.sidecar(ctx.started, utc_timestamp()));
  write_file(ctx.output + ".manifest.json", side.str());
}

Json with_manifest(const Context& ctx, const Json& payload) {
  Json doc;
  doc["manifest"] = ctx.manifest.to_json();
  for (const auto& [key, value] : payload.items()) doc[key] = value;
  return doc;
}

void emit_json(Context& ctx, const Json& payload) {
  std::ostringstream s;
  write_json(s, with_manifest(ctx, payload));
  deliver(ctx, s.str());
}

std::string csv_banner(const Context& ctx) {
  return "# dplopt " + ctx.manifest.version + " command=" + ctx.manifest.command +
         " manifest=" + ctx.manifest.digest() + "\n";
}

void emit_csv(Context& ctx, const std::string& body) { deliver(ctx, csv_banner(ctx) + body); }

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    double v = 0.0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size() || !std::isfinite(v)) {
      throw DomainError(std::string("invalid number '") + item + "' in " + what);
    }
    out.push_back(v);
  }
  if (out.empty()) throw DomainError(std::string(what) + " is empty");
  return out;
}

/// "lo:hi:step" or a comma-separated list.
std::vector<double> parse_grid(const std::string& text) {
  if (text.find(':') != std::string::npos) {
    std::string spec = text;
    std::replace(spec.begin(), spec.end(), ':', ',');
    const auto parts = parse_list(spec, "--grid");
    if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
      throw DomainError("--grid must be lo:hi:step with step > 0 and hi >= lo");
    }
    return ratio_grid(parts[0], parts[1], parts[2]);
  }
  return parse_list(text, "--grid");
}

struct ModelOptions {
  std::string preset;
  std::string params;
  std::string directions;
  std::vector<std::string> direction;
};

void add_model_options(CLI::App* sub, ModelOptions& m) {
  sub->add_option("--preset", m.preset, "Shipped parameter set (default: base)");
  sub->add_option("--params", m.params, "Params JSON: preset document or fit output");
  sub->add_option("--directions", m.directions, "Directions JSON [{name, data_size_millions}]");
  sub->add_option("--direction", m.direction, "Inline direction NAME=MILLIONS (repeatable)");
}

DplParams load_params(Context& ctx, const ModelOptions& m) {
  if (!m.preset.empty() && !m.params.empty()) throw DomainError("give either --preset or --params");
  if (!m.params.empty()) {
    ctx.manifest.add_input(m.params);
    return params_from_json(read_json_file(m.params));
  }
  const auto p = find_preset(m.preset.empty() ? "base" : m.preset);
  ctx.manifest.config["preset"] = preset_to_json(p);
  return p.params;
}

std::vector<DirectionSpec> load_directions(Context& ctx, const ModelOptions& m) {
  std::vector<DirectionSpec> dirs;
  if (!m.directions.empty()) {
    ctx.manifest.add_input(m.directions);
    dirs = directions_from_json(read_json_file(m.directions));
  }
  for (const auto& d : m.direction) {
    const auto eq = d.find('=');
    if (eq == std::string::npos || eq == 0) throw DomainError("--direction must be NAME=MILLIONS");
    DirectionSpec spec{d.substr(0, eq), parse_list(d.substr(eq + 1), "--direction").at(0)};
    spec.validate();
    dirs.push_back(std::move(spec));
  }
  if (dirs.empty()) throw DomainError("no directions given (--directions or --direction)");
  ctx.manifest.config["directions"] = directions_to_json(dirs);
  return dirs;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string input;
  bool no_joint = false;
  int max_iterations = 2000;
};

int cmd_fit(Context& ctx, const FitArgs& a) {
  ctx.manifest.add_input(a.input);
  const auto obs = read_observations_csv(a.input);
  FitConfig cfg;
  cfg.joint_refinement = !a.no_joint;
  cfg.solver.max_iterations = a.max_iterations;
  ctx.manifest.config = {{"joint_refinement", cfg.joint_refinement}, {"max_iterations", a.max_iterations}};
  const FitReport report = fit_full(obs, cfg);
  if (ctx.format == "csv") {
    std::string body = "parameter,value\n";
    const auto pj = params_to_json(report.params);
    for (const char* key : {"k", "alpha", "q", "beta", "gamma", "b"}) {
      body += std::string(key) + "," + format_double(pj.at(key).get<double>()) + "\n";
    }
    for (const auto& [key, value] : report.params.biases) body += "bias:" + key + "," + format_double(value) + "\n";
    emit_csv(ctx, body);
  } else {
    emit_json(ctx, fit_report_to_json(report));
  }
  for (const auto& w : report.warnings) ctx.err << "warning: " << w << '\n';
  return report.flagged ? kExitFlagged : kExitOk;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  ModelOptions model;
  std::string grid = "0.01:1:0.01";
  bool strict_bias = false;
};

int cmd_predict(Context& ctx, const PredictArgs& a) {
  const DplParams params = load_params(ctx, a.model);
  const auto dirs = load_directions(ctx, a.model);
  const auto grid = parse_grid(a.grid);
  ctx.manifest.config["grid"] = grid;
  ctx.manifest.config["strict_bias"] = a.strict_bias;
  EvalOptions eo;
  eo.strict_bias = a.strict_bias;

  std::vector<Curve> curves;
  for (const auto& d : dirs) curves.push_back(predict_curve(params, d, grid, eo));

  auto critical_json = [&](const DirectionSpec& d) {
    Json j;
    j["direction"] = d.name;
    j["data_size_millions"] = d.data_size;
    j["overfit_coefficient"] = overfit_coefficient(params, d);
    const auto cp = critical_point(params, d);
    if (!cp) {
      j["critical_point"] = nullptr;
      j["kind"] = "none";
    } else {
      j["critical_point"] = cp->ratio;
      j["kind"] = cp->interior() ? "interior" : "beyond-range";
    }
    return j;
  };

  if (ctx.format == "json") {
    Json out;
    Json cps = Json::array(), cs = Json::array();
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      cps.push_back(critical_json(dirs[i]));
      Json pts = Json::array();
      for (const auto& p : curves[i].points) {
        pts.push_back({{"sampling_ratio", p.ratio}, {"predicted_loss", p.loss}, {"extrapolated", p.extrapolated}});
      }
      cs.push_back({{"direction", dirs[i].name}, {"bias_defaulted", curves[i].bias_defaulted}, {"points", pts}});
    }
    out["critical_points"] = std::move(cps);
    out["curves"] = std::move(cs);
    emit_json(ctx, out);
  } else {
    std::string body;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      const auto j = critical_json(dirs[i]);
      body += "# critical_point direction=" + dirs[i].name +
              " data_size_millions=" + format_double(dirs[i].data_size) + " ratio=" +
              (j["critical_point"].is_null() ? "none" : format_double(j["critical_point"].get<double>())) +
              " kind=" + j["kind"].get<std::string>() + "\n";
      if (curves[i].bias_defaulted) body += "# bias_defaulted direction=" + dirs[i].name + "\n";
    }
    body += "direction,sampling_ratio,predicted_loss\n";
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      for (const auto& p : curves[i].points) {
        body += dirs[i].name + "," + format_double(p.ratio) + "," + format_double(p.loss) + "\n";
      }
    }
    emit_csv(ctx, body);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- optimize

struct OptimizeArgs {
  ModelOptions model;
  std::string weights;
  double floor = 0.01;
  std::string method = "auto";
  std::string spread = "equal";
  std::string temperatures = "1,2,5,10,100";
  double resolution = 1e-3;
  int starts = 16;
};

int cmd_optimize(Context& ctx, const OptimizeArgs& a) {
  const DplParams params = load_params(ctx, a.model);
  const auto dirs = load_directions(ctx, a.model);
  MetricWeights w = a.weights.empty() ? MetricWeights::uniform(dirs.size())
                                      : MetricWeights{parse_list(a.weights, "--weights")};
  w.validate(dirs.size());
  const auto temps = parse_list(a.temperatures, "--temperatures");
  const std::uint64_t seed = ctx.seed.value_or(0);
  ctx.manifest.config["weights"] = w.r;
  ctx.manifest.config["floor"] = a.floor;
  ctx.manifest.config["method"] = a.method;
  ctx.manifest.config["spread"] = a.spread;
  ctx.manifest.config["temperatures"] = temps;

  RatioSolution sol;
  if (a.method == "grid") {
    GridOptions go;
    go.floor = a.floor;
    go.resolution = a.resolution;
    ctx.manifest.config["resolution"] = a.resolution;
    sol = grid_oracle(params, dirs, w, go);
  } else {
    OptimizerOptions opts;
    opts.floor = a.floor;
    opts.seed = seed;
    opts.starts = a.starts;
    if (a.method == "auto") opts.method = SolverMethod::kAuto;
    else if (a.method == "kkt") opts.method = SolverMethod::kKktBisection;
    else if (a.method == "pgd") opts.method = SolverMethod::kProjectedGradient;
    else throw DomainError("unknown --method '" + a.method + "' (auto, kkt, pgd, grid)");
    if (a.spread == "equal") opts.spread = ZeroWeightSpread::kEqual;
    else if (a.spread == "data-share") opts.spread = ZeroWeightSpread::kDataShare;
    else throw DomainError("unknown --spread '" + a.spread + "' (equal, data-share)");
    sol = optimize_ratios(params, dirs, w, opts);
  }

  const auto candidates = temperature_candidates(params, dirs, w, temps);
  Json table = Json::array();
  bool dpl_best = true;
  for (const auto& c : candidates) {
    const bool feasible = std::all_of(c.p.begin(), c.p.end(), [&](double x) { return x >= a.floor; });
    if (feasible && c.objective < sol.objective) dpl_best = false;
    table.push_back({{"temperature", c.temperature}, {"p", c.p}, {"objective", c.objective}, {"feasible", feasible}});
  }
  Json out;
  out["directions"] = directions_to_json(dirs);
  out["weights"] = w.r;
  out["solution"] = ratio_solution_to_json(sol, dirs);
  out["temperature_comparison"] = std::move(table);
  out["dpl_not_worse_than_temperature"] = dpl_best;
  if (ctx.format == "csv") {
    std::string body = "candidate,objective";
    for (const auto& d : dirs) body += ",p_" + d.name;
    body += "\n";
    auto row = [&](const std::string& name, double obj, std::span<const double> p) {
      body += name + "," + format_double(obj);
      for (double x : p) body += "," + format_double(x);
      body += "\n";
    };
    row("dpl", sol.objective, sol.p);
    for (const auto& c : candidates) row("T=" + shortest(c.temperature), c.objective, c.p);
    emit_csv(ctx, body);
  } else {
    emit_json(ctx, out);
  }

  ctx.err << "candidate    objective\n";
  char line[96];
  for (const auto& c : candidates) {
    std::snprintf(line, sizeof line, "T=%-9s  %.6f\n", shortest(c.temperature).c_str(), c.objective);
    ctx.err << line;
  }
  std::snprintf(line, sizeof line, "%-11s  %.6f\n", "dpl", sol.objective);
  ctx.err << line;
  for (const auto& wmsg : sol.warnings) ctx.err << "warning: " << wmsg << '\n';
  return sol.converged ? kExitOk : kExitFlagged;
}

// ---------------------------------------------------------------- pareto

struct ParetoArgs {
  std::string input;
  double tolerance = 1e-3;
};

bool looks_like_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char c = 0;
  while (in.get(c)) {
    if (!std::isspace(static_cast<unsigned char>(c))) return c == '{' || c == '[';
  }
  return false;
}

int cmd_pareto(Context& ctx, const ParetoArgs& a) {
  ctx.manifest.add_input(a.input);
  ctx.manifest.config = {{"tolerance", a.tolerance}};
  std::vector<SweepPoint> pts;
  if (looks_like_json(a.input)) {
    pts = sweep_points_from_json(read_json_file(a.input));
  } else {
    pts = sweep_points_from_observations(read_observations_csv(a.input));
  }
  CollapseOptions opts;
  opts.tolerance = a.tolerance;
  const auto report = detect_collapse(pts, opts);
  if (ctx.format == "csv") {
    std::string body = "direction_index,monotonicity,argmin_ratio,min_loss\n";
    for (std::size_t d = 0; d < report.directions.size(); ++d) {
      body += std::to_string(d) + "," + to_string(report.directions[d].shape) + "," +
              format_double(report.directions[d].argmin_ratio) + "," +
              format_double(report.directions[d].min_loss) + "\n";
    }
    body = "# collapsed=" + std::string(report.collapsed ? "true" : "false") + "\n" + body;
    emit_csv(ctx, body);
  } else {
    emit_json(ctx, collapse_report_to_json(report));
  }
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config;
  std::string scenario;
  std::string detail;
  std::optional<int> steps;
  std::optional<int> seeds;
};

int cmd_simulate(Context& ctx, const SimulateArgs& a) {
  if (!a.config.empty() && !a.scenario.empty()) throw DomainError("give either a config file or --scenario");
  SimScenario sc;
  if (!a.config.empty()) {
    ctx.manifest.add_input(a.config);
    sc = sim_scenario_from_json(read_json_file(a.config));
  } else {
    const std::string name = a.scenario.empty() ? "imbalanced" : a.scenario;
    if (name == "imbalanced") sc.experiments = {SimConfig::imbalanced()};
    else if (name == "balanced") sc.experiments = {SimConfig::balanced()};
    else if (name == "scaling") sc = scaling_scenario();
    else throw DomainError("unknown --scenario '" + name + "' (imbalanced, balanced, scaling)");
  }
  for (auto& e : sc.experiments) {
    if (a.steps) e.steps = *a.steps;
    if (a.seeds) {
      if (*a.seeds < 1) throw DomainError("--seeds must be >= 1");
      e.seeds.clear();
      for (int i = 0; i < *a.seeds; ++i) e.seeds.push_back(static_cast<std::uint64_t>(i));
    }
    if (ctx.seed) e.master_seed = *ctx.seed;
    e.validate();
  }
  ctx.manifest.seed = sc.experiments.front().master_seed;
  ctx.manifest.config = sim_scenario_to_json(sc);

  std::vector<Observation> obs;
  std::vector<SweepPoint> pts;
  Json details = Json::array();
  std::size_t diverged = 0;
  long long next_id = 0;
  for (const auto& e : sc.experiments) {
    const SweepResult sweep = run_sweep(e);
    const auto o = sweep_observations(sweep, next_id);
    obs.insert(obs.end(), o.begin(), o.end());
    const auto p = sweep_points(sweep);
    pts.insert(pts.end(), p.begin(), p.end());
    next_id += static_cast<long long>(sweep.grid.size());
    diverged += sweep.diverged_records;
    details.push_back(sweep_detail_to_json(sweep));
  }

  if (ctx.format == "json") {
    emit_json(ctx, sweep_points_to_json(pts));
  } else {
    std::ostringstream s;
    write_observations_csv(s, obs);
    emit_csv(ctx, s.str());
  }
  std::string detail = a.detail;
  if (detail.empty() && !ctx.output.empty()) detail = ctx.output + ".detail.json";
  if (!detail.empty()) {
    std::ostringstream s;
    write_json(s, with_manifest(ctx, Json{{"experiments", details}}));
    write_file(detail, s.str());
  }
  if (diverged > 0) {
    ctx.err << "warning: " << diverged << " training run(s) diverged\n";
    return kExitFlagged;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- temperature

struct TemperatureArgs {
  std::string shares;
  std::string sizes;
  std::vector<double> temperatures;
};

int cmd_temperature(Context& ctx, const TemperatureArgs& a) {
  if (a.shares.empty() == a.sizes.empty()) throw DomainError("give exactly one of --shares or --sizes");
  if (a.temperatures.empty()) throw DomainError("give at least one --temperature");
  const bool raw = !a.sizes.empty();
  const auto values = parse_list(raw ? a.sizes : a.shares, raw ? "--sizes" : "--shares");
  ctx.manifest.config = {{raw ? "sizes" : "shares", values}, {"temperatures", a.temperatures}};
  Json list = Json::array();
  std::string body = "temperature";
  for (std::size_t i = 0; i < values.size(); ++i) body += ",w" + std::to_string(i);
  body += "\n";
  for (double t : a.temperatures) {
    const auto w = raw ? temperature_weights_from_sizes(values, t) : temperature_weights(values, t);
    list.push_back({{"temperature", t}, {"weights", w}});
    body += shortest(t);
    for (double x : w) body += "," + format_double(x);
    body += "\n";
  }
  if (ctx.format == "csv") {
    emit_csv(ctx, body);
  } else {
    Json out;
    out[raw ? "sizes" : "shares"] = values;
    out["candidates"] = std::move(list);
    emit_json(ctx, out);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- presets

int cmd_presets(Context& ctx, const std::string& label) {
  std::vector<Preset> presets;
  if (label.empty()) presets = available_presets();
  else presets = {find_preset(label)};
  ctx.manifest.config = {{"label", label}};
  if (ctx.format == "csv") {
    // Shortest round-trip digits so shipped decimals print as written.
    std::string body = "label,k,alpha,q,beta,gamma,b\n";
    for (const auto& p : presets) {
      const auto& v = p.params;
      body += p.label + "," + shortest(v.k) + "," + shortest(v.alpha) + "," + shortest(v.q) + "," +
              shortest(v.beta) + "," + shortest(v.gamma) + "," + shortest(v.b) + "\n";
    }
    emit_csv(ctx, body);
  } else {
    Json list = Json::array();
    for (const auto& p : presets) list.push_back(preset_to_json(p));
    emit_json(ctx, Json{{"presets", list}});
  }
  return kExitOk;
}

}  // namespace

std::vector<SweepPoint> sweep_points_from_observations(std::span<const Observation> observations) {
  if (observations.empty()) throw InsufficientDataError("no observations");
  std::vector<std::pair<std::string, double>> dirs;
  auto dir_index = [&](const Observation& o) {
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      if (dirs[i].first == o.direction && dirs[i].second == o.data_size) return i;
    }
    dirs.emplace_back(o.direction, o.data_size);
    return dirs.size() - 1;
  };
  std::vector<std::size_t> idx;
  for (const auto& o : observations) idx.push_back(dir_index(o));
  const std::size_t k = dirs.size();
  if (k < 2) throw DimensionError("a sweep needs at least 2 directions");

  const bool ids = std::all_of(observations.begin(), observations.end(),
                               [](const Observation& o) { return o.point_id.has_value(); });
  std::vector<std::vector<std::size_t>> groups;
  if (ids) {
    std::map<long long, std::size_t> slot;
    for (std::size_t r = 0; r < observations.size(); ++r) {
      auto [it, fresh] = slot.emplace(*observations[r].point_id, groups.size());
      if (fresh) groups.emplace_back();
      groups[it->second].push_back(r);
    }
  } else {
    if (observations.size() % k != 0) {
      throw DimensionError("rows without point_id must come in blocks of one row per direction");
    }
    for (std::size_t r = 0; r < observations.size(); r += k) {
      groups.emplace_back();
      for (std::size_t j = 0; j < k; ++j) groups.back().push_back(r + j);
    }
  }

  std::vector<SweepPoint> pts;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    SweepPoint sp;
    sp.ratios.assign(k, std::numeric_limits<double>::quiet_NaN());
    sp.loss.losses.assign(k, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t r : groups[g]) {
      const std::size_t d = idx[r];
      if (!std::isnan(sp.ratios[d])) throw DimensionError("sweep point has a direction twice");
      sp.ratios[d] = observations[r].sampling_ratio;
      sp.loss.losses[d] = observations[r].eval_loss;
    }
    if (groups[g].size() != k) throw DimensionError("sweep point is missing a direction");
    sp.loss.tag = "point " + std::to_string(g);
    pts.push_back(std::move(sp));
  }
  return pts;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Double Power Law sampling-ratio toolkit", "dplopt"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  std::string output, format;
  auto* seed_opt = app.add_option("--seed", seed, "Master seed (u64)");
  app.add_option("--output", output, "Write the result to this path");
  app.add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "csv"}));
  app.set_version_flag("--version", std::string(kToolVersion));

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit DPL parameters to an observation CSV");
  fit_cmd->add_option("observations", fit.input, "Observation CSV")->required();
  fit_cmd->add_flag("--no-joint", fit.no_joint, "Skip the joint refinement after the staged fit");
  fit_cmd->add_option("--max-iterations", fit.max_iterations, "Solver iteration cap");

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "Predicted loss curves and critical points");
  add_model_options(pred_cmd, pred.model);
  pred_cmd->add_option("--grid", pred.grid, "lo:hi:step or a comma list of ratios in (0, 1]");
  pred_cmd->add_flag("--strict-bias", pred.strict_bias, "Fail when a direction has no fitted bias");

  OptimizeArgs opt;
  auto* opt_cmd = app.add_subcommand("optimize", "Optimal sampling ratios for weighted directions");
  add_model_options(opt_cmd, opt.model);
  opt_cmd->add_option("--weights", opt.weights, "Metric weights r1,r2,... summing to 1 (default uniform)");
  opt_cmd->add_option("--floor", opt.floor, "Minimum ratio per direction");
  opt_cmd->add_option("--method", opt.method, "auto, kkt, pgd or grid");
  opt_cmd->add_option("--spread", opt.spread, "Unused mass on zero-weight directions: equal or data-share");
  opt_cmd->add_option("--temperatures", opt.temperatures, "Temperatures to compare against");
  opt_cmd->add_option("--resolution", opt.resolution, "Grid step for --method grid");
  opt_cmd->add_option("--starts", opt.starts, "Projected-gradient starts");

  ParetoArgs par;
  auto* par_cmd = app.add_subcommand("pareto", "Collapse analysis of a sweep (CSV or JSON)");
  par_cmd->add_option("sweep", par.input, "Sweep file")->required();
  par_cmd->add_option("--tolerance", par.tolerance, "Monotonicity tolerance in nats");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Run the synthetic multi-task sweep");
  sim_cmd->add_option("config", sim.config, "Simulation config JSON");
  sim_cmd->add_option("--scenario", sim.scenario, "imbalanced, balanced or scaling");
  sim_cmd->add_option("--detail", sim.detail, "Per-seed detail JSON path");
  sim_cmd->add_option("--steps", sim.steps, "Override training steps");
  sim_cmd->add_option("--seeds", sim.seeds, "Override the seed list with 0..N-1");

  TemperatureArgs temp;
  auto* temp_cmd = app.add_subcommand("temperature", "Temperature sampling weights");
  temp_cmd->add_option("--shares", temp.shares, "Data shares s1,s2,...");
  temp_cmd->add_option("--sizes", temp.sizes, "Raw data sizes, normalized to shares");
  temp_cmd->add_option("-T,--temperature", temp.temperatures, "Temperature (repeatable)");

  std::string label;
  auto* pre_cmd = app.add_subcommand("presets", "Print the shipped parameter presets");
  pre_cmd->add_option("--label", label, "Only this preset");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }

  auto* chosen = app.get_subcommands().front();
  Context ctx{out, err, std::nullopt, output, format, {}, utc_timestamp()};
  if (*seed_opt) ctx.seed = seed;
  ctx.manifest.command = chosen->get_name();
  ctx.manifest.seed = seed;
  if (ctx.format.empty()) {
    ctx.format = (chosen == pred_cmd || chosen == sim_cmd) ? "csv" : "json";
  }
  ctx.manifest.config = Json::object();

  try {
    if (chosen == fit_cmd) return cmd_fit(ctx, fit);
    if (chosen == pred_cmd) return cmd_predict(ctx, pred);
    if (chosen == opt_cmd) return cmd_optimize(ctx, opt);
    if (chosen == par_cmd) return cmd_pareto(ctx, par);
    if (chosen == sim_cmd) return cmd_simulate(ctx, sim);
    if (chosen == temp_cmd) return cmd_temperature(ctx, temp);
    if (chosen == pre_cmd) return cmd_presets(ctx, label);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  return kExitInputError;
}

}  // namespace dplopt
