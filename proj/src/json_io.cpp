#include "dplopt/json_io.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dplopt/error.hpp"

namespace dplopt {
namespace {

double number(const Json& obj, const char* key) {
  if (!obj.contains(key)) throw DomainError(std::string("missing field '") + key + "'");
  const auto& v = obj.at(key);
  if (!v.is_number()) throw DomainError(std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

double number_or(const Json& obj, const char* key, double fallback) {
  return obj.contains(key) ? number(obj, key) : fallback;
}

long long integer_or(const Json& obj, const char* key, long long fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw DomainError(std::string("field '") + key + "' must be an integer");
  return v.get<long long>();
}

std::vector<double> number_list(const Json& v, const char* what) {
  if (!v.is_array()) throw DomainError(std::string(what) + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw DomainError(std::string(what) + " must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

/// NaN and infinities become null.
Json num(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

Json num_list(std::span<const double> xs) {
  Json a = Json::array();
  for (double x : xs) a.push_back(num(x));
  return a;
}

const char* schedule_name(LrSchedule::Kind k) {
  switch (k) {
    case LrSchedule::Kind::kConstant: return "constant";
    case LrSchedule::Kind::kInverseSqrt: return "inverse-sqrt";
    case LrSchedule::Kind::kLinearDecay: return "linear-decay";
  }
  return "constant";
}

const char* subset_name(ParamSubset s) {
  switch (s) {
    case ParamSubset::kAll: return "all";
    case ParamSubset::kTrunk: return "trunk";
    case ParamSubset::kHeads: return "heads";
  }
  return "all";
}

}  // namespace

Json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) line += text[i] == '\n';
    throw ParseError(source + ": invalid JSON", line);
  }
}

Json parse_json(std::istream& in) {
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_json_text(buf.str(), "input");
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_json_text(buf.str(), path.string());
}

void write_json(std::ostream& out, const Json& doc) { out << doc.dump(2) << '\n'; }

Json preset_to_json(const Preset& preset) {
  Json j;
  j["label"] = preset.label;
  j["k"] = preset.params.k;
  j["alpha"] = preset.params.alpha;
  j["q"] = preset.params.q;
  j["beta"] = preset.params.beta;
  j["gamma"] = preset.params.gamma;
  j["b"] = preset.params.b;
  return j;
}

Preset preset_from_json(const Json& doc) {
  if (!doc.is_object()) throw DomainError("preset must be a JSON object");
  Preset p;
  if (!doc.contains("label") || !doc.at("label").is_string()) {
    throw DomainError("preset needs a string 'label'");
  }
  p.label = doc.at("label").get<std::string>();
  p.params = params_from_json(doc);
  p.params.biases.clear();
  return p;
}

Json params_to_json(const DplParams& params) {
  Json j;
  j["k"] = params.k;
  j["alpha"] = params.alpha;
  j["q"] = params.q;
  j["beta"] = params.beta;
  j["gamma"] = params.gamma;
  j["b"] = params.b;
  Json biases = Json::object();
  for (const auto& [key, value] : params.biases) biases[key] = num(value);
  j["biases"] = std::move(biases);
  return j;
}

DplParams params_from_json(const Json& doc) {
  if (!doc.is_object()) throw DomainError("params must be a JSON object");
  if (doc.contains("params") && doc.at("params").is_object()) return params_from_json(doc.at("params"));
  DplParams p;
  p.k = number(doc, "k");
  p.alpha = number(doc, "alpha");
  p.q = number(doc, "q");
  p.beta = number(doc, "beta");
  p.gamma = number(doc, "gamma");
  p.b = number(doc, "b");
  if (doc.contains("biases")) {
    const auto& biases = doc.at("biases");
    if (!biases.is_object()) throw DomainError("'biases' must be an object");
    for (const auto& [key, value] : biases.items()) {
      if (!value.is_number()) throw DomainError("bias '" + key + "' must be a number");
      p.biases[key] = value.get<double>();
    }
  }
  p.validate();
  return p;
}

std::vector<DirectionSpec> directions_from_json(const Json& doc) {
  const Json& list = doc.is_object() && doc.contains("directions") ? doc.at("directions") : doc;
  if (!list.is_array() || list.empty()) throw DomainError("directions must be a non-empty array");
  std::vector<DirectionSpec> out;
  for (const auto& d : list) {
    if (!d.is_object() || !d.contains("name") || !d.at("name").is_string()) {
      throw DomainError("each direction needs a string 'name'");
    }
    DirectionSpec spec{d.at("name").get<std::string>(), number(d, "data_size_millions")};
    spec.validate();
    out.push_back(std::move(spec));
  }
  return out;
}

Json directions_to_json(std::span<const DirectionSpec> directions) {
  Json a = Json::array();
  for (const auto& d : directions) a.push_back({{"name", d.name}, {"data_size_millions", d.data_size}});
  return a;
}

Json fit_report_to_json(const FitReport& report) {
  Json j;
  j["converged"] = report.converged;
  j["flagged"] = report.flagged;
  j["params"] = params_to_json(report.params);
  Json series = Json::array();
  for (const auto& s : report.series) {
    Json e;
    e["direction"] = s.direction;
    e["data_size_millions"] = s.data_size;
    e["count"] = s.count;
    e["role"] = s.role;
    e["scale"] = num(s.scale);
    e["bias"] = num(s.bias);
    e["r2"] = s.r2 ? num(*s.r2) : Json(nullptr);
    series.push_back(std::move(e));
  }
  j["series"] = std::move(series);
  Json steps = Json::array();
  for (const auto& s : report.steps) {
    steps.push_back({{"name", s.name},
                     {"residual_norm", num(s.residual_norm)},
                     {"iterations", s.iterations},
                     {"converged", s.converged},
                     {"flagged", s.flagged}});
  }
  j["steps"] = std::move(steps);
  j["warnings"] = report.warnings;
  return j;
}

Json ratio_solution_to_json(const RatioSolution& solution, std::span<const DirectionSpec> directions) {
  Json j;
  j["method"] = solution.method;
  j["converged"] = solution.converged;
  j["floor"] = solution.floor;
  Json ratios = Json::object();
  for (std::size_t i = 0; i < solution.p.size() && i < directions.size(); ++i) {
    ratios[directions[i].name] = solution.p[i];
  }
  j["p"] = num_list(solution.p);
  j["ratios"] = std::move(ratios);
  j["objective"] = num(solution.objective);
  j["losses"] = num_list(solution.losses);
  j["multiplier"] = num(solution.multiplier);
  j["kkt_residual"] = num(solution.kkt_residual);
  j["iterations"] = solution.iterations;
  j["evaluations"] = solution.evaluations;
  j["warnings"] = solution.warnings;
  return j;
}

Json collapse_report_to_json(const CollapseReport& report) {
  Json j;
  j["collapsed"] = report.collapsed;
  j["dominated_indices"] = report.dominated_indices;
  Json dirs = Json::array();
  for (const auto& d : report.directions) {
    dirs.push_back({{"monotonicity", to_string(d.shape)},
                    {"argmin_ratio", num(d.argmin_ratio)},
                    {"min_loss", num(d.min_loss)}});
  }
  j["per_direction_monotonicity"] = std::move(dirs);
  if (!report.triangles.empty()) j["triangles"] = report.triangles;
  return j;
}

Json sweep_points_to_json(std::span<const SweepPoint> points) {
  Json pts = Json::array();
  for (const auto& p : points) {
    Json e;
    e["ratios"] = num_list(p.ratios);
    e["losses"] = num_list(p.loss.losses);
    if (!p.loss.tag.empty()) e["tag"] = p.loss.tag;
    pts.push_back(std::move(e));
  }
  return Json{{"points", std::move(pts)}};
}

std::vector<SweepPoint> sweep_points_from_json(const Json& doc) {
  if (!doc.is_object() || !doc.contains("points") || !doc.at("points").is_array()) {
    throw DomainError("sweep JSON needs a 'points' array");
  }
  std::vector<SweepPoint> out;
  for (const auto& p : doc.at("points")) {
    if (!p.is_object() || !p.contains("ratios") || !p.contains("losses")) {
      throw DomainError("each sweep point needs 'ratios' and 'losses'");
    }
    SweepPoint sp;
    sp.ratios = number_list(p.at("ratios"), "ratios");
    sp.loss.losses = number_list(p.at("losses"), "losses");
    if (p.contains("tag") && p.at("tag").is_string()) sp.loss.tag = p.at("tag").get<std::string>();
    out.push_back(std::move(sp));
  }
  return out;
}

SimConfig sim_config_from_json(const Json& doc) {
  if (!doc.is_object()) throw DomainError("simulation config must be a JSON object");
  SimConfig c = SimConfig::imbalanced();
  if (doc.contains("tasks")) {
    c.tasks.clear();
    for (const auto& t : doc.at("tasks")) {
      if (!t.is_object() || !t.contains("name") || !t.at("name").is_string()) {
        throw DomainError("each task needs a string 'name'");
      }
      const long long n = integer_or(t, "train_size", -1);
      if (n < 0) throw DomainError("each task needs a non-negative integer 'train_size'");
      c.tasks.push_back({t.at("name").get<std::string>(), static_cast<std::size_t>(n)});
    }
  }
  c.input_dim = static_cast<int>(integer_or(doc, "input_dim", c.input_dim));
  c.width = static_cast<int>(integer_or(doc, "width", c.width));
  c.teacher_width = static_cast<int>(integer_or(doc, "teacher_width", c.teacher_width));
  c.noise = number_or(doc, "noise", c.noise);
  c.steps = static_cast<int>(integer_or(doc, "steps", c.steps));
  c.batch_size = static_cast<int>(integer_or(doc, "batch_size", c.batch_size));
  c.momentum = number_or(doc, "momentum", c.momentum);
  const long long vs = integer_or(doc, "validation_size", static_cast<long long>(c.validation_size));
  if (vs < 1) throw DomainError("validation_size must be >= 1");
  c.validation_size = static_cast<std::size_t>(vs);
  if (doc.contains("lr")) {
    const auto& lr = doc.at("lr");
    if (lr.is_number()) {
      c.lr.base = lr.get<double>();
    } else {
      c.lr.base = number_or(lr, "base", c.lr.base);
      c.lr.warmup_steps = static_cast<int>(integer_or(lr, "warmup_steps", c.lr.warmup_steps));
      if (lr.contains("schedule")) {
        const auto s = lr.at("schedule").get<std::string>();
        if (s == "constant") c.lr.kind = LrSchedule::Kind::kConstant;
        else if (s == "inverse-sqrt") c.lr.kind = LrSchedule::Kind::kInverseSqrt;
        else if (s == "linear-decay") c.lr.kind = LrSchedule::Kind::kLinearDecay;
        else throw DomainError("unknown lr schedule '" + s + "'");
      }
    }
  }
  if (doc.contains("grid")) {
    const auto& g = doc.at("grid");
    if (g.is_array()) {
      c.grid.clear();
      for (const auto& point : g) c.grid.push_back(number_list(point, "grid point"));
    } else if (g.is_object()) {
      const long long swept = integer_or(g, "swept", static_cast<long long>(c.tasks.size()) - 1);
      if (swept < 0) throw DomainError("grid 'swept' must be >= 0");
      c.grid = own_ratio_grid(c.tasks.size(), static_cast<std::size_t>(swept), number_or(g, "lo", 0.1),
                              number_or(g, "hi", 0.9), number_or(g, "step", 0.1));
    } else {
      throw DomainError("'grid' must be an array or an object");
    }
  } else if (c.tasks.size() != 2) {
    c.grid = own_ratio_grid(c.tasks.size(), c.tasks.size() - 1, 0.1, 0.9, 0.1);
  }
  if (doc.contains("seeds")) {
    const auto& s = doc.at("seeds");
    c.seeds.clear();
    if (s.is_number_unsigned() || s.is_number_integer()) {
      const long long n = s.get<long long>();
      if (n < 1) throw DomainError("'seeds' count must be >= 1");
      for (long long i = 0; i < n; ++i) c.seeds.push_back(static_cast<std::uint64_t>(i));
    } else if (s.is_array()) {
      for (const auto& x : s) {
        if (!x.is_number_integer() || x.get<long long>() < 0) {
          throw DomainError("'seeds' entries must be non-negative integers");
        }
        c.seeds.push_back(x.get<std::uint64_t>());
      }
    } else {
      throw DomainError("'seeds' must be a count or a list");
    }
  }
  if (doc.contains("master_seed")) c.master_seed = doc.at("master_seed").get<std::uint64_t>();
  if (doc.contains("sharpness")) {
    const auto& s = doc.at("sharpness");
    c.compute_sharpness = s.value("enabled", true);
    c.sharpness_probes = static_cast<int>(integer_or(s, "probes", c.sharpness_probes));
    const auto subset = s.value("subset", std::string("all"));
    if (subset == "all") c.sharpness_subset = ParamSubset::kAll;
    else if (subset == "trunk") c.sharpness_subset = ParamSubset::kTrunk;
    else if (subset == "heads") c.sharpness_subset = ParamSubset::kHeads;
    else throw DomainError("unknown sharpness subset '" + subset + "'");
  }
  c.validate();
  return c;
}

Json sim_config_to_json(const SimConfig& c) {
  Json j;
  Json tasks = Json::array();
  for (const auto& t : c.tasks) tasks.push_back({{"name", t.name}, {"train_size", t.train_size}});
  j["tasks"] = std::move(tasks);
  j["input_dim"] = c.input_dim;
  j["width"] = c.width;
  j["teacher_width"] = c.teacher_width;
  j["noise"] = c.noise;
  j["steps"] = c.steps;
  j["batch_size"] = c.batch_size;
  j["momentum"] = c.momentum;
  j["lr"] = {{"schedule", schedule_name(c.lr.kind)}, {"base", c.lr.base}, {"warmup_steps", c.lr.warmup_steps}};
  j["validation_size"] = c.validation_size;
  Json grid = Json::array();
  for (const auto& p : c.grid) grid.push_back(p);
  j["grid"] = std::move(grid);
  j["seeds"] = c.seeds;
  j["master_seed"] = c.master_seed;
  j["sharpness"] = {{"enabled", c.compute_sharpness},
                    {"probes", c.sharpness_probes},
                    {"subset", subset_name(c.sharpness_subset)}};
  return j;
}

SimScenario sim_scenario_from_json(const Json& doc) {
  SimScenario sc;
  if (doc.is_object() && doc.contains("experiments")) {
    const auto& list = doc.at("experiments");
    if (!list.is_array() || list.empty()) throw DomainError("'experiments' must be a non-empty array");
    for (const auto& e : list) sc.experiments.push_back(sim_config_from_json(e));
  } else {
    sc.experiments.push_back(sim_config_from_json(doc));
  }
  return sc;
}

Json sim_scenario_to_json(const SimScenario& scenario) {
  Json list = Json::array();
  for (const auto& e : scenario.experiments) list.push_back(sim_config_to_json(e));
  return Json{{"experiments", std::move(list)}};
}

Json sweep_detail_to_json(const SweepResult& sweep) {
  Json j;
  j["tasks"] = sweep.task_names;
  j["data_size_millions"] = sweep.data_sizes;
  Json points = Json::array();
  for (std::size_t p = 0; p < sweep.grid.size(); ++p) {
    Json e;
    e["ratios"] = num_list(sweep.grid[p]);
    e["median_losses"] = num_list(sweep.median_losses[p]);
    if (p < sweep.median_sharpness.size()) e["median_sharpness"] = num_list(sweep.median_sharpness[p]);
    points.push_back(std::move(e));
  }
  j["points"] = std::move(points);
  Json records = Json::array();
  for (const auto& r : sweep.records) {
    Json e;
    e["point"] = r.point;
    e["seed"] = r.seed;
    e["validation_losses"] = num_list(r.result.validation_losses);
    e["initial_losses"] = num_list(r.result.initial_losses);
    if (!r.result.sharpness.empty()) e["sharpness"] = num_list(r.result.sharpness);
    e["diverged"] = r.result.diverged;
    records.push_back(std::move(e));
  }
  j["records"] = std::move(records);
  j["diverged_records"] = sweep.diverged_records;
  return j;
}

}  // namespace dplopt
