#include "dplopt/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dplopt/error.hpp"
#include "dplopt/kernels.hpp"
#include "dplopt/numeric.hpp"
#include "dplopt/rng.hpp"
#include "dplopt/sharpness.hpp"

namespace dplopt {
namespace {

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Dataset {
  std::vector<double> x;  ///< row-major, n x input_dim
  std::vector<double> y;
  std::size_t size() const { return y.size(); }
};

/// input -> hidden tanh -> scalar.
struct Teacher {
  int input = 0, hidden = 0;
  std::vector<double> w1, b1, w2;
  double b2 = 0.0;

  Teacher(int in, int h, Rng& rng) : input(in), hidden(h), w1(std::size_t(in) * h), b1(h), w2(h) {
    for (double& w : w1) w = rng.normal();
    for (double& b : b1) b = 0.5 * rng.normal();
    for (double& w : w2) w = rng.normal() / std::sqrt(static_cast<double>(h));
    b2 = 0.0;
  }

  double operator()(const double* x) const {
    double out = b2;
    for (int j = 0; j < hidden; ++j) {
      double a = b1[j];
      for (int i = 0; i < input; ++i) a += w1[std::size_t(j) * input + i] * x[i];
      out += w2[j] * std::tanh(a);
    }
    return out;
  }
};

Dataset sample(const Teacher& teacher, std::size_t n, double noise, Rng& rng) {
  Dataset d;
  d.x.resize(n * teacher.input);
  d.y.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    double* x = d.x.data() + s * teacher.input;
    for (int i = 0; i < teacher.input; ++i) x[i] = rng.normal();
    d.y[s] = teacher(x) + noise * rng.normal();
  }
  return d;
}

/// Shared trunk with per-task heads; parameters live in one flat vector.
class Network {
 public:
  Network(int input, int width, std::size_t tasks)
      : in_(input), w_(width), tasks_(tasks),
        off_b1_(std::size_t(width) * input),
        off_w2_(off_b1_ + width),
        off_b2_(off_w2_ + std::size_t(width) * width),
        off_heads_(off_b2_ + width),
        h1_(width), h2_(width), d1_(width), d2_(width) {}

  std::size_t parameter_count() const { return off_heads_ + tasks_ * (w_ + 1); }
  std::size_t trunk_count() const { return off_heads_; }
  std::size_t head_offset(std::size_t task) const { return off_heads_ + task * (w_ + 1); }

  void initialize(std::vector<double>& theta, Rng& trunk_rng,
                  const std::vector<std::uint64_t>& head_seeds) const {
    theta.assign(parameter_count(), 0.0);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(in_));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(w_));
    for (std::size_t i = 0; i < off_b1_; ++i) theta[i] = s1 * trunk_rng.normal();
    for (std::size_t i = off_w2_; i < off_b2_; ++i) theta[i] = s2 * trunk_rng.normal();
    for (std::size_t t = 0; t < tasks_; ++t) {
      Rng head_rng(head_seeds[t]);
      for (int j = 0; j < w_; ++j) theta[head_offset(t) + j] = s2 * head_rng.normal();
    }
  }

  double predict(const std::vector<double>& theta, const double* x, std::size_t task) {
    forward(theta, x);
    return kernels::active().dot(theta.data() + head_offset(task), h2_.data(), w_) +
           theta[head_offset(task) + w_];
  }

  /// Adds scale * d(0.5 e^2)/dtheta to grad; returns 0.5 e^2.
  double accumulate(const std::vector<double>& theta, const double* x, double target,
                    std::size_t task, double scale, std::vector<double>& grad) {
    const auto& k = kernels::active();
    const double y = predict(theta, x, task);
    const double e = y - target;
    const double* head = theta.data() + head_offset(task);
    double* ghead = grad.data() + head_offset(task);
    k.axpy(scale * e, h2_.data(), ghead, w_);
    ghead[w_] += scale * e;
    for (int i = 0; i < w_; ++i) d2_[i] = scale * e * head[i] * (1.0 - h2_[i] * h2_[i]);
    std::fill(d1_.begin(), d1_.end(), 0.0);
    for (int i = 0; i < w_; ++i) {
      const double* row = theta.data() + off_w2_ + std::size_t(i) * w_;
      k.axpy(d2_[i], h1_.data(), grad.data() + off_w2_ + std::size_t(i) * w_, w_);
      k.axpy(d2_[i], row, d1_.data(), w_);
      grad[off_b2_ + i] += d2_[i];
    }
    for (int j = 0; j < w_; ++j) {
      const double d = d1_[j] * (1.0 - h1_[j] * h1_[j]);
      k.axpy(d, x, grad.data() + std::size_t(j) * in_, in_);
      grad[off_b1_ + j] += d;
    }
    return 0.5 * e * e;
  }

 private:
  void forward(const std::vector<double>& theta, const double* x) {
    const auto& k = kernels::active();
    for (int j = 0; j < w_; ++j) {
      h1_[j] = std::tanh(k.dot(theta.data() + std::size_t(j) * in_, x, in_) + theta[off_b1_ + j]);
    }
    for (int j = 0; j < w_; ++j) {
      h2_[j] = std::tanh(k.dot(theta.data() + off_w2_ + std::size_t(j) * w_, h1_.data(), w_) +
                         theta[off_b2_ + j]);
    }
  }

  int in_, w_;
  std::size_t tasks_;
  std::size_t off_b1_, off_w2_, off_b2_, off_heads_;
  std::vector<double> h1_, h2_, d1_, d2_;
};

double mean_loss(Network& net, const std::vector<double>& theta, const Dataset& d, std::size_t task,
                 int input) {
  CompensatedSum s;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double e = net.predict(theta, d.x.data() + i * input, task) - d.y[i];
    s.add(0.5 * e * e);
  }
  return s.value() / static_cast<double>(d.size());
}

double median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

double LrSchedule::at(int step, int total_steps) const {
  double warm = 1.0;
  if (warmup_steps > 0 && step < warmup_steps) warm = static_cast<double>(step + 1) / warmup_steps;
  switch (kind) {
    case Kind::kConstant:
      return base * warm;
    case Kind::kInverseSqrt: {
      const double ref = std::max(warmup_steps, 1);
      return step < warmup_steps ? base * warm : base * std::sqrt(ref / (step + 1.0));
    }
    case Kind::kLinearDecay:
      return base * warm * std::max(0.0, 1.0 - static_cast<double>(step) / std::max(total_steps, 1));
  }
  return base;
}

void SimConfig::validate() const {
  if (tasks.size() < 2) throw DomainError("simulation needs at least 2 tasks");
  if (input_dim < 1 || width < 1 || teacher_width < 1) throw DomainError("network sizes must be >= 1");
  if (batch_size < 1) throw DomainError("batch size must be >= 1");
  if (steps < 0) throw DomainError("steps must be >= 0");
  if (!(noise >= 0.0)) throw DomainError("noise must be >= 0");
  if (validation_size < 1) throw DomainError("validation size must be >= 1");
  for (const auto& t : tasks) {
    if (t.train_size < static_cast<std::size_t>(batch_size)) {
      throw DomainError("task '" + t.name + "' has fewer samples than the batch size");
    }
  }
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    for (std::size_t j = i + 1; j < tasks.size(); ++j) {
      if (tasks[i].name == tasks[j].name) throw DomainError("task names must be unique");
    }
  }
  if (grid.empty()) throw DomainError("simulation grid is empty");
  for (const auto& point : grid) {
    if (point.size() != tasks.size()) throw DimensionError("grid point size differs from task count");
    double total = 0.0;
    for (double r : point) {
      if (!(r > 0.0 && r < 1.0)) throw DomainError("grid ratios must lie in (0, 1)");
      total += r;
    }
    if (std::abs(total - 1.0) > 1e-9) throw DomainError("grid ratios must sum to 1");
  }
  if (seeds.empty()) throw DomainError("simulation needs at least one seed");
}

std::vector<std::vector<double>> own_ratio_grid(std::size_t tasks, std::size_t swept, double lo,
                                                double hi, double step) {
  if (tasks < 2 || swept >= tasks) throw DomainError("invalid swept task index");
  std::vector<std::vector<double>> grid;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (std::size_t s = 0; s < n; ++s) {
    const double r = std::round((lo + static_cast<double>(s) * step) * 1e12) / 1e12;
    std::vector<double> point(tasks, (1.0 - r) / static_cast<double>(tasks - 1));
    point[swept] = r;
    grid.push_back(std::move(point));
  }
  return grid;
}

SimConfig SimConfig::imbalanced() {
  SimConfig c;
  c.tasks = {{"high", 10000}, {"low", 200}};
  c.grid = own_ratio_grid(2, 1, 0.1, 0.9, 0.1);
  for (std::uint64_t s = 0; s < 10; ++s) c.seeds.push_back(s);
  return c;
}

SimConfig SimConfig::balanced() {
  SimConfig c = imbalanced();
  c.tasks = {{"high", 10000}, {"high-b", 10000}};
  return c;
}

SimScenario scaling_scenario() {
  SimScenario sc;
  for (std::size_t low : {200u, 1000u, 4600u}) {
    SimConfig c = SimConfig::imbalanced();
    c.tasks = {{"high", 10000}, {"low-" + std::to_string(low), low}};
    sc.experiments.push_back(std::move(c));
  }
  return sc;
}

TrainResult train_once(const SimConfig& config, std::span<const double> ratios, std::uint64_t seed,
                       std::optional<std::uint64_t> stream_seed) {
  const std::size_t tasks = config.tasks.size();
  if (tasks < 1) throw DomainError("simulation needs at least one task");
  if (ratios.size() != tasks) throw DimensionError("ratio vector size differs from task count");
  double total = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw DomainError("sampling ratios must be >= 0");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("sampling ratios must sum to 1");

  // Everything per task is keyed by its name, so adding a task leaves the
  // others' teachers, data and heads untouched.
  std::vector<Dataset> train, valid;
  std::vector<std::uint64_t> head_seeds;
  for (const auto& t : config.tasks) {
    const std::uint64_t ts = derive_seed(seed, name_hash(t.name));
    Rng teacher_rng(derive_seed(ts, 1));
    Teacher teacher(config.input_dim, config.teacher_width, teacher_rng);
    Rng data_rng(derive_seed(ts, 2));
    train.push_back(sample(teacher, t.train_size, config.noise, data_rng));
    Rng valid_rng(derive_seed(ts, 3));
    valid.push_back(sample(teacher, config.validation_size, config.noise, valid_rng));
    head_seeds.push_back(derive_seed(ts, 4));
  }

  Network net(config.input_dim, config.width, tasks);
  std::vector<double> theta;
  Rng trunk_rng(derive_seed(seed, 0x7a11));
  net.initialize(theta, trunk_rng, head_seeds);

  TrainResult result;
  for (std::size_t t = 0; t < tasks; ++t) {
    result.initial_losses.push_back(mean_loss(net, theta, valid[t], t, config.input_dim));
  }

  Rng stream(stream_seed.value_or(derive_seed(seed, 0xba7c)));
  const std::vector<double> weights(ratios.begin(), ratios.end());
  std::vector<double> grad(theta.size()), velocity(theta.size(), 0.0);
  const double scale = 1.0 / config.batch_size;
  for (int step = 0; step < config.steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double batch_loss = 0.0;
    for (int b = 0; b < config.batch_size; ++b) {
      const std::size_t t = stream.categorical(weights);
      const auto idx = static_cast<std::size_t>(stream.below(train[t].size()));
      batch_loss += net.accumulate(theta, train[t].x.data() + idx * config.input_dim,
                                   train[t].y[idx], t, scale, grad);
    }
    if (!std::isfinite(batch_loss) || !all_finite(grad)) {
      result.diverged = true;
      break;
    }
    const double lr = config.lr.at(step, config.steps);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      velocity[i] = config.momentum * velocity[i] - lr * grad[i];
      theta[i] += velocity[i];
    }
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t t = 0; t < tasks; ++t) {
    const double loss = result.diverged ? nan : mean_loss(net, theta, valid[t], t, config.input_dim);
    result.validation_losses.push_back(std::isfinite(loss) ? loss : nan);
    if (!std::isfinite(loss)) result.diverged = true;
  }

  if (config.compute_sharpness && !result.diverged) {
    std::size_t begin = 0, end = theta.size();
    if (config.sharpness_subset == ParamSubset::kTrunk) end = net.trunk_count();
    if (config.sharpness_subset == ParamSubset::kHeads) begin = net.trunk_count();
    for (std::size_t t = 0; t < tasks; ++t) {
      std::vector<double> work = theta, full(theta.size());
      auto gradient = [&](std::span<const double> sub, std::span<double> out) {
        std::copy(sub.begin(), sub.end(), work.begin() + static_cast<std::ptrdiff_t>(begin));
        std::fill(full.begin(), full.end(), 0.0);
        const double s = 1.0 / static_cast<double>(valid[t].size());
        for (std::size_t i = 0; i < valid[t].size(); ++i) {
          net.accumulate(work, valid[t].x.data() + i * config.input_dim, valid[t].y[i], t, s, full);
        }
        std::copy(full.begin() + static_cast<std::ptrdiff_t>(begin),
                  full.begin() + static_cast<std::ptrdiff_t>(end), out.begin());
      };
      std::vector<double> point(theta.begin() + static_cast<std::ptrdiff_t>(begin),
                                theta.begin() + static_cast<std::ptrdiff_t>(end));
      SharpnessOptions opts;
      opts.probes = config.sharpness_probes;
      opts.seed = derive_seed(seed, 0x5a + t);
      try {
        result.sharpness.push_back(sharpness(gradient, point, opts).trace);
      } catch (const DomainError&) {
        result.sharpness.push_back(nan);
      }
    }
  }
  return result;
}

SweepResult run_sweep(const SimConfig& config) {
  config.validate();
  SweepResult out;
  for (const auto& t : config.tasks) {
    out.task_names.push_back(t.name);
    out.data_sizes.push_back(static_cast<double>(t.train_size) / 1e6);
  }
  out.grid = config.grid;
  const std::size_t seeds = config.seeds.size();
  for (std::size_t p = 0; p < config.grid.size(); ++p) {
    for (std::size_t s = 0; s < seeds; ++s) {
      SweepRecord rec;
      rec.point = p;
      rec.seed_index = s;
      rec.seed = config.seeds[s];
      rec.ratios = config.grid[p];
      const std::uint64_t data_seed = derive_seed(config.master_seed, config.seeds[s]);
      const std::uint64_t cell = p * seeds + s;
      rec.result = train_once(config, rec.ratios, data_seed,
                              derive_seed(config.master_seed ^ 0xc0ffee, cell));
      if (rec.result.diverged) ++out.diverged_records;
      out.records.push_back(std::move(rec));
    }
  }
  const std::size_t tasks = config.tasks.size();
  for (std::size_t p = 0; p < config.grid.size(); ++p) {
    std::vector<double> losses(tasks), sharp(tasks);
    for (std::size_t t = 0; t < tasks; ++t) {
      std::vector<double> l, sh;
      for (std::size_t s = 0; s < seeds; ++s) {
        const auto& r = out.records[p * seeds + s].result;
        l.push_back(r.validation_losses[t]);
        if (!r.sharpness.empty()) sh.push_back(r.sharpness[t]);
      }
      losses[t] = median(l);
      sharp[t] = median(sh);
    }
    out.median_losses.push_back(std::move(losses));
    if (config.compute_sharpness) out.median_sharpness.push_back(std::move(sharp));
  }
  return out;
}

std::vector<Observation> sweep_observations(const SweepResult& sweep, long long first_point_id) {
  std::vector<Observation> obs;
  for (std::size_t p = 0; p < sweep.grid.size(); ++p) {
    for (std::size_t t = 0; t < sweep.task_names.size(); ++t) {
      const double loss = sweep.median_losses[p][t];
      if (!std::isfinite(loss)) continue;
      Observation o;
      o.direction = sweep.task_names[t];
      o.data_size = sweep.data_sizes[t];
      o.sampling_ratio = sweep.grid[p][t];
      o.eval_loss = loss;
      o.point_id = first_point_id + static_cast<long long>(p);
      obs.push_back(std::move(o));
    }
  }
  return obs;
}

std::vector<SweepPoint> sweep_points(const SweepResult& sweep) {
  std::vector<SweepPoint> pts;
  for (std::size_t p = 0; p < sweep.grid.size(); ++p) {
    SweepPoint sp;
    sp.ratios = sweep.grid[p];
    sp.loss.losses = sweep.median_losses[p];
    sp.loss.tag = "point " + std::to_string(p);
    pts.push_back(std::move(sp));
  }
  return pts;
}

}  // namespace dplopt
