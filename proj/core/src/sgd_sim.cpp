// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "lcsc/sgd_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "lcsc/error.hpp"
#include "lcsc/parallel.hpp"

namespace lcsc {

namespace {

using nlohmann::json;

constexpr double kMaxConditionNumber = 1e8;

double norm(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

Checkpoint make_checkpoint(std::uint64_t iteration, std::span<const double> theta) {
  std::vector<float> data(theta.begin(), theta.end());
  TensorMap weights;
  weights.insert("theta", {static_cast<std::int64_t>(theta.size())}, std::move(data));
  return Checkpoint{iteration, std::move(weights)};
}

std::vector<double> random_ball_point(std::size_t dim, double radius, SimRng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> v(dim);
  double n = 0.0;
  while (n == 0.0) {
    for (auto& x : v) x = gauss(rng);
    n = norm(v);
  }
  const double r = radius * std::pow(unif(rng), 1.0 / static_cast<double>(dim));
  for (auto& x : v) x *= r / n;
  return v;
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("field '{}': {}", key, e.what()));
  }
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> keys, std::string_view what) {
  if (!j.is_object()) throw ConfigError(fmt::format("{} must be a JSON object", what));
  for (const auto& [key, _] : j.items())
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw ConfigError(fmt::format("unknown {} field '{}'", what, key));
}

}  // namespace

void validate(const SimConfig& cfg) {
  if (cfg.dim < 1) throw ConfigError("sim dim must be at least 1");
  if (!(cfg.beta > 0.0)) throw ConfigError(fmt::format("sim beta {} must be positive", cfg.beta));
  if (!(cfg.noise_bound > 0.0)) throw ConfigError(fmt::format("sim noise_bound {} must be positive", cfg.noise_bound));
  if (cfg.iters < 1) throw ConfigError("sim iters must be at least 1");
  if (cfg.seeds < 1) throw ConfigError("sim seeds must be at least 1");
  if (cfg.checkpoint_every < 1) throw ConfigError("sim checkpoint_every must be at least 1");
  if (!(cfg.noise_scale >= 0.0)) throw ConfigError("sim noise_scale must be non-negative");
  if (cfg.parallelism < 1) throw ConfigError("sim parallelism must be at least 1");
  if (cfg.initial_point && cfg.initial_point->size() != cfg.dim)
    throw ConfigError(fmt::format("initial_point has {} entries, dim is {}", cfg.initial_point->size(), cfg.dim));
}

json to_json(const SimConfig& cfg) {
  json j{{"dim", cfg.dim},           {"beta", cfg.beta},
         {"noise_bound", cfg.noise_bound}, {"iters", cfg.iters},
         {"seeds", cfg.seeds},       {"checkpoint_every", cfg.checkpoint_every},
         {"noise_scale", cfg.noise_scale}, {"seed", cfg.seed},
         {"parallelism", cfg.parallelism}};
  if (cfg.initial_point) j["initial_point"] = *cfg.initial_point;
  return j;
}

SimConfig sim_config_from_json(const json& j) {
  reject_unknown(j,
                 {"dim", "beta", "noise_bound", "iters", "seeds", "checkpoint_every", "noise_scale", "seed",
                  "parallelism", "initial_point"},
                 "sim config");
  SimConfig cfg;
  read_if(j, "dim", cfg.dim);
  read_if(j, "beta", cfg.beta);
  read_if(j, "noise_bound", cfg.noise_bound);
  read_if(j, "iters", cfg.iters);
  read_if(j, "seeds", cfg.seeds);
  read_if(j, "checkpoint_every", cfg.checkpoint_every);
  read_if(j, "noise_scale", cfg.noise_scale);
  read_if(j, "seed", cfg.seed);
  read_if(j, "parallelism", cfg.parallelism);
  if (j.contains("initial_point")) {
    std::vector<double> p;
    read_if(j, "initial_point", p);
    cfg.initial_point = std::move(p);
  }
  validate(cfg);
  return cfg;
}

SimRng trajectory_rng(std::uint64_t base_seed, std::uint64_t trajectory) {
  std::seed_seq seq{static_cast<std::uint32_t>(base_seed), static_cast<std::uint32_t>(base_seed >> 32),
                    static_cast<std::uint32_t>(trajectory), static_cast<std::uint32_t>(trajectory >> 32), 0x5344u};
  return SimRng(seq);
}

std::vector<double> sample_gradient(std::span<const double> theta, const SimConfig& cfg, SimRng& rng) {
  std::vector<double> g(theta.size());
  const double std_dev = cfg.noise_scale * cfg.noise_bound / std::sqrt(static_cast<double>(theta.size()));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = cfg.beta * theta[i];
    if (std_dev > 0.0) g[i] += std_dev * gauss(rng);
  }
  const double n = norm(g);
  if (n > cfg.noise_bound) {
    const double scale = cfg.noise_bound / n;
    for (auto& x : g) x *= scale;
  }
  return g;
}

double objective(std::span<const double> theta, double beta) {
  return 0.5 * beta * std::inner_product(theta.begin(), theta.end(), theta.begin(), 0.0);
}

TrajectoryRun simulate(const SimConfig& cfg, std::uint64_t trajectory, std::span<const double> ema_rates) {
  validate(cfg);
  for (double r : ema_rates)
    if (!(r > 0.0 && r < 1.0)) throw ConfigError(fmt::format("EMA rate {} must lie in (0, 1)", r));

  SimRng rng = trajectory_rng(cfg.seed, trajectory);
  std::vector<double> theta =
      cfg.initial_point ? *cfg.initial_point : random_ball_point(cfg.dim, cfg.noise_bound / cfg.beta, rng);

  std::vector<Checkpoint> recorded;
  recorded.push_back(make_checkpoint(0, theta));

  std::vector<std::vector<double>> ema_sum(ema_rates.size(), std::vector<double>(cfg.dim, 0.0));
  std::vector<double> ema_norm(ema_rates.size(), 0.0);

  for (std::uint64_t n = 1; n <= cfg.iters; ++n) {
    const auto g = sample_gradient(theta, cfg, rng);
    const double step = 1.0 / (cfg.beta * static_cast<double>(n));
    for (std::size_t i = 0; i < cfg.dim; ++i) theta[i] -= step * g[i];

    for (std::size_t k = 0; k < ema_rates.size(); ++k) {
      const double r = ema_rates[k];
      for (std::size_t i = 0; i < cfg.dim; ++i) ema_sum[k][i] = r * ema_sum[k][i] + theta[i];
      ema_norm[k] = r * ema_norm[k] + 1.0;
    }
    if (n % cfg.checkpoint_every == 0) recorded.push_back(make_checkpoint(n, theta));
  }

  TrajectoryRun run{CheckpointSet(std::move(recorded)), theta, {}};
  for (std::size_t k = 0; k < ema_rates.size(); ++k) {
    for (auto& x : ema_sum[k]) x /= ema_norm[k];
    run.ema[ema_rates[k]] = std::move(ema_sum[k]);
  }
  return run;
}

CheckpointSet run_trajectory(const SimConfig& cfg, std::uint64_t trajectory) {
  return simulate(cfg, trajectory).checkpoints;
}

double last_iterate_bound(double noise_bound, double beta, std::uint64_t iters) {
  const double n = static_cast<double>(iters);
  return 17.0 * noise_bound * noise_bound * (1.0 + std::log(n)) / (beta * n);
}

std::uint64_t ema_horizon(double rate) {
  if (!(rate > 0.0 && rate < 1.0)) throw ConfigError(fmt::format("EMA rate {} must lie in (0, 1)", rate));
  return static_cast<std::uint64_t>(std::ceil(-1.0 / std::log(std::sqrt(rate))));
}

double ema_bound_constant(double rate) {
  const std::uint64_t h = ema_horizon(rate);
  double v = 0.0;
  for (std::uint64_t j = 1; j + 1 <= h; ++j)
    v += (1.0 - rate) / (std::pow(rate, static_cast<double>(j)) * static_cast<double>(j));
  return v - (1.0 - rate) / std::pow(rate, static_cast<double>(h));
}

double ema_bound(double noise_bound, double beta, std::uint64_t iters, double rate) {
  const std::uint64_t h = ema_horizon(rate);
  if (iters <= h) throw ConfigError(fmt::format("EMA bound at rate {} needs N > {}, got N = {}", rate, h, iters));
  const double n = static_cast<double>(iters);
  const double tail = 1.0 - std::pow(rate, n - 1.0);
  const double first = 1.0 / (rate * tail * (n + 1.0));
  const double second = ema_bound_constant(rate) * std::pow(rate, n) / (2.0 * tail);
  return noise_bound * noise_bound / beta * (first + second + 1.0 - rate);
}

TrajectoryStats trajectory_stats(const SimConfig& cfg, std::span<const double> ema_rates) {
  validate(cfg);
  std::vector<double> last(cfg.seeds);
  std::vector<std::vector<double>> ema(cfg.seeds);
  parallel_for(cfg.seeds, cfg.parallelism, [&](std::size_t s) {
    const TrajectoryRun run = simulate(cfg, s, ema_rates);
    last[s] = objective(run.last, cfg.beta);
    for (double r : ema_rates) ema[s].push_back(objective(run.ema.at(r), cfg.beta));
  });

  TrajectoryStats stats;
  const double count = static_cast<double>(cfg.seeds);
  for (double v : last) stats.last_iter_gap += v / count;
  stats.bound_last = last_iterate_bound(cfg.noise_bound, cfg.beta, cfg.iters);
  for (std::size_t k = 0; k < ema_rates.size(); ++k) {
    double gap = 0.0;
    for (std::size_t s = 0; s < cfg.seeds; ++s) gap += ema[s][k] / count;
    stats.ema_gaps[ema_rates[k]] = gap;
    if (cfg.iters > ema_horizon(ema_rates[k]))
      stats.bound_ema[ema_rates[k]] = ema_bound(cfg.noise_bound, cfg.beta, cfg.iters, ema_rates[k]);
  }
  return stats;
}

BoundCheck theorem1_check(const SimConfig& cfg) {
  if (cfg.iters < 2) throw ConfigError("the last-iterate bound needs N > 1");
  const TrajectoryStats stats = trajectory_stats(cfg, {});
  return {stats.last_iter_gap, stats.bound_last, stats.last_iter_gap <= stats.bound_last};
}

BoundCheck theorem2_check(const SimConfig& cfg, double rate) {
  (void)ema_bound(cfg.noise_bound, cfg.beta, cfg.iters, rate);  // admissibility check
  const double rates[] = {rate};
  const TrajectoryStats stats = trajectory_stats(cfg, rates);
  const double gap = stats.ema_gaps.at(rate);
  const double bound = stats.bound_ema.at(rate);
  return {gap, bound, gap <= bound};
}

void validate(const Theorem3Config& cfg) {
  if (cfg.checkpoints < 4) throw ConfigError("EMA mixture check needs K >= 4");
  if (cfg.dim < cfg.checkpoints) throw ConfigError("EMA mixture check needs dim >= K");
  if (!(cfg.rate > 0.0 && cfg.rate < 1.0)) throw ConfigError("EMA mixture rate must lie in (0, 1)");
  if (cfg.trials < 1) throw ConfigError("EMA mixture check needs at least one trial");
  if (cfg.grid_points < 2) throw ConfigError("EMA mixture grid needs at least 2 points");
  if (!(cfg.grid_min > 0.0 && cfg.grid_min < cfg.grid_max && cfg.grid_max < 1.0))
    throw ConfigError("EMA mixture grid must satisfy 0 < min < max < 1");
}

json to_json(const Theorem3Config& cfg) {
  return json{{"checkpoints", cfg.checkpoints}, {"dim", cfg.dim},           {"rate", cfg.rate},
              {"trials", cfg.trials},           {"grid_points", cfg.grid_points}, {"grid_min", cfg.grid_min},
              {"grid_max", cfg.grid_max},       {"seed", cfg.seed}};
}

Theorem3Config theorem3_config_from_json(const json& j) {
  reject_unknown(j, {"checkpoints", "dim", "rate", "trials", "grid_points", "grid_min", "grid_max", "seed"},
                 "EMA mixture config");
  Theorem3Config cfg;
  read_if(j, "checkpoints", cfg.checkpoints);
  read_if(j, "dim", cfg.dim);
  read_if(j, "rate", cfg.rate);
  read_if(j, "trials", cfg.trials);
  read_if(j, "grid_points", cfg.grid_points);
  read_if(j, "grid_min", cfg.grid_min);
  read_if(j, "grid_max", cfg.grid_max);
  read_if(j, "seed", cfg.seed);
  validate(cfg);
  return cfg;
}

std::vector<std::vector<double>> ema_trajectory(const std::vector<std::vector<double>>& thetas, double rate) {
  std::vector<std::vector<double>> out;
  out.reserve(thetas.size());
  for (const auto& theta : thetas) {
    if (out.empty()) {
      out.push_back(theta);
      continue;
    }
    std::vector<double> next(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) next[i] = rate * out.back()[i] + (1.0 - rate) * theta[i];
    out.push_back(std::move(next));
  }
  return out;
}

double min_trajectory_distance(const std::vector<std::vector<double>>& thetas, double rate,
                               std::span<const std::size_t> indices, std::span<const double> weights,
                               const Theorem3Config& grid) {
  if (indices.size() != weights.size() || indices.empty())
    throw ConfigError("trajectory distance needs one weight per index");
  const auto ema = ema_trajectory(thetas, rate);
  const std::size_t dim = thetas.front().size();
  std::vector<double> combo(dim, 0.0);
  for (std::size_t j = 0; j < indices.size(); ++j) {
    if (indices[j] >= ema.size()) throw ConfigError("trajectory index out of range");
    for (std::size_t i = 0; i < dim; ++i) combo[i] += weights[j] * ema[indices[j]][i];
  }
  const double combo_norm = norm(combo);

  double best = std::numeric_limits<double>::infinity();
  std::vector<double> point(dim);
  for (std::size_t g = 0; g < grid.grid_points; ++g) {
    const double r = grid.grid_min + (grid.grid_max - grid.grid_min) * static_cast<double>(g) /
                                         static_cast<double>(grid.grid_points - 1);
    for (std::size_t n = 0; n < thetas.size(); ++n) {
      double dist2 = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        point[i] = n == 0 ? thetas[0][i] : r * point[i] + (1.0 - r) * thetas[n][i];
        const double d = combo[i] - point[i];
        dist2 += d * d;
      }
      best = std::min(best, std::sqrt(dist2));
    }
  }
  return best / combo_norm;
}

Theorem3Result theorem3_check(const Theorem3Config& cfg) {
  validate(cfg);
  Theorem3Result result;
  result.trial_distances.resize(cfg.trials);
  for (std::size_t t = 0; t < cfg.trials; ++t) {
    SimRng rng = trajectory_rng(cfg.seed, t);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<std::vector<double>> thetas(cfg.checkpoints, std::vector<double>(cfg.dim));
    for (;;) {
      Eigen::MatrixXd m(cfg.checkpoints, cfg.dim);
      for (std::size_t k = 0; k < cfg.checkpoints; ++k)
        for (std::size_t i = 0; i < cfg.dim; ++i) m(k, i) = thetas[k][i] = gauss(rng);
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
      const auto& sv = svd.singularValues();
      if (sv(sv.size() - 1) > 0.0 && sv(0) / sv(sv.size() - 1) <= kMaxConditionNumber) break;
      ++result.redraws;
    }

    // three distinct indices after the first, in increasing order
    std::vector<std::size_t> pool(cfg.checkpoints - 1);
    std::iota(pool.begin(), pool.end(), 1);
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<std::size_t> indices(pool.begin(), pool.begin() + 3);
    std::sort(indices.begin(), indices.end());

    // uniform on the open simplex
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> weights(3);
    double total = 0.0;
    for (auto& w : weights) total += (w = expo(rng) + std::numeric_limits<double>::min());
    for (auto& w : weights) w /= total;

    result.trial_distances[t] = min_trajectory_distance(thetas, cfg.rate, indices, weights, cfg);
  }
  result.min_distance = *std::min_element(result.trial_distances.begin(), result.trial_distances.end());
  return result;
}

}  // namespace lcsc
