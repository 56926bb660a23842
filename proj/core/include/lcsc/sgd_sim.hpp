// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Noisy SGD on f(theta) = (beta / 2) ||theta||^2 with step 1 / (beta n), used
// to check the last-iterate and EMA convergence bounds numerically and to
// probe whether mixtures of EMA points lie on any single EMA trajectory.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcsc/checkpoint_store.hpp"

namespace lcsc {

struct SimConfig {
  std::size_t dim = 10;
  double beta = 1.0;
  double noise_bound = 5.0;  // G
  std::uint64_t iters = 10000;  // N
  std::size_t seeds = 100;
  std::uint64_t checkpoint_every = 100;
  /// Gaussian noise has per-coordinate std noise_scale * G / sqrt(dim).
  double noise_scale = 0.5;
  std::uint64_t seed = 0;  // base seed; trajectory s uses (seed, s)
  std::size_t parallelism = 1;
  /// Overrides the random start in the ball of radius G / beta.
  std::optional<std::vector<double>> initial_point;
};

void validate(const SimConfig& cfg);
nlohmann::json to_json(const SimConfig& cfg);
SimConfig sim_config_from_json(const nlohmann::json& j);

using SimRng = std::mt19937_64;

SimRng trajectory_rng(std::uint64_t base_seed, std::uint64_t trajectory);

/// grad + xi, rescaled so its norm is at most G.
std::vector<double> sample_gradient(std::span<const double> theta, const SimConfig& cfg, SimRng& rng);

double objective(std::span<const double> theta, double beta);

struct TrajectoryRun {
  CheckpointSet checkpoints;           // iterations 0, every, 2 every, ... <= N
  std::vector<double> last;            // theta_N
  std::map<double, std::vector<double>> ema;  // rate -> theory-form EMA of theta_1..theta_N
};

TrajectoryRun simulate(const SimConfig& cfg, std::uint64_t trajectory, std::span<const double> ema_rates = {});

/// Recorded checkpoints of one trajectory.
CheckpointSet run_trajectory(const SimConfig& cfg, std::uint64_t trajectory);

struct BoundCheck {
  double gap = 0.0;
  double bound = 0.0;
  bool holds = false;
};

/// 17 G^2 (1 + ln N) / (beta N).
double last_iterate_bound(double noise_bound, double beta, std::uint64_t iters);

/// ceil(-1 / ln sqrt(rate)); the bound for the EMA needs N above it.
std::uint64_t ema_horizon(double rate);

/// The N-independent constant of the EMA bound.
double ema_bound_constant(double rate);

double ema_bound(double noise_bound, double beta, std::uint64_t iters, double rate);

struct TrajectoryStats {
  double last_iter_gap = 0.0;
  std::map<double, double> ema_gaps;
  double bound_last = 0.0;
  std::map<double, double> bound_ema;
};

/// Seed-averaged gaps over cfg.seeds trajectories. bound_ema only holds
/// rates whose horizon is below N.
TrajectoryStats trajectory_stats(const SimConfig& cfg, std::span<const double> ema_rates);

BoundCheck theorem1_check(const SimConfig& cfg);
BoundCheck theorem2_check(const SimConfig& cfg, double rate);

struct Theorem3Config {
  std::size_t checkpoints = 10;  // K
  std::size_t dim = 50;
  double rate = 0.99;
  std::size_t trials = 100;
  std::size_t grid_points = 10000;
  double grid_min = 0.001;
  double grid_max = 0.999;
  std::uint64_t seed = 0;
};

void validate(const Theorem3Config& cfg);
nlohmann::json to_json(const Theorem3Config& cfg);
Theorem3Config theorem3_config_from_json(const nlohmann::json& j);

/// Practice-form EMA trajectory of row vectors `thetas` (K x dim, row-major).
std::vector<std::vector<double>> ema_trajectory(const std::vector<std::vector<double>>& thetas, double rate);

/// min over grid rates r' and n of ||combo - ema_{r'}(n)|| / ||combo||, where
/// combo = sum_j weights[j] ema_rate(indices[j]). Indices are 0-based.
double min_trajectory_distance(const std::vector<std::vector<double>>& thetas, double rate,
                               std::span<const std::size_t> indices, std::span<const double> weights,
                               const Theorem3Config& grid);

struct Theorem3Result {
  double min_distance = 0.0;
  std::vector<double> trial_distances;
  std::size_t redraws = 0;
};

Theorem3Result theorem3_check(const Theorem3Config& cfg);

}  // namespace lcsc
