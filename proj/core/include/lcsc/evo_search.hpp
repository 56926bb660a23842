// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Evolutionary search for merge coefficients.
//
// The population starts from EMA coefficients at several rates. Each epoch
// freezes the top `parent_pool` individuals as parents, breeds
// `offspring_per_epoch` children by crossover and Gaussian mutation, and
// appends all children to the population once the batch is complete. The
// best individual ever seen is returned.

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcsc/checkpoint_store.hpp"
#include "lcsc/merge.hpp"

namespace lcsc {

class Evaluator;

using Rng = std::mt19937_64;

struct SearchConfig {
  std::uint32_t epochs = 50;
  std::uint32_t offspring_per_epoch = 40;
  std::uint32_t parent_pool = 25;
  double mutation_sigma = 0.01;
  double whole_parent_prob = 0.5;
  std::vector<double> init_rates = {0.9, 0.99, 0.999, 0.9999, 0.99995, 0.99999};
  Formulation formulation = Formulation::kDifference;
  bool clip_above_one = false;
  std::uint64_t seed = 0;
  std::uint32_t parallelism = 1;
};

void validate(const SearchConfig& cfg);

nlohmann::json to_json(const SearchConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
SearchConfig search_config_from_json(const nlohmann::json& j);

struct Individual {
  CoefficientVector coeffs;
  double fitness = 0.0;
  std::uint64_t birth_index = 0;
};

/// Strict weak order by (fitness, birth_index).
bool better(const Individual& a, const Individual& b) noexcept;

/// Generator for one offspring, a pure function of (seed, epoch, index).
Rng offspring_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index);

/// With probability whole_parent_prob returns a copy of one parent (chosen
/// uniformly); otherwise picks each position from either parent. Direct
/// results are renormalized; nullopt when that is impossible.
std::optional<CoefficientVector> crossover(const CoefficientVector& a, const CoefficientVector& b,
                                           double whole_parent_prob, Rng& rng);

/// Adds N(0, sigma^2) to every value, optionally clips each value to at most
/// one, and renormalizes direct vectors. nullopt signals an invalid
/// individual (direct sum collapsed below kMinDirectSum).
std::optional<CoefficientVector> mutate(const CoefficientVector& c, double sigma, bool clip_above_one, Rng& rng);

/// Resampling budget for invalid offspring before the search aborts.
inline constexpr int kMaxOffspringAttempts = 100;

struct SearchState {
  std::vector<Individual> population;
  std::unordered_map<std::string, double> cache;
  std::uint64_t evaluations = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t next_birth = 0;
  std::uint32_t epochs_done = 0;
};

struct SearchResult {
  Individual best;
  std::vector<double> history;  // best fitness after each epoch
  std::vector<double> initial_fitness;  // one per init rate
  std::uint64_t evaluations = 0;
  std::uint64_t cache_hits = 0;
  double wall_seconds = 0.0;
};

class EvolutionSearch {
 public:
  /// Keeps references to `set` and `evaluator`; both must outlive the search.
  EvolutionSearch(const CheckpointSet& set, SearchConfig cfg, const Evaluator& evaluator);

  /// Seeds the population with one evaluated EMA individual per init rate.
  void initialize();

  /// One generation. Returns the best fitness in the population afterwards.
  double run_epoch();

  /// initialize() followed by cfg.epochs generations.
  SearchResult run();

  const SearchState& state() const noexcept { return state_; }
  const Individual& best() const;

 private:
  std::vector<Individual> parent_pool() const;
  CoefficientVector breed(const std::vector<Individual>& parents, std::uint64_t index) const;
  double evaluate(const CoefficientVector& coeffs) const;

  const CheckpointSet& set_;
  SearchConfig cfg_;
  const Evaluator& evaluator_;
  SearchState state_;
};

SearchResult run_search(const CheckpointSet& set, const SearchConfig& cfg, const Evaluator& evaluator);

/// Coefficients document: format version, formulation, iterations, stored
/// values, full K-length expansion and best fitness. Contains nothing that
/// varies between runs with the same seed (no timings, no parallelism).
nlohmann::json coefficients_to_json(const SearchResult& result, const CheckpointSet& set, const SearchConfig& cfg);

/// Reads {"formulation": ..., "values": [...]} or {"coefficients": [...]}
/// (full direct vector).
CoefficientVector coefficients_from_json(const nlohmann::json& j);

nlohmann::json report_to_json(const SearchResult& result, const CheckpointSet& set, const SearchConfig& cfg);

inline constexpr int kFormatVersion = 1;

}  // namespace lcsc
