// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "lcsc/evo_search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "lcsc/error.hpp"
#include "lcsc/evaluator.hpp"
#include "lcsc/parallel.hpp"

namespace lcsc {

namespace {

using nlohmann::json;

template <typename T>
T get_field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("search config field '{}': {}", key, e.what()));
  }
}

}  // namespace

void validate(const SearchConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("search epochs must be at least 1");
  if (cfg.offspring_per_epoch < 1) throw ConfigError("offspring_per_epoch must be at least 1");
  if (cfg.parent_pool < 1) throw ConfigError("parent_pool must be at least 1");
  if (!(cfg.mutation_sigma > 0.0) || !std::isfinite(cfg.mutation_sigma))
    throw ConfigError(fmt::format("mutation_sigma {} must be positive", cfg.mutation_sigma));
  if (!(cfg.whole_parent_prob >= 0.0 && cfg.whole_parent_prob <= 1.0))
    throw ConfigError(fmt::format("whole_parent_prob {} must lie in [0, 1]", cfg.whole_parent_prob));
  if (cfg.init_rates.empty()) throw ConfigError("init_rates must not be empty");
  for (double r : cfg.init_rates)
    if (!(r > 0.0 && r < 1.0)) throw ConfigError(fmt::format("init rate {} must lie in (0, 1)", r));
  if (cfg.parallelism < 1) throw ConfigError("parallelism must be at least 1");
}

json to_json(const SearchConfig& cfg) {
  return json{{"epochs", cfg.epochs},
              {"offspring_per_epoch", cfg.offspring_per_epoch},
              {"parent_pool", cfg.parent_pool},
              {"mutation_sigma", cfg.mutation_sigma},
              {"whole_parent_prob", cfg.whole_parent_prob},
              {"init_rates", cfg.init_rates},
              {"formulation", formulation_name(cfg.formulation)},
              {"clip_above_one", cfg.clip_above_one},
              {"seed", cfg.seed},
              {"parallelism", cfg.parallelism}};
}

SearchConfig search_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("search config must be a JSON object");
  static const std::vector<std::string> kKeys = {"epochs",     "offspring_per_epoch", "parent_pool", "mutation_sigma",
                                                 "whole_parent_prob", "init_rates",    "formulation", "clip_above_one",
                                                 "seed",       "parallelism"};
  for (const auto& [key, _] : j.items())
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end())
      throw ConfigError(fmt::format("unknown search config field '{}'", key));

  SearchConfig cfg;
  if (j.contains("epochs")) cfg.epochs = get_field<std::uint32_t>(j, "epochs");
  if (j.contains("offspring_per_epoch")) cfg.offspring_per_epoch = get_field<std::uint32_t>(j, "offspring_per_epoch");
  if (j.contains("parent_pool")) cfg.parent_pool = get_field<std::uint32_t>(j, "parent_pool");
  if (j.contains("mutation_sigma")) cfg.mutation_sigma = get_field<double>(j, "mutation_sigma");
  if (j.contains("whole_parent_prob")) cfg.whole_parent_prob = get_field<double>(j, "whole_parent_prob");
  if (j.contains("init_rates")) cfg.init_rates = get_field<std::vector<double>>(j, "init_rates");
  if (j.contains("formulation")) cfg.formulation = parse_formulation(get_field<std::string>(j, "formulation"));
  if (j.contains("clip_above_one")) cfg.clip_above_one = get_field<bool>(j, "clip_above_one");
  if (j.contains("seed")) cfg.seed = get_field<std::uint64_t>(j, "seed");
  if (j.contains("parallelism")) cfg.parallelism = get_field<std::uint32_t>(j, "parallelism");
  validate(cfg);
  return cfg;
}

bool better(const Individual& a, const Individual& b) noexcept {
  if (a.fitness != b.fitness) return a.fitness < b.fitness;
  return a.birth_index < b.birth_index;
}

Rng offspring_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t index) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(epoch), hi(epoch), lo(index), hi(index)};
  return Rng(seq);
}

std::optional<CoefficientVector> crossover(const CoefficientVector& a, const CoefficientVector& b,
                                           double whole_parent_prob, Rng& rng) {
  if (a.formulation != b.formulation || a.values.size() != b.values.size())
    throw ConfigError(fmt::format("crossover parents differ: {} values ({}) vs {} values ({})", a.values.size(),
                                  formulation_name(a.formulation), b.values.size(), formulation_name(b.formulation)));

  std::bernoulli_distribution whole(whole_parent_prob);
  std::bernoulli_distribution coin(0.5);
  if (whole(rng)) return coin(rng) ? a : b;

  CoefficientVector child = a;
  for (std::size_t j = 0; j < child.values.size(); ++j)
    if (!coin(rng)) child.values[j] = b.values[j];
  if (child == a) return a;
  if (child == b) return b;
  if (!child.normalize()) return std::nullopt;
  return child;
}

std::optional<CoefficientVector> mutate(const CoefficientVector& c, double sigma, bool clip_above_one, Rng& rng) {
  if (!(sigma > 0.0)) throw ConfigError(fmt::format("mutation sigma {} must be positive", sigma));
  std::normal_distribution<double> noise(0.0, sigma);
  CoefficientVector out = c;
  for (auto& v : out.values) {
    v += noise(rng);
    if (clip_above_one) v = std::min(v, 1.0);
  }
  if (!out.normalize()) return std::nullopt;
  return out;
}

EvolutionSearch::EvolutionSearch(const CheckpointSet& set, SearchConfig cfg, const Evaluator& evaluator)
    : set_(set), cfg_(std::move(cfg)), evaluator_(evaluator) {
  validate(cfg_);
  if (set_.size() < 2) throw ConfigError(fmt::format("search needs at least 2 checkpoints, got {}", set_.size()));
}

double EvolutionSearch::evaluate(const CoefficientVector& coeffs) const {
  const double f = evaluator_.evaluate(combine(set_, coeffs));
  if (!std::isfinite(f)) throw EvaluatorError(fmt::format("non-finite fitness {}", f));
  return f;
}

namespace {

// Evaluates a batch through the cache. Only the first occurrence of each
// uncached key is evaluated; later duplicates count as cache hits.
std::vector<double> evaluate_batch(SearchState& state, std::span<const CoefficientVector> batch, std::size_t parallelism,
                                   const std::function<double(const CoefficientVector&)>& eval,
                                   const std::function<std::string(std::size_t)>& context) {
  std::vector<double> fitness(batch.size(), 0.0);
  std::vector<std::string> keys(batch.size());
  std::vector<std::size_t> pending;
  std::vector<std::ptrdiff_t> source(batch.size(), -1);  // index of the in-batch evaluation to copy
  std::unordered_map<std::string, std::size_t> first_seen;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    keys[i] = batch[i].canonical_key();
    if (auto it = state.cache.find(keys[i]); it != state.cache.end()) {
      fitness[i] = it->second;
      ++state.cache_hits;
    } else if (auto seen = first_seen.find(keys[i]); seen != first_seen.end()) {
      source[i] = static_cast<std::ptrdiff_t>(seen->second);
      ++state.cache_hits;
    } else {
      first_seen.emplace(keys[i], i);
      pending.push_back(i);
    }
  }

  parallel_for(pending.size(), parallelism, [&](std::size_t j) {
    const std::size_t i = pending[j];
    try {
      fitness[i] = eval(batch[i]);
    } catch (const std::exception& e) {
      throw EvaluatorError(fmt::format("{}: {}", context(i), e.what()));
    }
  });

  state.evaluations += pending.size();
  for (std::size_t i : pending) state.cache.emplace(keys[i], fitness[i]);
  for (std::size_t i = 0; i < batch.size(); ++i)
    if (source[i] >= 0) fitness[i] = fitness[static_cast<std::size_t>(source[i])];
  return fitness;
}

}  // namespace

void EvolutionSearch::initialize() {
  state_ = SearchState{};
  std::vector<CoefficientVector> batch;
  for (double rate : cfg_.init_rates) {
    const CoefficientVector ema = ema_coefficients(set_.size(), EmaConfig{rate, EmaForm::kPractice});
    batch.push_back(from_full(ema.values, cfg_.formulation));
  }
  const auto fitness = evaluate_batch(
      state_, batch, cfg_.parallelism, [this](const CoefficientVector& c) { return evaluate(c); },
      [this](std::size_t i) { return fmt::format("initial individual for EMA rate {}", cfg_.init_rates[i]); });
  for (std::size_t i = 0; i < batch.size(); ++i)
    state_.population.push_back(Individual{std::move(batch[i]), fitness[i], state_.next_birth++});
}

std::vector<Individual> EvolutionSearch::parent_pool() const {
  std::vector<Individual> pool = state_.population;
  const std::size_t size = std::min<std::size_t>(cfg_.parent_pool, pool.size());
  std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(size), pool.end(), better);
  pool.resize(size);
  return pool;
}

CoefficientVector EvolutionSearch::breed(const std::vector<Individual>& parents, std::uint64_t index) const {
  Rng rng = offspring_rng(cfg_.seed, state_.epochs_done, index);
  std::uniform_int_distribution<std::size_t> pick(0, parents.size() - 1);
  for (int attempt = 0; attempt < kMaxOffspringAttempts; ++attempt) {
    const auto& mother = parents[pick(rng)].coeffs;
    const auto& father = parents[pick(rng)].coeffs;
    auto child = crossover(mother, father, cfg_.whole_parent_prob, rng);
    if (!child) continue;
    if (auto mutated = mutate(*child, cfg_.mutation_sigma, cfg_.clip_above_one, rng)) return *std::move(mutated);
  }
  throw ConfigError(fmt::format("epoch {}, offspring {}: no valid individual after {} attempts", state_.epochs_done,
                                index, kMaxOffspringAttempts));
}

double EvolutionSearch::run_epoch() {
  if (state_.population.empty()) throw ConfigError("run_epoch called before initialize");
  const std::vector<Individual> parents = parent_pool();

  std::vector<CoefficientVector> batch;
  batch.reserve(cfg_.offspring_per_epoch);
  for (std::uint32_t i = 0; i < cfg_.offspring_per_epoch; ++i) batch.push_back(breed(parents, i));

  const std::uint32_t epoch = state_.epochs_done;
  const auto fitness = evaluate_batch(
      state_, batch, cfg_.parallelism, [this](const CoefficientVector& c) { return evaluate(c); },
      [&](std::size_t i) {
        return fmt::format("epoch {}, offspring {}, coefficients [{}]", epoch, i, fmt::join(batch[i].values, ", "));
      });

  for (std::size_t i = 0; i < batch.size(); ++i)
    state_.population.push_back(Individual{std::move(batch[i]), fitness[i], state_.next_birth++});
  ++state_.epochs_done;
  return best().fitness;
}

const Individual& EvolutionSearch::best() const {
  if (state_.population.empty()) throw ConfigError("population is empty");
  return *std::min_element(state_.population.begin(), state_.population.end(), better);
}

SearchResult EvolutionSearch::run() {
  const auto start = std::chrono::steady_clock::now();
  initialize();
  SearchResult result;
  for (const auto& ind : state_.population) result.initial_fitness.push_back(ind.fitness);
  for (std::uint32_t e = 0; e < cfg_.epochs; ++e) result.history.push_back(run_epoch());
  result.best = best();
  result.evaluations = state_.evaluations;
  result.cache_hits = state_.cache_hits;
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

SearchResult run_search(const CheckpointSet& set, const SearchConfig& cfg, const Evaluator& evaluator) {
  return EvolutionSearch(set, cfg, evaluator).run();
}

json coefficients_to_json(const SearchResult& result, const CheckpointSet& set, const SearchConfig& cfg) {
  return json{{"format_version", kFormatVersion},
              {"formulation", formulation_name(result.best.coeffs.formulation)},
              {"iterations", set.iterations()},
              {"values", result.best.coeffs.values},
              {"coefficients", result.best.coeffs.expanded()},
              {"fitness", result.best.fitness},
              {"seed", cfg.seed}};
}

CoefficientVector coefficients_from_json(const json& j) {
  try {
    if (j.contains("values")) {
      const auto f = j.contains("formulation") ? parse_formulation(j.at("formulation").get<std::string>())
                                               : Formulation::kDifference;
      return CoefficientVector{f, j.at("values").get<std::vector<double>>(), 1.0};
    }
    if (j.contains("coefficients")) return make_direct(j.at("coefficients").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("coefficients document: {}", e.what()));
  }
  throw ConfigError("coefficients document needs \"values\" (with \"formulation\") or \"coefficients\"");
}

json report_to_json(const SearchResult& result, const CheckpointSet& set, const SearchConfig& cfg) {
  return json{{"format_version", kFormatVersion},
              {"search", to_json(cfg)},
              {"iterations", set.iterations()},
              {"initial_fitness", result.initial_fitness},
              {"history", result.history},
              {"best",
               {{"fitness", result.best.fitness},
                {"birth_index", result.best.birth_index},
                {"formulation", formulation_name(result.best.coeffs.formulation)},
                {"values", result.best.coeffs.values},
                {"coefficients", result.best.coeffs.expanded()}}},
              {"evaluations", result.evaluations},
              {"cache_hits", result.cache_hits},
              {"wall_seconds", result.wall_seconds}};
}

}  // namespace lcsc
