// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "lcsc/merge.hpp"

#include <cmath>
#include <cstring>
#include <exception>
#include <numeric>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "lcsc/error.hpp"
#include "lcsc/evaluator.hpp"

namespace lcsc {

namespace {

using MatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_finite(std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i])) throw ConfigError(fmt::format("coefficient {} is not finite ({})", i, values[i]));
}

void require_arity(const CoefficientVector& coeffs, std::size_t k) {
  if (coeffs.checkpoint_count() != k)
    throw ConfigError(fmt::format("{} formulation with {} values does not fit {} checkpoints",
                                  formulation_name(coeffs.formulation), coeffs.values.size(), k));
}

std::vector<float> to_float(const std::vector<double>& acc) {
  std::vector<float> out(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i]);
  return out;
}

Eigen::Map<const MatrixF> as_matrix(const Tensor& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.shape.at(0)), static_cast<Eigen::Index>(t.shape.at(1))};
}

}  // namespace

std::string_view formulation_name(Formulation f) noexcept {
  return f == Formulation::kDirect ? "direct" : "difference";
}

Formulation parse_formulation(std::string_view name) {
  if (name == "difference") return Formulation::kDifference;
  if (name == "direct") return Formulation::kDirect;
  throw ConfigError(fmt::format("unknown formulation '{}' (expected difference or direct)", name));
}

std::vector<double> CoefficientVector::expanded() const {
  if (formulation == Formulation::kDirect) return values;
  std::vector<double> full;
  full.reserve(values.size() + 1);
  full.push_back(1.0 - std::accumulate(values.begin(), values.end(), 0.0));
  full.insert(full.end(), values.begin(), values.end());
  return full;
}

bool CoefficientVector::normalize() {
  if (formulation != Formulation::kDirect) return true;
  const double sum = std::accumulate(values.begin(), values.end(), 0.0);
  if (!std::isfinite(sum) || std::abs(sum) < kMinDirectSum) return false;
  for (auto& v : values) v /= sum;
  normalizer = sum;
  return true;
}

std::string CoefficientVector::canonical_key() const {
  std::string key(1 + values.size() * sizeof(double), '\0');
  key[0] = formulation == Formulation::kDirect ? 'D' : 'd';
  if (!values.empty()) std::memcpy(key.data() + 1, values.data(), values.size() * sizeof(double));
  return key;
}

CoefficientVector make_direct(std::vector<double> values) {
  return CoefficientVector{Formulation::kDirect, std::move(values), 1.0};
}

CoefficientVector make_difference(std::vector<double> values) {
  return CoefficientVector{Formulation::kDifference, std::move(values), 1.0};
}

CoefficientVector from_full(std::span<const double> full, Formulation target) {
  if (full.empty()) throw ConfigError("coefficient vector must not be empty");
  if (target == Formulation::kDirect) return make_direct({full.begin(), full.end()});
  return make_difference({full.begin() + 1, full.end()});
}

TensorMap weighted_sum(std::span<const TensorMap* const> maps, std::span<const double> weights) {
  if (maps.empty() || maps.size() != weights.size())
    throw ConfigError(fmt::format("weighted_sum needs one weight per map ({} maps, {} weights)", maps.size(), weights.size()));
  TensorMap out;
  std::vector<double> acc;
  for (const auto& [name, first] : *maps.front()) {
    acc.assign(first.numel(), 0.0);
    for (std::size_t i = 0; i < maps.size(); ++i) {
      const auto& src = maps[i]->at(name).data;
      const double w = weights[i];
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += w * static_cast<double>(src[j]);
    }
    out.insert(name, Tensor{first.dtype, first.shape, to_float(acc)});
  }
  return out;
}

TensorMap combine(const CheckpointSet& set, const CoefficientVector& coeffs) {
  require_arity(coeffs, set.size());
  require_finite(coeffs.values);

  if (coeffs.formulation == Formulation::kDirect) {
    std::vector<const TensorMap*> maps;
    maps.reserve(set.size());
    for (const auto& c : set) maps.push_back(&c.weights);
    return weighted_sum(maps, coeffs.values);
  }

  // theta_1 + sum_i w_i (theta_i - theta_1)
  TensorMap out;
  std::vector<double> acc;
  for (const auto& [name, base] : set.front().weights) {
    acc.assign(base.data.begin(), base.data.end());
    for (std::size_t i = 1; i < set.size(); ++i) {
      const auto& src = set[i].weights.at(name).data;
      const double w = coeffs.values[i - 1];
      for (std::size_t j = 0; j < acc.size(); ++j)
        acc[j] += w * (static_cast<double>(src[j]) - static_cast<double>(base.data[j]));
    }
    out.insert(name, Tensor{base.dtype, base.shape, to_float(acc)});
  }
  return out;
}

std::string_view ema_form_name(EmaForm f) noexcept {
  return f == EmaForm::kTheory ? "theory" : "practice";
}

EmaForm parse_ema_form(std::string_view name) {
  if (name == "practice") return EmaForm::kPractice;
  if (name == "theory") return EmaForm::kTheory;
  throw ConfigError(fmt::format("unknown EMA form '{}' (expected practice or theory)", name));
}

void validate(const EmaConfig& cfg) {
  if (!(cfg.rate > 0.0 && cfg.rate < 1.0)) throw ConfigError(fmt::format("EMA rate {} must lie in (0, 1)", cfg.rate));
}

TensorMap ema_recurrence(const CheckpointSet& set, const EmaConfig& cfg) {
  validate(cfg);
  const double r = cfg.rate;
  TensorMap out;
  std::vector<double> acc;
  for (const auto& [name, first] : set.front().weights) {
    if (cfg.form == EmaForm::kPractice) {
      acc.assign(first.data.begin(), first.data.end());
      for (std::size_t i = 1; i < set.size(); ++i) {
        const auto& src = set[i].weights.at(name).data;
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] = r * acc[j] + (1.0 - r) * static_cast<double>(src[j]);
      }
    } else {
      // running sum of r^(K-n) theta_n and of the weights
      acc.assign(first.numel(), 0.0);
      double norm = 0.0;
      for (const auto& c : set) {
        const auto& src = c.weights.at(name).data;
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] = r * acc[j] + static_cast<double>(src[j]);
        norm = r * norm + 1.0;
      }
      for (auto& v : acc) v /= norm;
    }
    out.insert(name, Tensor{first.dtype, first.shape, to_float(acc)});
  }
  return out;
}

CoefficientVector ema_coefficients(std::size_t k, const EmaConfig& cfg) {
  validate(cfg);
  if (k == 0) throw ConfigError("EMA coefficients need at least one checkpoint");
  const double r = cfg.rate;
  std::vector<double> values(k);
  if (cfg.form == EmaForm::kPractice) {
    values[0] = std::pow(r, static_cast<double>(k - 1));
    for (std::size_t n = 1; n < k; ++n) values[n] = (1.0 - r) * std::pow(r, static_cast<double>(k - 1 - n));
    return make_direct(std::move(values));
  }
  double norm = 0.0;
  for (std::size_t n = 0; n < k; ++n) {
    values[n] = std::pow(r, static_cast<double>(k - 1 - n));
    norm += values[n];
  }
  for (auto& v : values) v /= norm;
  CoefficientVector c = make_direct(std::move(values));
  c.normalizer = norm;
  return c;
}

EmaGridResult ema_grid(const CheckpointSet& set, std::span<const double> rates, const Evaluator& evaluator,
                       EmaForm form) {
  if (rates.empty()) throw ConfigError("EMA grid needs at least one rate");
  for (double r : rates) validate(EmaConfig{r, form});

  EmaGridResult result;
  for (double r : rates) {
    double fitness = 0.0;
    try {
      fitness = evaluator.evaluate(ema_recurrence(set, EmaConfig{r, form}));
    } catch (const std::exception& e) {
      throw EvaluatorError(fmt::format("EMA rate {}: {}", r, e.what()));
    }
    if (!std::isfinite(fitness)) throw EvaluatorError(fmt::format("EMA rate {}: non-finite fitness {}", r, fitness));
    result.points.push_back({r, fitness});
  }
  const auto* best = &result.points.front();
  for (const auto& p : result.points)
    if (p.fitness < best->fitness || (p.fitness == best->fitness && p.rate < best->rate)) best = &p;
  result.best_rate = best->rate;
  result.best_fitness = best->fitness;
  return result;
}

TensorMap densify(const LoraCheckpoint& checkpoint) {
  TensorMap out;
  for (const auto& [target, pair] : checkpoint.pairs) {
    if (pair.b.shape.size() != 2 || pair.a.shape.size() != 2 || pair.rank() != pair.a.shape[0])
      throw ConfigError(fmt::format("LoRA target '{}': rank mismatch", target));
    MatrixD product = as_matrix(pair.b).cast<double>() * as_matrix(pair.a).cast<double>();
    std::vector<float> data(static_cast<std::size_t>(product.size()));
    Eigen::Map<MatrixF>(data.data(), product.rows(), product.cols()) = product.cast<float>();
    out.insert(target, Tensor{Dtype::kF32, {pair.rows(), pair.cols()}, std::move(data)});
  }
  return out;
}

TensorMap combine_lora(std::span<const LoraCheckpoint> set, const CoefficientVector& coeffs) {
  validate_lora_set(set);
  require_arity(coeffs, set.size());
  require_finite(coeffs.values);
  const std::vector<double> alpha = coeffs.expanded();

  // sum_i alpha_i B_i A_i == [alpha_1 B_1 | ... | alpha_K B_K] * [A_1; ...; A_K]
  TensorMap out;
  for (const auto& [target, ref] : set.front().pairs) {
    const Eigen::Index rows = ref.rows();
    const Eigen::Index rank = ref.rank();
    const Eigen::Index cols = ref.cols();
    const auto k = static_cast<Eigen::Index>(set.size());
    MatrixD left(rows, rank * k);
    MatrixD right(rank * k, cols);
    for (Eigen::Index i = 0; i < k; ++i) {
      const auto& pair = set[static_cast<std::size_t>(i)].pairs.find(target)->second;
      left.middleCols(i * rank, rank) = alpha[static_cast<std::size_t>(i)] * as_matrix(pair.b).cast<double>();
      right.middleRows(i * rank, rank) = as_matrix(pair.a).cast<double>();
    }
    const MatrixD delta = left * right;
    std::vector<float> data(static_cast<std::size_t>(delta.size()));
    Eigen::Map<MatrixF>(data.data(), rows, cols) = delta.cast<float>();
    out.insert(target, Tensor{Dtype::kF32, {rows, cols}, std::move(data)});
  }
  return out;
}

}  // namespace lcsc
