// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Linear combinations of checkpoints. Every weighted sum accumulates in f64
// and is rounded to f32 once at the end.

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "lcsc/checkpoint_store.hpp"
#include "lcsc/tensor_map.hpp"

namespace lcsc {

class Evaluator;

/// kDifference stores K-1 weights for the differences theta_i - theta_1
/// (i = 2..K); the coefficient on theta_1 is implied. kDirect stores all K
/// coefficients and is kept normalized to sum to one.
enum class Formulation { kDifference, kDirect };

std::string_view formulation_name(Formulation f) noexcept;
Formulation parse_formulation(std::string_view name);

/// Direct-formulation sums smaller than this in magnitude cannot be
/// renormalized; such a vector is an invalid individual.
inline constexpr double kMinDirectSum = 1e-6;

struct CoefficientVector {
  Formulation formulation = Formulation::kDifference;
  std::vector<double> values;
  double normalizer = 1.0;  // sum divided out by the last normalize()

  /// Number of checkpoints these coefficients apply to.
  std::size_t checkpoint_count() const noexcept {
    return formulation == Formulation::kDirect ? values.size() : values.size() + 1;
  }

  /// Full K-length coefficients, including the implied first one for the
  /// difference formulation. Always sums to one (within rounding).
  std::vector<double> expanded() const;

  /// Direct formulation only: divides by the sum. Returns false, leaving the
  /// values untouched, when |sum| < kMinDirectSum or the sum is not finite.
  bool normalize();

  /// Exact bytes of (formulation, values); the fitness cache key.
  std::string canonical_key() const;

  friend bool operator==(const CoefficientVector& a, const CoefficientVector& b) {
    return a.formulation == b.formulation && a.values == b.values;
  }
};

CoefficientVector make_direct(std::vector<double> values);
CoefficientVector make_difference(std::vector<double> values);

/// Re-expresses full K-length coefficients (summing to one) in `target`.
CoefficientVector from_full(std::span<const double> full, Formulation target);

/// Weighted sum of equally-shaped tensor maps, f64 accumulation. The output
/// keeps the dtype tags of `maps.front()`.
TensorMap weighted_sum(std::span<const TensorMap* const> maps, std::span<const double> weights);

/// Direct: sum_i a_i theta_i. Difference: theta_1 + sum_{i>=2} w_i (theta_i - theta_1).
TensorMap combine(const CheckpointSet& set, const CoefficientVector& coeffs);

/// kPractice folds the recurrence ema <- rate * ema + (1 - rate) * theta,
/// starting from the first checkpoint. kTheory weights theta_n by
/// rate^(K-n) and divides by the weight sum.
enum class EmaForm { kPractice, kTheory };

std::string_view ema_form_name(EmaForm f) noexcept;
EmaForm parse_ema_form(std::string_view name);

struct EmaConfig {
  double rate = 0.999;
  EmaForm form = EmaForm::kPractice;
};

void validate(const EmaConfig& cfg);

TensorMap ema_recurrence(const CheckpointSet& set, const EmaConfig& cfg);

/// Direct-formulation coefficients equivalent to ema_recurrence on K
/// checkpoints. Practice: [r^(K-1), (1-r) r^(K-2), ..., (1-r)].
CoefficientVector ema_coefficients(std::size_t k, const EmaConfig& cfg);

struct EmaGridPoint {
  double rate = 0.0;
  double fitness = 0.0;
};

struct EmaGridResult {
  double best_rate = 0.0;
  double best_fitness = 0.0;
  std::vector<EmaGridPoint> points;  // in input order
};

/// Evaluates the EMA of `set` at each rate; ties go to the smaller rate.
/// Evaluator failures are rethrown as EvaluatorError naming the rate.
EmaGridResult ema_grid(const CheckpointSet& set, std::span<const double> rates, const Evaluator& evaluator,
                       EmaForm form = EmaForm::kPractice);

/// Dense products B_i A_i for every target of one LoRA checkpoint.
TensorMap densify(const LoraCheckpoint& checkpoint);

/// For each target, sum_i alpha_i B_i A_i as one dense f32 matrix. Difference
/// coefficients are expanded and applied to the products.
TensorMap combine_lora(std::span<const LoraCheckpoint> set, const CoefficientVector& coeffs);

}  // namespace lcsc
