// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Each criterion prints one line:
//   PASS|FAIL  <name>  <seconds>s / <limit>s  <details>
// and the process exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include <lcsc/checkpoint_store.hpp>
#include <lcsc/error.hpp>
#include <lcsc/evaluator.hpp>
#include <lcsc/evo_search.hpp>
#include <lcsc/landscape.hpp>
#include <lcsc/merge.hpp>
#include <lcsc/sgd_sim.hpp>

#include "test_support.hpp"

using namespace lcsc;

namespace {

struct Outcome {
  bool pass = false;
  std::string details;
};

int g_failures = 0;

void criterion(const std::string& name, double limit_seconds, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, fmt::format("exception: {}", e.what())};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs > limit_seconds) {
    o.pass = false;
    o.details += fmt::format("; runtime over limit");
  }
  if (!o.pass) ++g_failures;
  fmt::print("{}  {:<26} {:7.2f}s / {:>4.0f}s  {}\n", o.pass ? "PASS" : "FAIL", name, secs, limit_seconds, o.details);
  std::fflush(stdout);
}

double max_rel_diff(const TensorMap& a, const TensorMap& b) {
  double worst = 0.0;
  for (const auto& [name, t] : a)
    for (std::size_t j = 0; j < t.data.size(); ++j) {
      const double x = t.data[j], y = b.at(name).data[j];
      worst = std::max(worst, std::abs(x - y) / std::max(1.0, std::abs(y)));
    }
  return worst;
}

double max_abs_diff(const TensorMap& a, const TensorMap& b) {
  double worst = 0.0;
  for (const auto& [name, t] : a)
    for (std::size_t j = 0; j < t.data.size(); ++j) worst = std::max(worst, std::abs(double(t.data[j]) - b.at(name).data[j]));
  return worst;
}

SimConfig reference_sim() {
  SimConfig cfg;
  cfg.dim = 10;
  cfg.beta = 1.0;
  cfg.noise_bound = 5.0;
  cfg.iters = 10000;
  cfg.seeds = 100;
  cfg.checkpoint_every = 100;
  return cfg;
}

Outcome ema_equivalence() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (std::size_t k : {1u, 3u, 10u, 400u}) {
    const CheckpointSet set = lcsc::testing::random_set(rng, k, 4, 6);
    for (double rate : {0.5, 0.9, 0.99, 0.999}) {
      const EmaConfig cfg{rate, EmaForm::kPractice};
      worst = std::max(worst, max_rel_diff(combine(set, ema_coefficients(k, cfg)), ema_recurrence(set, cfg)));
    }
  }
  return {worst <= 1e-6, fmt::format("max relative difference {:.3g} (tol 1e-6), K in {{1,3,10,400}}", worst)};
}

Outcome last_iterate_bound_check() {
  const BoundCheck c = theorem1_check(reference_sim());
  return {c.holds, fmt::format("gap {:.4g} <= bound {:.4g}", c.gap, c.bound)};
}

Outcome ema_bound_check() {
  const double rates[] = {0.9, 0.99, 0.999};
  const TrajectoryStats s = trajectory_stats(reference_sim(), rates);
  bool pass = true;
  std::string details;
  for (double r : rates) {
    const bool holds = s.ema_gaps.at(r) <= s.bound_ema.at(r);
    pass &= holds;
    details += fmt::format("rate {}: gap {:.4g} <= bound {:.4g} {}; ", r, s.ema_gaps.at(r), s.bound_ema.at(r), holds ? "ok" : "VIOLATED");
  }
  const bool faster = s.ema_gaps.at(0.999) < s.last_iter_gap;
  pass &= faster;
  details += fmt::format("EMA(0.999) gap {:.4g} {} last-iterate gap {:.4g}", s.ema_gaps.at(0.999), faster ? "<" : "NOT <",
                         s.last_iter_gap);
  return {pass, details};
}

Outcome mixture_non_membership() {
  Theorem3Config cfg;
  cfg.checkpoints = 10;
  cfg.dim = 50;
  cfg.rate = 0.99;
  cfg.trials = 100;
  cfg.grid_points = 10000;
  const Theorem3Result r = theorem3_check(cfg);
  const bool ok = r.min_distance > 1e-3;
  return {ok, fmt::format("min relative distance {:.4g} {}> 1e-3 over {} trials ({} redraws)", r.min_distance, ok ? "" : "NOT ",
              cfg.trials, r.redraws)};
}

Outcome search_optimality() {
  // (a) scalar fixture, default budget
  const CheckpointSet scalar = lcsc::testing::scalar_set({0.0f, 0.5f, 2.0f});
  const QuadraticEvaluator unit(lcsc::testing::scalar_map(1.0f), 2.0);
  const SearchResult a = run_search(scalar, SearchConfig{}, unit);
  const bool pass_a = a.best.fitness <= 1e-4;

  // (b) recorded trajectories against single checkpoints and the EMA grid.
  // The first recorded checkpoint is the random start, far from every later
  // iterate, so differences against it are badly scaled; the direct form is
  // the primary run and the difference form is reported alongside.
  SimConfig sim = reference_sim();
  const int seeds = 100;
  int no_worse = 0, strictly = 0, diff_strictly = 0;
  for (int s = 0; s < seeds; ++s) {
    const CheckpointSet set = run_trajectory(sim, static_cast<std::uint64_t>(s));
    const auto eval = QuadraticEvaluator::centered(set.schema(), sim.beta);
    double baseline = INFINITY;
    for (const auto& c : set) baseline = std::min(baseline, eval.evaluate(c.weights));
    SearchConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(s);
    baseline = std::min(baseline, ema_grid(set, cfg.init_rates, eval).best_fitness);
    cfg.formulation = Formulation::kDirect;
    const SearchResult r = run_search(set, cfg, eval);
    no_worse += r.best.fitness <= baseline;
    strictly += r.best.fitness < baseline;
    cfg.formulation = Formulation::kDifference;
    diff_strictly += run_search(set, cfg, eval).best.fitness < baseline;
  }
  const bool pass_b = no_worse == seeds && strictly >= 90;
  return {pass_a && pass_b,
          fmt::format("(a) best {:.3g} <= 1e-4; (b) direct form no worse in {}/{} seeds, strictly better in {}/{} (need 90); "
                      "difference form strictly better in {}/{}",
                      a.best.fitness, no_worse, seeds, strictly, seeds, diff_strictly, seeds)};
}

Outcome outside_hull() {
  const CheckpointSet set = lcsc::testing::scalar_set({0.0f, 0.5f});
  const QuadraticEvaluator eval(lcsc::testing::scalar_map(2.0f), 2.0);
  SearchConfig cfg;
  cfg.mutation_sigma = 0.1;
  cfg.epochs = 100;
  const SearchResult r = run_search(set, cfg, eval);
  const auto full = r.best.coeffs.expanded();
  const bool pass = r.best.fitness <= 1e-3 && full[0] < 0.0;
  return {pass, fmt::format("best fitness {:.3g} <= 1e-3 at coefficients [{:.4f}, {:.4f}]", r.best.fitness, full[0], full[1])};
}

Outcome landscape_consistency() {
  std::mt19937_64 rng(107);
  const CheckpointSet set = lcsc::testing::random_set(rng, 3, 4, 6);
  const auto& t0 = set[0].weights;
  const auto& t1 = set[1].weights;
  const auto& t2 = set[2].weights;
  const bool basis = plane_point(t0, t1, t2, 0, 0) == t0 && plane_point(t0, t1, t2, 1, 0) == t1 && plane_point(t0, t1, t2, 0, 1) == t2;

  const GridSpec grid{{-0.5, 1.5, 21}, {-0.5, 1.5, 21}};
  const auto eval = QuadraticEvaluator::centered(set.schema(), 1.0);
  const auto rows = sweep(set[0], set[1], set[2], grid, eval);
  double worst_weights = 0.0, worst_metric = 0.0;
  for (const auto& row : rows) {
    const TensorMap c = combine(set, make_direct({1.0 - row.x - row.y, row.x, row.y}));
    worst_weights = std::max(worst_weights, max_abs_diff(plane_point(t0, t1, t2, row.x, row.y), c));
    const double fc = eval.evaluate(c);
    worst_metric = std::max(worst_metric, std::abs(row.metric - fc) / std::max(1.0, std::abs(fc)));
  }
  const bool pass = basis && rows.size() == 441 && worst_weights <= 1e-6 && worst_metric <= 1e-6;
  return {pass, fmt::format("basis points {}; {} rows; max weight diff {:.3g}, max metric diff {:.3g} (tol 1e-6)",
                            basis ? "exact" : "NOT exact", rows.size(), worst_weights, worst_metric)};
}

Outcome monotone_and_deterministic() {
  std::mt19937_64 rng(108);
  const CheckpointSet set = lcsc::testing::random_set(rng, 8, 3, 5);
  TensorMap target = set[0].weights.zeros_like();
  std::normal_distribution<float> d(0.0f, 1.0f);
  for (const auto& [name, t] : set[0].weights)
    for (auto& v : target.at(name).data) v = d(rng);
  const QuadraticEvaluator eval(target, 1.0);

  bool monotone = true, identical = true;
  std::string reference;
  for (std::uint32_t parallelism : {1u, 8u, 1u, 8u}) {
    SearchConfig cfg;
    cfg.seed = 2024;
    cfg.parallelism = parallelism;
    const SearchResult r = run_search(set, cfg, eval);
    for (std::size_t i = 1; i < r.history.size(); ++i) monotone &= r.history[i] <= r.history[i - 1];
    const std::string bytes = coefficients_to_json(r, set, cfg).dump(2);
    if (reference.empty()) reference = bytes;
    identical &= bytes == reference;
  }
  return {monotone && identical, fmt::format("history non-increasing: {}; coefficient JSON identical across 4 runs "
                                             "(parallelism 1, 8, 1, 8): {}",
                                             monotone ? "yes" : "no", identical ? "yes" : "no")};
}

Outcome lora_parity() {
  std::mt19937_64 rng(109);
  std::normal_distribution<float> d(0.0f, 1.0f);
  auto random_matrix = [&](std::int64_t r, std::int64_t c) {
    Tensor t{Dtype::kF32, {r, c}, std::vector<float>(static_cast<std::size_t>(r * c))};
    for (auto& v : t.data) v = d(rng);
    return t;
  };
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<LoraCheckpoint> set;
    std::vector<Checkpoint> dense;
    for (std::uint64_t i = 0; i < 4; ++i) {
      LoraCheckpoint c{i + 1, {}};
      c.pairs.emplace("attn.q", LoraPair{random_matrix(8, 2), random_matrix(2, 8)});
      c.pairs.emplace("attn.v", LoraPair{random_matrix(8, 2), random_matrix(2, 8)});
      dense.push_back({i + 1, densify(c)});
      set.push_back(std::move(c));
    }
    const CheckpointSet dense_set(std::move(dense));
    std::vector<double> alpha(4);
    for (auto& a : alpha) a = d(rng);
    const double total = std::accumulate(alpha.begin(), alpha.end(), 0.0);
    for (auto& a : alpha) a /= total;
    for (const auto& coeffs : {make_direct(alpha), from_full(alpha, Formulation::kDifference)})
      worst = std::max(worst, max_rel_diff(combine_lora(set, coeffs), combine(dense_set, coeffs)));
  }
  return {worst <= 1e-6, fmt::format("max difference {:.3g} (tol 1e-6, relative above magnitude 1) over 50 K=4 rank-2 8x8 sets",
                                     worst)};
}

std::vector<std::uint8_t> with_header(const std::string& header, std::vector<std::uint8_t> data) {
  std::vector<std::uint8_t> out(8);
  const std::uint64_t h = header.size();
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(h >> (8 * i));
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), data.begin(), data.end());
  return out;
}

Outcome container_round_trip() {
  std::mt19937_64 rng(110);
  int exact = 0;
  std::vector<std::vector<std::uint8_t>> samples;
  for (int i = 0; i < 1000; ++i) {
    const TensorMap m = lcsc::testing::random_map(rng, static_cast<std::size_t>(i % 9), true, 6);
    const auto bytes = encode_container(m);
    const TensorMap back = decode_container(bytes);
    bool same = back.schema() == m.schema() && encode_container(back) == bytes;
    for (const auto& [name, t] : m)
      same = same && std::memcmp(back.at(name).data.data(), t.data.data(), t.data.size() * sizeof(float)) == 0;
    exact += same;
    if (i < 50 && !m.empty()) samples.push_back(bytes);
  }

  std::vector<std::vector<std::uint8_t>> malformed = {
      {},
      {1, 2, 3},
      std::vector<std::uint8_t>(8, 0xff),
      with_header("{nope", {}),
      with_header("[]", {}),
      with_header(R"({"w":{"data_offsets":[0,4],"dtype":"BF16","shape":[1]}})", {0, 0, 0, 0}),
      with_header(R"({"w":{"data_offsets":[0,4],"dtype":"F32","shape":[2]}})", {0, 0, 0, 0}),
      with_header(R"({"w":{"data_offsets":[0,4],"dtype":"F32","shape":[1]},"w":{"data_offsets":[0,4],"dtype":"F32","shape":[1]}})", {0, 0, 0, 0}),
      with_header(R"({"w":{"data_offsets":[4,8],"dtype":"F32","shape":[1]}})", std::vector<std::uint8_t>(8)),
      with_header(R"({"w":{"data_offsets":[0,4],"dtype":"F32","shape":[1]}})", std::vector<std::uint8_t>(8)),
      with_header(R"({"a":{"data_offsets":[4,8],"dtype":"F32","shape":[1]},"b":{"data_offsets":[0,4],"dtype":"F32","shape":[1]}})", std::vector<std::uint8_t>(8)),
      with_header(R"({"w":{"data_offsets":[0,4],"dtype":"F32","shape":[-1]}})", {0, 0, 0, 0}),
      with_header(R"({"w":{"data_offsets":[0],"dtype":"F32","shape":[1]}})", {0, 0, 0, 0}),
      with_header(R"({"w":{"dtype":"F32","shape":[1]}})", {0, 0, 0, 0}),
      with_header(R"({"w":{"data_offsets":[0,4],"dtype":"F32","shape":[1],"x":0}})", {0, 0, 0, 0}),
      with_header(R"({"w":{"data_offsets":[0,8],"dtype":"F32","shape":[2]}})", {0, 0, 0, 0}),
      with_header(R"({"w":{"data_offsets":[0,4],"dtype":"F32","shape":[4611686018427387904,4]}})", {0, 0, 0, 0}),
      with_header(R"({"w":[0,4]})", {0, 0, 0, 0}),
  };
  // Every proper truncation and every one-byte extension of real containers.
  for (const auto& s : samples) {
    for (std::size_t len = 0; len < s.size(); ++len) malformed.emplace_back(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(len));
    auto longer = s;
    longer.push_back(0);
    malformed.push_back(std::move(longer));
  }
  std::size_t rejected = 0;
  for (const auto& bytes : malformed) {
    try {
      (void)decode_container(bytes);
    } catch (const FormatError& e) {
      rejected += std::strlen(e.what()) > 0;
    }
  }
  const bool pass = exact == 1000 && rejected == malformed.size();
  return {pass, fmt::format("{}/1000 bit-exact round trips; {}/{} malformed inputs rejected with a diagnostic", exact, rejected,
                            malformed.size())};
}

}  // namespace

int main() {
  criterion("ema_equivalence", 5, ema_equivalence);
  criterion("last_iterate_bound", 30, last_iterate_bound_check);
  criterion("ema_bound_and_speedup", 60, ema_bound_check);
  criterion("ema_mixture_off_trajectory", 60, mixture_non_membership);
  criterion("search_optimality", 120, search_optimality);
  criterion("negative_coefficient", 10, outside_hull);
  criterion("landscape_consistency", 5, landscape_consistency);
  criterion("monotone_deterministic", 30, monotone_and_deterministic);
  criterion("lora_parity", 5, lora_parity);
  criterion("container_round_trip", 30, container_round_trip);
  fmt::print("{} of 10 criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
