// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "lcsc/landscape.hpp"

#include <cmath>
#include <exception>

#include <fmt/format.h>

#include "lcsc/error.hpp"
#include "lcsc/evaluator.hpp"
#include "lcsc/parallel.hpp"

namespace lcsc {

void validate(const GridSpec& grid) {
  for (const auto* axis : {&grid.x, &grid.y}) {
    const char* name = axis == &grid.x ? "x" : "y";
    if (axis->steps < 2) throw ConfigError(fmt::format("grid {} axis needs at least 2 steps", name));
    if (!(axis->min < axis->max) || !std::isfinite(axis->min) || !std::isfinite(axis->max))
      throw ConfigError(fmt::format("grid {} axis needs finite min < max", name));
  }
}

TensorMap plane_point(const TensorMap& theta0, const TensorMap& theta1, const TensorMap& theta2, double x, double y) {
  TensorMap out;
  for (const auto& [name, t0] : theta0) {
    const auto& d1 = theta1.at(name).data;
    const auto& d2 = theta2.at(name).data;
    std::vector<float> data(t0.numel());
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double base = t0.data[j];
      data[j] = static_cast<float>(base + x * (static_cast<double>(d1[j]) - base) + y * (static_cast<double>(d2[j]) - base));
    }
    out.insert(name, Tensor{t0.dtype, t0.shape, std::move(data)});
  }
  return out;
}

std::vector<LandscapeRow> sweep(const Checkpoint& c0, const Checkpoint& c1, const Checkpoint& c2, const GridSpec& grid,
                                const Evaluator& evaluator, std::size_t parallelism) {
  validate(grid);
  const Schema schema = c0.weights.schema();
  for (const auto* c : {&c1, &c2})
    if (auto diff = first_schema_difference(schema, c->weights.schema()))
      throw ConfigError(fmt::format("landscape checkpoints disagree on tensor '{}'", *diff));

  std::vector<LandscapeRow> rows(grid.x.steps * grid.y.steps);
  for (std::size_t iy = 0; iy < grid.y.steps; ++iy)
    for (std::size_t ix = 0; ix < grid.x.steps; ++ix)
      rows[iy * grid.x.steps + ix] = LandscapeRow{grid.x.at(ix), grid.y.at(iy), 0.0};

  parallel_for(rows.size(), parallelism, [&](std::size_t i) {
    auto& row = rows[i];
    try {
      row.metric = evaluator.evaluate(plane_point(c0.weights, c1.weights, c2.weights, row.x, row.y));
    } catch (const std::exception& e) {
      throw EvaluatorError(fmt::format("grid row {} (x={}, y={}): {}", i, row.x, row.y, e.what()));
    }
  });
  return rows;
}

void write_csv(std::ostream& out, const std::vector<LandscapeRow>& rows) {
  out << "x,y,metric\n";
  for (const auto& r : rows) out << fmt::format("{},{},{}\n", r.x, r.y, r.metric);
}

}  // namespace lcsc
