// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Metric landscape over the plane theta(x, y) = theta0 + x (theta1 - theta0)
// + y (theta2 - theta0).

#pragma once

#include <cstddef>
#include <ostream>
#include <vector>

#include "lcsc/checkpoint_store.hpp"

namespace lcsc {

class Evaluator;

struct GridAxis {
  double min = 0.0;
  double max = 1.0;
  std::size_t steps = 2;

  double at(std::size_t i) const noexcept {
    return min + (max - min) * static_cast<double>(i) / static_cast<double>(steps - 1);
  }
};

struct GridSpec {
  GridAxis x;
  GridAxis y;
};

void validate(const GridSpec& grid);

struct LandscapeRow {
  double x = 0.0;
  double y = 0.0;
  double metric = 0.0;
};

TensorMap plane_point(const TensorMap& theta0, const TensorMap& theta1, const TensorMap& theta2, double x, double y);

/// Evaluates every grid point, y outer and x inner. Points may be evaluated
/// concurrently; the returned order is always row-major.
std::vector<LandscapeRow> sweep(const Checkpoint& c0, const Checkpoint& c1, const Checkpoint& c2, const GridSpec& grid,
                                const Evaluator& evaluator, std::size_t parallelism = 1);

/// CSV with header "x,y,metric"; numbers use shortest round-trip form.
void write_csv(std::ostream& out, const std::vector<LandscapeRow>& rows);

}  // namespace lcsc
