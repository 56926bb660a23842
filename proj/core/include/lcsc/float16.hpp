// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace lcsc {

// IEEE 754 binary16 <-> binary32. Widening is exact; narrowing rounds to
// nearest-even and preserves NaN payload bits that fit.
float half_to_float(std::uint16_t h) noexcept;
std::uint16_t float_to_half(float f) noexcept;

}  // namespace lcsc
