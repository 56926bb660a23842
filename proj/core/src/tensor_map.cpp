// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "lcsc/tensor_map.hpp"

#include <bit>
#include <cstring>
#include <limits>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "lcsc/error.hpp"
#include "lcsc/float16.hpp"

namespace lcsc {

float half_to_float(std::uint16_t h) noexcept {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000u) << 16;
  std::uint32_t exponent = (h >> 10) & 0x1fu;
  std::uint32_t mantissa = h & 0x3ffu;
  std::uint32_t bits;
  if (exponent == 0) {
    if (mantissa == 0) {
      bits = sign;
    } else {
      // subnormal: shift until the implicit bit appears
      exponent = 127 - 15 + 1;
      while ((mantissa & 0x400u) == 0) {
        mantissa <<= 1;
        --exponent;
      }
      mantissa &= 0x3ffu;
      bits = sign | (exponent << 23) | (mantissa << 13);
    }
  } else if (exponent == 0x1f) {
    bits = sign | 0x7f800000u | (mantissa << 13);
  } else {
    bits = sign | ((exponent + 127 - 15) << 23) | (mantissa << 13);
  }
  return std::bit_cast<float>(bits);
}

std::uint16_t float_to_half(float f) noexcept {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(f);
  const std::uint16_t sign = static_cast<std::uint16_t>((bits >> 16) & 0x8000u);
  const std::uint32_t exponent = (bits >> 23) & 0xffu;
  std::uint32_t mantissa = bits & 0x7fffffu;

  if (exponent == 0xff) {
    if (mantissa == 0) return sign | 0x7c00u;
    std::uint16_t payload = static_cast<std::uint16_t>(mantissa >> 13);
    return sign | 0x7c00u | (payload == 0 ? 0x200u : payload);
  }

  const int unbiased = static_cast<int>(exponent) - 127;
  if (unbiased > 15) return sign | 0x7c00u;

  if (unbiased >= -14) {
    std::uint32_t half = (static_cast<std::uint32_t>(unbiased + 15) << 10) | (mantissa >> 13);
    const std::uint32_t rest = mantissa & 0x1fffu;
    if (rest > 0x1000u || (rest == 0x1000u && (half & 1u))) ++half;  // may carry into inf
    return sign | static_cast<std::uint16_t>(half);
  }

  if (unbiased < -25) return sign;

  // subnormal half
  mantissa |= 0x800000u;
  const int shift = -unbiased - 14 + 13;
  std::uint32_t half = mantissa >> shift;
  const std::uint32_t rest = mantissa & ((1u << shift) - 1);
  const std::uint32_t halfway = 1u << (shift - 1);
  if (rest > halfway || (rest == halfway && (half & 1u))) ++half;
  return sign | static_cast<std::uint16_t>(half);
}

std::string_view dtype_name(Dtype dtype) noexcept {
  return dtype == Dtype::kF16 ? "F16" : "F32";
}

std::optional<Dtype> parse_dtype(std::string_view name) noexcept {
  if (name == "F32") return Dtype::kF32;
  if (name == "F16") return Dtype::kF16;
  return std::nullopt;
}

std::size_t dtype_size(Dtype dtype) noexcept {
  return dtype == Dtype::kF16 ? 2 : 4;
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ConfigError(fmt::format("negative dimension in shape [{}]", fmt::join(shape, ", ")));
    const auto ud = static_cast<std::size_t>(d);
    if (ud != 0 && n > std::numeric_limits<std::size_t>::max() / ud)
      throw ConfigError(fmt::format("shape [{}] overflows", fmt::join(shape, ", ")));
    n *= ud;
  }
  return n;
}

std::optional<std::string> first_schema_difference(const Schema& a, const Schema& b) {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i].name != b[i].name) return std::min(a[i].name, b[i].name);
    if (a[i] != b[i]) return a[i].name;
  }
  if (a.size() > n) return a[n].name;
  if (b.size() > n) return b[n].name;
  return std::nullopt;
}

void TensorMap::insert(std::string name, Tensor tensor) {
  if (name.empty()) throw ConfigError("tensor name must be non-empty");
  if (entries_.contains(name)) throw ConfigError(fmt::format("duplicate tensor name '{}'", name));
  const std::size_t expected = shape_numel(tensor.shape);
  if (expected != tensor.data.size())
    throw ConfigError(fmt::format("tensor '{}' has {} values but shape [{}] needs {}", name, tensor.data.size(),
                                  fmt::join(tensor.shape, ", "), expected));
  entries_.emplace(std::move(name), std::move(tensor));
}

void TensorMap::insert(std::string name, Shape shape, std::vector<float> data) {
  insert(std::move(name), Tensor{Dtype::kF32, std::move(shape), std::move(data)});
}

const Tensor& TensorMap::at(std::string_view name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError(fmt::format("no tensor named '{}'", name));
  return it->second;
}

Tensor& TensorMap::at(std::string_view name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError(fmt::format("no tensor named '{}'", name));
  return it->second;
}

std::size_t TensorMap::total_elements() const noexcept {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.numel();
  return n;
}

Schema TensorMap::schema() const {
  Schema schema;
  schema.reserve(entries_.size());
  for (const auto& [name, t] : entries_) schema.push_back({name, t.dtype, t.shape});
  return schema;
}

TensorMap TensorMap::zeros_like() const {
  TensorMap out;
  for (const auto& [name, t] : entries_)
    out.entries_.emplace(name, Tensor{t.dtype, t.shape, std::vector<float>(t.numel(), 0.0f)});
  return out;
}

}  // namespace lcsc
