// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0
//
// TensorMap: the flattened weight state of one checkpoint. Entries are kept
// in lexicographic name order, which is the canonical order for arithmetic,
// hashing and serialization.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lcsc {

enum class Dtype { kF32, kF16 };

std::string_view dtype_name(Dtype dtype) noexcept;  // "F32" / "F16"
std::optional<Dtype> parse_dtype(std::string_view name) noexcept;
std::size_t dtype_size(Dtype dtype) noexcept;

using Shape = std::vector<std::int64_t>;

/// Number of elements described by `shape`; throws ConfigError on negative
/// dimensions or overflow.
std::size_t shape_numel(const Shape& shape);

/// Dense row-major tensor. `dtype` records the storage precision; values are
/// always held as f32 in memory.
struct Tensor {
  Dtype dtype = Dtype::kF32;
  Shape shape;
  std::vector<float> data;

  std::size_t numel() const noexcept { return data.size(); }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct TensorSpec {
  std::string name;
  Dtype dtype = Dtype::kF32;
  Shape shape;
  friend bool operator==(const TensorSpec&, const TensorSpec&) = default;
};

using Schema = std::vector<TensorSpec>;

/// Name of the first tensor where `a` and `b` disagree (missing, extra,
/// dtype or shape), or nullopt when identical.
std::optional<std::string> first_schema_difference(const Schema& a, const Schema& b);

class TensorMap {
 public:
  using Storage = std::map<std::string, Tensor, std::less<>>;
  using const_iterator = Storage::const_iterator;

  TensorMap() = default;

  /// Adds an entry. Rejects empty or duplicate names and data whose length
  /// disagrees with the shape.
  void insert(std::string name, Tensor tensor);

  /// Convenience for f32 tensors.
  void insert(std::string name, Shape shape, std::vector<float> data);

  bool contains(std::string_view name) const { return entries_.find(name) != entries_.end(); }
  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::size_t total_elements() const noexcept;

  const_iterator begin() const noexcept { return entries_.begin(); }
  const_iterator end() const noexcept { return entries_.end(); }

  Schema schema() const;

  /// Copy with identical schema and all values zero.
  TensorMap zeros_like() const;

  friend bool operator==(const TensorMap&, const TensorMap&) = default;

 private:
  Storage entries_;
};

}  // namespace lcsc
