// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint containers and manifests.
//
// Container layout (little-endian):
//   [0, 8)        u64 H, the header length in bytes
//   [8, 8 + H)    UTF-8 JSON object: name -> {"dtype", "shape", "data_offsets"}
//   [8 + H, end)  tensor payloads; offsets are relative to byte 8 + H and tile
//                 the region in lexicographic name order with no gaps.
//
// Manifest: {"kind": "dense"|"lora",
//            "checkpoints": [{"iteration": n, "path": "relative/or/absolute"}]}

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lcsc/tensor_map.hpp"

namespace lcsc {

struct Checkpoint {
  std::uint64_t iteration = 0;
  TensorMap weights;
};

/// Ordered checkpoints with strictly increasing iterations and one shared
/// schema. Construction validates; the object is immutable afterwards.
class CheckpointSet {
 public:
  explicit CheckpointSet(std::vector<Checkpoint> checkpoints);

  std::size_t size() const noexcept { return checkpoints_.size(); }
  const Checkpoint& operator[](std::size_t i) const { return checkpoints_[i]; }
  const Checkpoint& front() const { return checkpoints_.front(); }
  const Checkpoint& back() const { return checkpoints_.back(); }
  auto begin() const noexcept { return checkpoints_.begin(); }
  auto end() const noexcept { return checkpoints_.end(); }

  const Schema& schema() const noexcept { return schema_; }
  std::vector<std::uint64_t> iterations() const;

 private:
  std::vector<Checkpoint> checkpoints_;
  Schema schema_;
};

/// One low-rank adapter factor pair. The effective weight delta is B * A with
/// B of shape [d_out, r] and A of shape [r, d_in], both row-major.
struct LoraPair {
  Tensor b;
  Tensor a;

  std::int64_t rows() const { return b.shape.at(0); }
  std::int64_t rank() const { return b.shape.at(1); }
  std::int64_t cols() const { return a.shape.at(1); }
};

struct LoraCheckpoint {
  std::uint64_t iteration = 0;
  std::map<std::string, LoraPair, std::less<>> pairs;
};

// Tensor name suffixes that identify LoRA factors inside a container:
// "<target>.lora_A" and "<target>.lora_B".
inline constexpr std::string_view kLoraASuffix = ".lora_A";
inline constexpr std::string_view kLoraBSuffix = ".lora_B";

/// Free-form string pairs stored under the reserved "__metadata__" header
/// key. Loading ignores them; read_metadata exposes them.
using ContainerMetadata = std::map<std::string, std::string, std::less<>>;
inline constexpr std::string_view kMetadataKey = "__metadata__";

std::vector<std::uint8_t> encode_container(const TensorMap& tensors, const ContainerMetadata& metadata = {});
TensorMap decode_container(std::span<const std::uint8_t> bytes);
ContainerMetadata decode_metadata(std::span<const std::uint8_t> bytes);

Checkpoint load_checkpoint(const std::filesystem::path& path, std::uint64_t iteration = 0);
void save_checkpoint(const std::filesystem::path& path, const TensorMap& tensors, const ContainerMetadata& metadata = {});
ContainerMetadata read_metadata(const std::filesystem::path& path);

enum class ManifestKind { kDense, kLora };

struct ManifestEntry {
  std::uint64_t iteration = 0;
  std::filesystem::path path;  // resolved against the manifest directory
};

struct Manifest {
  ManifestKind kind = ManifestKind::kDense;
  std::vector<ManifestEntry> checkpoints;
};

Manifest read_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const std::filesystem::path& manifest_path, const Manifest& manifest);

CheckpointSet load_set(const std::filesystem::path& manifest_path);

/// Checkpoints with iteration in (end_iter - window, end_iter] and
/// iteration == end_iter (mod interval), in input order.
CheckpointSet select_window(const CheckpointSet& set, std::uint64_t end_iter, std::uint64_t window,
                            std::uint64_t interval);

/// Splits a container's tensors into LoRA factor pairs and validates ranks.
LoraCheckpoint lora_from_tensors(const TensorMap& tensors, std::uint64_t iteration);
TensorMap lora_to_tensors(const LoraCheckpoint& checkpoint);

/// Loads a "lora" manifest and checks that every checkpoint shares target
/// names, ranks and shapes.
std::vector<LoraCheckpoint> load_lora_set(const std::filesystem::path& manifest_path);
void validate_lora_set(std::span<const LoraCheckpoint> set);

}  // namespace lcsc
