// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0

#include "lcsc/checkpoint_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lcsc/error.hpp"
#include "lcsc/float16.hpp"

namespace lcsc {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

namespace {

using nlohmann::json;

std::uint64_t read_u64_le(std::span<const std::uint8_t> bytes) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[static_cast<std::size_t>(i)];
  return v;
}

void append_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xffu));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(fmt::format("failed reading '{}'", path.string()));
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot create '{}'", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

json parse_header(std::string_view text) {
  std::set<std::string> seen;
  // Duplicate keys would otherwise be silently collapsed by the parser.
  json::parser_callback_t on_event = [&seen](int depth, json::parse_event_t event, json& parsed) {
    if (depth == 1 && event == json::parse_event_t::key) {
      auto name = parsed.get<std::string>();
      if (!seen.insert(name).second) throw FormatError(fmt::format("duplicate tensor name '{}'", name));
    }
    return true;
  };
  try {
    return json::parse(text.begin(), text.end(), on_event);
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("malformed header JSON: {}", e.what()));
  }
}

Shape parse_shape(const std::string& name, const json& j) {
  if (!j.is_array()) throw FormatError(fmt::format("tensor '{}': shape must be an array", name));
  Shape shape;
  for (const auto& d : j) {
    if (!d.is_number_integer() || d.get<std::int64_t>() < 0)
      throw FormatError(fmt::format("tensor '{}': shape entries must be non-negative integers", name));
    shape.push_back(d.get<std::int64_t>());
  }
  return shape;
}

std::pair<std::uint64_t, std::uint64_t> parse_offsets(const std::string& name, const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_unsigned() || !j[1].is_number_unsigned())
    throw FormatError(fmt::format("tensor '{}': data_offsets must be [begin, end]", name));
  auto begin = j[0].get<std::uint64_t>();
  auto end = j[1].get<std::uint64_t>();
  if (end < begin) throw FormatError(fmt::format("tensor '{}': data_offsets end precedes begin", name));
  return {begin, end};
}

}  // namespace

std::vector<std::uint8_t> encode_container(const TensorMap& tensors, const ContainerMetadata& metadata) {
  json header = json::object();
  if (!metadata.empty()) header[std::string(kMetadataKey)] = metadata;
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    if (name == kMetadataKey) throw ConfigError(fmt::format("'{}' is reserved and cannot name a tensor", kMetadataKey));
    const std::uint64_t bytes = t.numel() * dtype_size(t.dtype);
    header[name] = {{"dtype", dtype_name(t.dtype)}, {"shape", t.shape}, {"data_offsets", {offset, offset + bytes}}};
    offset += bytes;
  }
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(8 + text.size() + offset);
  append_u64_le(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& [_, t] : tensors) {
    if (t.dtype == Dtype::kF32) {
      const auto* p = reinterpret_cast<const std::uint8_t*>(t.data.data());
      out.insert(out.end(), p, p + t.data.size() * sizeof(float));
    } else {
      for (float v : t.data) {
        const std::uint16_t h = float_to_half(v);
        out.push_back(static_cast<std::uint8_t>(h & 0xffu));
        out.push_back(static_cast<std::uint8_t>(h >> 8));
      }
    }
  }
  return out;
}

TensorMap decode_container(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw FormatError(fmt::format("container too short ({} bytes) for the header length", bytes.size()));
  const std::uint64_t header_len = read_u64_le(bytes.first(8));
  if (header_len > bytes.size() - 8)
    throw FormatError(fmt::format("header length {} exceeds the {} bytes available", header_len, bytes.size() - 8));

  const auto* text_begin = reinterpret_cast<const char*>(bytes.data() + 8);
  const json header = parse_header(std::string_view(text_begin, header_len));
  if (!header.is_object()) throw FormatError("header must be a JSON object");

  const auto data = bytes.subspan(8 + header_len);
  TensorMap out;
  std::uint64_t expected_begin = 0;
  // json objects iterate in sorted key order, which is the canonical order.
  for (const auto& [name, entry] : header.items()) {
    if (name == kMetadataKey) continue;
    if (name.empty()) throw FormatError("empty tensor name");
    if (!entry.is_object()) throw FormatError(fmt::format("tensor '{}': entry must be an object", name));
    for (const auto& [key, _] : entry.items())
      if (key != "dtype" && key != "shape" && key != "data_offsets")
        throw FormatError(fmt::format("tensor '{}': unexpected field '{}'", name, key));
    if (!entry.contains("dtype") || !entry.contains("shape") || !entry.contains("data_offsets"))
      throw FormatError(fmt::format("tensor '{}': missing dtype, shape or data_offsets", name));
    if (!entry["dtype"].is_string()) throw FormatError(fmt::format("tensor '{}': dtype must be a string", name));

    const auto dtype_text = entry["dtype"].get<std::string>();
    const auto dtype = parse_dtype(dtype_text);
    if (!dtype) throw FormatError(fmt::format("tensor '{}': unsupported dtype '{}'", name, dtype_text));
    Shape shape = parse_shape(name, entry["shape"]);
    const auto [begin, end] = parse_offsets(name, entry["data_offsets"]);

    std::size_t numel = 0;
    try {
      numel = shape_numel(shape);
    } catch (const ConfigError& e) {
      throw FormatError(fmt::format("tensor '{}': {}", name, e.what()));
    }
    if (numel > data.size())
      throw FormatError(fmt::format("tensor '{}': shape needs {} elements but only {} data bytes exist", name, numel,
                                    data.size()));
    if (end - begin != numel * dtype_size(*dtype))
      throw FormatError(fmt::format("tensor '{}': declared length {} bytes but shape and dtype need {}", name,
                                    end - begin, numel * dtype_size(*dtype)));
    if (begin != expected_begin)
      throw FormatError(fmt::format("tensor '{}': data_offsets begin at {} but the previous tensor ends at {}", name,
                                    begin, expected_begin));
    if (end > data.size())
      throw FormatError(fmt::format("tensor '{}': data_offsets end {} beyond the {} data bytes", name, end, data.size()));
    expected_begin = end;

    Tensor t{*dtype, std::move(shape), std::vector<float>(numel)};
    const auto* src = data.data() + begin;
    if (*dtype == Dtype::kF32) {
      std::memcpy(t.data.data(), src, numel * sizeof(float));
    } else {
      for (std::size_t i = 0; i < numel; ++i)
        t.data[i] = half_to_float(static_cast<std::uint16_t>(src[2 * i] | (src[2 * i + 1] << 8)));
    }
    out.insert(name, std::move(t));
  }
  if (expected_begin != data.size())
    throw FormatError(fmt::format("{} trailing data bytes not covered by any tensor", data.size() - expected_begin));
  return out;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::uint64_t iteration) {
  const auto bytes = read_file(path);
  try {
    return Checkpoint{iteration, decode_container(bytes)};
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

ContainerMetadata decode_metadata(std::span<const std::uint8_t> bytes) {
  (void)decode_container(bytes);
  const std::uint64_t header_len = read_u64_le(bytes.first(8));
  const json header = parse_header(std::string_view(reinterpret_cast<const char*>(bytes.data() + 8), header_len));
  ContainerMetadata out;
  const auto it = header.find(kMetadataKey);
  if (it == header.end()) return out;
  if (!it->is_object()) throw FormatError("__metadata__ must be an object of strings");
  for (const auto& [key, value] : it->items()) {
    if (!value.is_string()) throw FormatError(fmt::format("__metadata__ entry '{}' must be a string", key));
    out.emplace(key, value.get<std::string>());
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const TensorMap& tensors, const ContainerMetadata& metadata) {
  write_file(path, encode_container(tensors, metadata));
}

ContainerMetadata read_metadata(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_metadata(bytes);
  } catch (const FormatError& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

CheckpointSet::CheckpointSet(std::vector<Checkpoint> checkpoints) : checkpoints_(std::move(checkpoints)) {
  if (checkpoints_.empty()) throw ConfigError("checkpoint set must contain at least one checkpoint");
  schema_ = checkpoints_.front().weights.schema();
  for (std::size_t k = 1; k < checkpoints_.size(); ++k) {
    if (checkpoints_[k].iteration <= checkpoints_[k - 1].iteration)
      throw ConfigError(fmt::format("iterations must be strictly increasing: index {} has {} after {}", k,
                                    checkpoints_[k].iteration, checkpoints_[k - 1].iteration));
    if (auto diff = first_schema_difference(schema_, checkpoints_[k].weights.schema()))
      throw ConfigError(fmt::format("schema mismatch at index {}: tensor '{}'", k, *diff));
  }
}

std::vector<std::uint64_t> CheckpointSet::iterations() const {
  std::vector<std::uint64_t> out;
  out.reserve(checkpoints_.size());
  for (const auto& c : checkpoints_) out.push_back(c.iteration);
  return out;
}

Manifest read_manifest(const std::filesystem::path& manifest_path) {
  const auto bytes = read_file(manifest_path);
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("{}: malformed manifest JSON: {}", manifest_path.string(), e.what()));
  }
  if (!j.is_object() || !j.contains("checkpoints") || !j["checkpoints"].is_array())
    throw FormatError(fmt::format("{}: manifest needs a \"checkpoints\" array", manifest_path.string()));

  Manifest m;
  const auto kind = j.value("kind", std::string("dense"));
  if (kind == "dense") {
    m.kind = ManifestKind::kDense;
  } else if (kind == "lora") {
    m.kind = ManifestKind::kLora;
  } else {
    throw FormatError(fmt::format("{}: unknown manifest kind '{}'", manifest_path.string(), kind));
  }

  const auto base = manifest_path.parent_path();
  for (const auto& e : j["checkpoints"]) {
    if (!e.is_object() || !e.contains("iteration") || !e["iteration"].is_number_unsigned() || !e.contains("path") ||
        !e["path"].is_string())
      throw FormatError(fmt::format("{}: each checkpoint needs a non-negative \"iteration\" and a \"path\"",
                                    manifest_path.string()));
    std::filesystem::path p = e["path"].get<std::string>();
    if (p.is_relative()) p = base / p;
    m.checkpoints.push_back({e["iteration"].get<std::uint64_t>(), std::move(p)});
  }
  for (std::size_t k = 1; k < m.checkpoints.size(); ++k)
    if (m.checkpoints[k].iteration <= m.checkpoints[k - 1].iteration)
      throw ConfigError(fmt::format("{}: iterations must be strictly increasing: index {} has {} after {}",
                                    manifest_path.string(), k, m.checkpoints[k].iteration,
                                    m.checkpoints[k - 1].iteration));
  return m;
}

void write_manifest(const std::filesystem::path& manifest_path, const Manifest& manifest) {
  json j;
  j["kind"] = manifest.kind == ManifestKind::kLora ? "lora" : "dense";
  j["checkpoints"] = json::array();
  for (const auto& e : manifest.checkpoints) j["checkpoints"].push_back({{"iteration", e.iteration}, {"path", e.path.string()}});
  const std::string text = j.dump(2) + "\n";
  write_file(manifest_path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

CheckpointSet load_set(const std::filesystem::path& manifest_path) {
  const Manifest m = read_manifest(manifest_path);
  if (m.kind != ManifestKind::kDense)
    throw ConfigError(fmt::format("{}: expected a dense manifest", manifest_path.string()));
  std::vector<Checkpoint> checkpoints;
  checkpoints.reserve(m.checkpoints.size());
  for (const auto& e : m.checkpoints) checkpoints.push_back(load_checkpoint(e.path, e.iteration));
  return CheckpointSet(std::move(checkpoints));
}

CheckpointSet select_window(const CheckpointSet& set, std::uint64_t end_iter, std::uint64_t window,
                            std::uint64_t interval) {
  if (window == 0) throw ConfigError("window must be positive");
  if (interval == 0) throw ConfigError("interval must be positive");
  std::vector<Checkpoint> picked;
  for (const auto& c : set) {
    const bool in_range = c.iteration <= end_iter && c.iteration + window > end_iter;
    if (in_range && (end_iter - c.iteration) % interval == 0) picked.push_back(c);
  }
  if (picked.empty())
    throw ConfigError(fmt::format("window ({}, {}] with interval {} selects no checkpoints",
                                  end_iter >= window ? end_iter - window : 0, end_iter, interval));
  return CheckpointSet(std::move(picked));
}

LoraCheckpoint lora_from_tensors(const TensorMap& tensors, std::uint64_t iteration) {
  LoraCheckpoint out{iteration, {}};
  std::map<std::string, std::pair<const Tensor*, const Tensor*>, std::less<>> parts;
  for (const auto& [name, t] : tensors) {
    if (name.ends_with(kLoraASuffix)) {
      parts[name.substr(0, name.size() - kLoraASuffix.size())].second = &t;
    } else if (name.ends_with(kLoraBSuffix)) {
      parts[name.substr(0, name.size() - kLoraBSuffix.size())].first = &t;
    } else {
      throw ConfigError(fmt::format("tensor '{}' is not a LoRA factor (expected suffix {} or {})", name,
                                    kLoraASuffix, kLoraBSuffix));
    }
  }
  for (auto& [target, ba] : parts) {
    const auto [b, a] = ba;
    if (target.empty()) throw ConfigError("LoRA target name must be non-empty");
    if (!b || !a) throw ConfigError(fmt::format("LoRA target '{}' needs both A and B factors", target));
    if (b->shape.size() != 2 || a->shape.size() != 2)
      throw ConfigError(fmt::format("LoRA target '{}': factors must be matrices", target));
    if (b->shape[1] != a->shape[0])
      throw ConfigError(fmt::format("LoRA target '{}': rank mismatch, B has {} columns but A has {} rows", target,
                                    b->shape[1], a->shape[0]));
    out.pairs.emplace(target, LoraPair{*b, *a});
  }
  return out;
}

TensorMap lora_to_tensors(const LoraCheckpoint& checkpoint) {
  TensorMap out;
  for (const auto& [target, pair] : checkpoint.pairs) {
    out.insert(target + std::string(kLoraASuffix), pair.a);
    out.insert(target + std::string(kLoraBSuffix), pair.b);
  }
  return out;
}

void validate_lora_set(std::span<const LoraCheckpoint> set) {
  if (set.empty()) throw ConfigError("LoRA set must contain at least one checkpoint");
  const auto& ref = set.front();
  for (std::size_t k = 0; k < set.size(); ++k) {
    const auto& c = set[k];
    if (k > 0 && c.iteration <= set[k - 1].iteration)
      throw ConfigError(fmt::format("LoRA iterations must be strictly increasing at index {}", k));
    for (const auto& [target, pair] : c.pairs) {
      if (pair.b.shape.size() != 2 || pair.a.shape.size() != 2 || pair.b.shape[1] != pair.a.shape[0])
        throw ConfigError(fmt::format("LoRA checkpoint {} target '{}': rank mismatch", k, target));
    }
    if (c.pairs.size() != ref.pairs.size())
      throw ConfigError(fmt::format("LoRA checkpoint {} has {} targets, expected {}", k, c.pairs.size(), ref.pairs.size()));
    for (const auto& [target, pair] : ref.pairs) {
      auto it = c.pairs.find(target);
      if (it == c.pairs.end()) throw ConfigError(fmt::format("LoRA checkpoint {} lacks target '{}'", k, target));
      if (it->second.b.shape != pair.b.shape || it->second.a.shape != pair.a.shape)
        throw ConfigError(fmt::format("LoRA checkpoint {} target '{}': rank or shape mismatch", k, target));
    }
  }
}

std::vector<LoraCheckpoint> load_lora_set(const std::filesystem::path& manifest_path) {
  const Manifest m = read_manifest(manifest_path);
  if (m.kind != ManifestKind::kLora)
    throw ConfigError(fmt::format("{}: expected a lora manifest", manifest_path.string()));
  std::vector<LoraCheckpoint> out;
  for (const auto& e : m.checkpoints) {
    auto c = load_checkpoint(e.path, e.iteration);
    out.push_back(lora_from_tensors(c.weights, e.iteration));
  }
  validate_lora_set(out);
  return out;
}

}  // namespace lcsc
