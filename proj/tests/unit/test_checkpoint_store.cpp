// Copyright (c) 2026, The lcsc Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include <lcsc/checkpoint_store.hpp>
#include <lcsc/error.hpp>

#include "test_support.hpp"

using namespace lcsc;
using lcsc::testing::TempDir;

namespace {

std::vector<std::uint8_t> raw_container(const std::string& header, const std::vector<std::uint8_t>& data) {
  std::vector<std::uint8_t> out;
  const std::uint64_t h = header.size();
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(h >> (8 * i)));
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), data.begin(), data.end());
  return out;
}

std::vector<std::uint8_t> f32_bytes(std::initializer_list<float> values) {
  std::vector<std::uint8_t> out;
  for (float v : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  return out;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_manifest_json(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream(p) << j.dump();
}

}  // namespace

TEST_CASE("decode a single f32 tensor", "[container]") {
  const auto bytes = raw_container(R"({"w":{"data_offsets":[0,8],"dtype":"F32","shape":[2]}})", f32_bytes({1.0f, 2.0f}));
  const TensorMap m = decode_container(bytes);
  REQUIRE(m.size() == 1);
  CHECK(m.at("w").data == std::vector<float>{1.0f, 2.0f});
  CHECK(m.at("w").shape == Shape{2});
  CHECK(encode_container(m) == bytes);
}

TEST_CASE("empty container is a valid checkpoint", "[container]") {
  const auto bytes = raw_container("{}", {});
  CHECK(decode_container(bytes).empty());
  CHECK(encode_container(TensorMap{}) == bytes);
}

TEST_CASE("f16 tensors widen on load and narrow on save", "[container]") {
  // 1.0 = 0x3c00, -2.0 = 0xc000
  const auto bytes = raw_container(R"({"h":{"data_offsets":[0,4],"dtype":"F16","shape":[2]}})", {0x00, 0x3c, 0x00, 0xc0});
  const TensorMap m = decode_container(bytes);
  CHECK(m.at("h").dtype == Dtype::kF16);
  CHECK(m.at("h").data == std::vector<float>{1.0f, -2.0f});
  CHECK(encode_container(m) == bytes);
}

TEST_CASE("random containers round-trip bit-exactly", "[container][property]") {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 200; ++trial) {
    const TensorMap m = lcsc::testing::random_map(rng, static_cast<std::size_t>(trial % 7));
    const auto bytes = encode_container(m);
    const TensorMap back = decode_container(bytes);
    REQUIRE(back.schema() == m.schema());
    REQUIRE(encode_container(back) == bytes);
    for (const auto& [name, t] : m)
      REQUIRE(std::memcmp(back.at(name).data.data(), t.data.data(), t.data.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("malformed containers are rejected with a diagnostic", "[container]") {
  const auto one = f32_bytes({1.0f});
  struct Case {
    const char* label;
    std::vector<std::uint8_t> bytes;
    const char* needle;
  };
  std::vector<std::uint8_t> huge_len(8, 0xff);
  const std::vector<Case> cases = {
      {"short", {1, 2, 3}, "too short"},
      {"header length past end", huge_len, "exceeds"},
      {"bad json", raw_container("{nope", {}), "malformed header"},
      {"not an object", raw_container("[1,2]", {}), "JSON object"},
      {"unsupported dtype", raw_container(R"({"w":{"data_offsets":[0,4],"dtype":"BF16","shape":[1]}})", one), "unsupported dtype"},
      {"length mismatch", raw_container(R"({"w":{"data_offsets":[0,4],"dtype":"F32","shape":[2]}})", one), "need"},
      {"duplicate name",
       raw_container(R"({"w":{"data_offsets":[0,4],"dtype":"F32","shape":[1]},"w":{"data_offsets":[0,4],"dtype":"F32","shape":[1]}})", one),
       "duplicate"},
      {"gap", raw_container(R"({"w":{"data_offsets":[4,8],"dtype":"F32","shape":[1]}})", f32_bytes({1.0f, 2.0f})), "begin at"},
      {"trailing bytes", raw_container(R"({"w":{"data_offsets":[0,4],"dtype":"F32","shape":[1]}})", f32_bytes({1.0f, 2.0f})), "trailing"},
      {"non-canonical order",
       raw_container(R"({"a":{"data_offsets":[4,8],"dtype":"F32","shape":[1]},"b":{"data_offsets":[0,4],"dtype":"F32","shape":[1]}})",
                     f32_bytes({1.0f, 2.0f})),
       "begin at"},
      {"negative shape", raw_container(R"({"w":{"data_offsets":[0,4],"dtype":"F32","shape":[-1]}})", one), "non-negative"},
      {"offsets shape", raw_container(R"({"w":{"data_offsets":[0],"dtype":"F32","shape":[1]}})", one), "data_offsets"},
      {"missing field", raw_container(R"({"w":{"dtype":"F32","shape":[1]}})", one), "missing"},
      {"extra field", raw_container(R"({"w":{"data_offsets":[0,4],"dtype":"F32","shape":[1],"x":1}})", one), "unexpected"},
      {"empty name", raw_container(R"({"":{"data_offsets":[0,4],"dtype":"F32","shape":[1]}})", one), "empty"},
      {"offsets past data", raw_container(R"({"w":{"data_offsets":[0,8],"dtype":"F32","shape":[2]}})", one), "beyond"},
  };
  for (const auto& c : cases) {
    INFO(c.label);
    try {
      (void)decode_container(c.bytes);
      FAIL("accepted malformed container");
    } catch (const FormatError& e) {
      CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring(c.needle));
    }
  }
}

TEST_CASE("metadata entries are ignored", "[container]") {
  const auto bytes = raw_container(R"({"__metadata__":{"format":"pt"},"w":{"data_offsets":[0,4],"dtype":"F32","shape":[1]}})",
                                   f32_bytes({3.0f}));
  const TensorMap m = decode_container(bytes);
  CHECK(m.size() == 1);
  CHECK(m.at("w").data[0] == 3.0f);
}

TEST_CASE("metadata written on save is readable and skipped on load", "[container]") {
  const TensorMap m = lcsc::testing::scalar_map(1.5f);
  const ContainerMetadata meta{{"format_version", "1"}, {"config", R"({"a":1})"}};
  const auto bytes = encode_container(m, meta);
  CHECK(decode_container(bytes) == m);
  CHECK(decode_metadata(bytes) == meta);
  CHECK(decode_metadata(encode_container(m)).empty());
  TensorMap reserved;
  reserved.insert(std::string(kMetadataKey), {1}, {0.0f});
  CHECK_THROWS_AS(encode_container(reserved), ConfigError);
}

TEST_CASE("save and load through the filesystem", "[container]") {
  TempDir dir;
  std::mt19937_64 rng(5);
  const TensorMap m = lcsc::testing::random_map(rng, 4);
  save_checkpoint(dir / "a.safetensors", m);
  const auto before = read_bytes(dir / "a.safetensors");
  const Checkpoint c = load_checkpoint(dir / "a.safetensors", 42);
  CHECK(c.iteration == 42);
  CHECK(encode_container(c.weights) == before);
  CHECK(read_bytes(dir / "a.safetensors") == before);  // loading is read-only
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.safetensors"), IoError);
}

TEST_CASE("manifests load into validated checkpoint sets", "[manifest]") {
  TempDir dir;
  std::filesystem::create_directories(dir / "ckpt");
  for (int i = 1; i <= 3; ++i) save_checkpoint(dir / ("ckpt/" + std::to_string(i) + ".safetensors"), lcsc::testing::scalar_map(static_cast<float>(i)));

  SECTION("relative paths resolve against the manifest") {
    write_manifest_json(dir / "m.json", {{"kind", "dense"},
                                         {"checkpoints",
                                          {{{"iteration", 100}, {"path", "ckpt/1.safetensors"}},
                                           {{"iteration", 200}, {"path", "ckpt/2.safetensors"}},
                                           {{"iteration", 300}, {"path", "ckpt/3.safetensors"}}}}});
    const CheckpointSet set = load_set(dir / "m.json");
    REQUIRE(set.size() == 3);
    CHECK(set.iterations() == std::vector<std::uint64_t>{100, 200, 300});
    CHECK(set[2].weights.at("w").data[0] == 3.0f);
  }
  SECTION("non-increasing iterations") {
    write_manifest_json(dir / "m.json", {{"kind", "dense"},
                                         {"checkpoints",
                                          {{{"iteration", 200}, {"path", "ckpt/1.safetensors"}},
                                           {{"iteration", 200}, {"path", "ckpt/2.safetensors"}}}}});
    CHECK_THROWS_WITH(load_set(dir / "m.json"), Catch::Matchers::ContainsSubstring("strictly increasing"));
  }
  SECTION("schema mismatch reports index and tensor") {
    save_checkpoint(dir / "ckpt/odd.safetensors", lcsc::testing::scalar_map(1.0f, "v"));
    write_manifest_json(dir / "m.json", {{"kind", "dense"},
                                         {"checkpoints",
                                          {{{"iteration", 1}, {"path", "ckpt/1.safetensors"}},
                                           {{"iteration", 2}, {"path", "ckpt/2.safetensors"}},
                                           {{"iteration", 3}, {"path", "ckpt/odd.safetensors"}}}}});
    try {
      (void)load_set(dir / "m.json");
      FAIL("schema mismatch accepted");
    } catch (const ConfigError& e) {
      CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("index 2") && Catch::Matchers::ContainsSubstring("'v'"));
    }
  }
  SECTION("write_manifest round-trips") {
    Manifest m{ManifestKind::kDense, {{7, dir / "ckpt/1.safetensors"}, {9, dir / "ckpt/2.safetensors"}}};
    write_manifest(dir / "w.json", m);
    const Manifest back = read_manifest(dir / "w.json");
    CHECK(back.checkpoints.size() == 2);
    CHECK(back.checkpoints[1].iteration == 9);
  }
  SECTION("malformed manifest") {
    std::ofstream(dir / "bad.json") << R"({"checkpoints": [{"iteration": -1, "path": "x"}]})";
    CHECK_THROWS_AS(load_set(dir / "bad.json"), FormatError);
  }
}

TEST_CASE("CheckpointSet rejects invalid sequences", "[manifest]") {
  CHECK_THROWS_AS(CheckpointSet({}), ConfigError);
  CHECK_THROWS_AS(CheckpointSet({{5, lcsc::testing::scalar_map(1)}, {4, lcsc::testing::scalar_map(2)}}), ConfigError);
}

TEST_CASE("select_window", "[window]") {
  std::vector<float> values(10);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<float>(i);
  const CheckpointSet set = lcsc::testing::scalar_set(values);  // iterations 100..1000

  // The window is half-open: (end - window, end].
  CHECK(select_window(set, 1000, 400, 200).iterations() == std::vector<std::uint64_t>{800, 1000});
  CHECK(select_window(set, 1000, 401, 200).iterations() == std::vector<std::uint64_t>{600, 800, 1000});
  CHECK(select_window(set, 1000, 100, 100).iterations() == std::vector<std::uint64_t>{1000});
  CHECK(select_window(set, 1000, 50, 100).iterations() == std::vector<std::uint64_t>{1000});
  CHECK_THROWS_WITH(select_window(set, 1050, 40, 100), Catch::Matchers::ContainsSubstring("selects no checkpoints"));
  CHECK_THROWS_AS(select_window(set, 50, 1000, 10), ConfigError);
  CHECK_THROWS_AS(select_window(set, 1000, 0, 100), ConfigError);
  CHECK_THROWS_AS(select_window(set, 1000, 100, 0), ConfigError);
  CHECK(select_window(set, 1000, 5000, 300).iterations() == std::vector<std::uint64_t>{100, 400, 700, 1000});

  SECTION("output is an ordered subsequence with the same schema") {
    for (std::uint64_t end : {300u, 550u, 1000u})
      for (std::uint64_t window : {150u, 1000u})
        for (std::uint64_t interval : {50u, 100u, 250u}) {
          try {
            const CheckpointSet w = select_window(set, end, window, interval);
            CHECK(w.schema() == set.schema());
            auto its = set.iterations();
            for (auto it : w.iterations()) CHECK(std::find(its.begin(), its.end(), it) != its.end());
          } catch (const ConfigError&) {
          }
        }
  }
}

TEST_CASE("LoRA checkpoints split into factor pairs", "[lora]") {
  TensorMap t;
  t.insert("proj.lora_B", {2, 1}, {1.0f, 0.0f});
  t.insert("proj.lora_A", {1, 2}, {0.0f, 2.0f});
  const LoraCheckpoint c = lora_from_tensors(t, 3);
  REQUIRE(c.pairs.size() == 1);
  CHECK(c.pairs.at("proj").rank() == 1);
  CHECK(lora_to_tensors(c) == t);

  TensorMap bad_rank;
  bad_rank.insert("p.lora_B", {2, 2}, {0, 0, 0, 0});
  bad_rank.insert("p.lora_A", {1, 2}, {0, 0});
  CHECK_THROWS_WITH(lora_from_tensors(bad_rank, 0), Catch::Matchers::ContainsSubstring("rank mismatch"));

  TensorMap missing;
  missing.insert("p.lora_B", {2, 1}, {0, 0});
  CHECK_THROWS_AS(lora_from_tensors(missing, 0), ConfigError);

  TensorMap stray;
  stray.insert("weight", {1}, {0});
  CHECK_THROWS_AS(lora_from_tensors(stray, 0), ConfigError);
}

TEST_CASE("LoRA manifests validate shared shapes", "[lora]") {
  TempDir dir;
  auto make = [](std::int64_t rank) {
    TensorMap t;
    t.insert("q.lora_B", {3, rank}, std::vector<float>(static_cast<std::size_t>(3 * rank), 1.0f));
    t.insert("q.lora_A", {rank, 2}, std::vector<float>(static_cast<std::size_t>(2 * rank), 1.0f));
    return t;
  };
  save_checkpoint(dir / "a.safetensors", make(2));
  save_checkpoint(dir / "b.safetensors", make(2));
  save_checkpoint(dir / "c.safetensors", make(1));
  write_manifest_json(dir / "ok.json", {{"kind", "lora"},
                                        {"checkpoints",
                                         {{{"iteration", 1}, {"path", "a.safetensors"}},
                                          {{"iteration", 2}, {"path", "b.safetensors"}}}}});
  CHECK(load_lora_set(dir / "ok.json").size() == 2);
  CHECK_THROWS_AS(load_set(dir / "ok.json"), ConfigError);

  write_manifest_json(dir / "bad.json", {{"kind", "lora"},
                                         {"checkpoints",
                                          {{{"iteration", 1}, {"path", "a.safetensors"}},
                                           {{"iteration", 2}, {"path", "c.safetensors"}}}}});
  CHECK_THROWS_WITH(load_lora_set(dir / "bad.json"), Catch::Matchers::ContainsSubstring("mismatch"));
}
