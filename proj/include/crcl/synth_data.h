// Copyright 2026 The CRCL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef CRCL_SYNTH_DATA_H_
#define CRCL_SYNTH_DATA_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crcl/common.h"

namespace crcl {

// Parameters of the shared-latent generator. Images are A*z + noise and
// texts are B*z + noise for fixed random maps A (d_v x latent_dim) and
// B (d_t x latent_dim) drawn from `seed`.
struct GenConfig {
  std::size_t n = 1000;
  std::size_t latent_dim = 8;
  std::size_t d_v = 32;
  std::size_t d_t = 32;
  double noise_std = 0.1;
  std::uint64_t seed = 0;
  // Test hook: A = B = identity. Requires latent_dim == d_v == d_t.
  bool identity_maps = false;

  void validate() const;
  bool operator==(const GenConfig&) const = default;
};

void to_json(nlohmann::json& j, const GenConfig& cfg);
void from_json(const nlohmann::json& j, GenConfig& cfg);

// N image/text pairs. Image i is currently paired with text pairing[i];
// the clean pairing is the identity.
struct PairedDataset {
  Matrix images;  // N x d_v, one sample per row
  Matrix texts;   // N x d_t
  std::vector<std::size_t> pairing;
  std::vector<bool> noise_flags;
  double noise_rate = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return pairing.size(); }
  std::size_t noisy_count() const;

  // Throws ValidationError when any invariant is broken.
  void validate() const;

  // Rows of the currently paired texts, i.e. texts[pairing[i]].
  Matrix paired_texts() const;

  bool operator==(const PairedDataset& other) const;
};

PairedDataset generate_bimodal(const GenConfig& cfg);

// Draws `n` further clean pairs from the same maps as generate_bimodal(cfg)
// using an independent sample stream. Stream 0 reproduces generate_bimodal.
PairedDataset generate_split(const GenConfig& cfg, std::size_t n,
                             std::uint64_t stream);

// Re-pairs round(eta * N) uniformly selected pairs by a uniformly random
// derangement of their texts, starting from the clean pairing. When the
// selection would hold a single pair, two are used instead and a note is
// appended to `warnings`.
PairedDataset inject_noise(const PairedDataset& ds, double eta,
                           std::uint64_t seed,
                           std::vector<std::string>* warnings = nullptr);

// Little-endian binary format:
//   magic "CRCLDS01" | u32 version | u32 reserved | u64 N | u64 d_v |
//   u64 d_t | u64 seed | f64 noise_rate | N*d_v f64 images (row-major) |
//   N*d_t f64 texts | N u64 pairing | N u8 flags
std::vector<unsigned char> serialize_dataset(const PairedDataset& ds);
PairedDataset deserialize_dataset(std::span<const unsigned char> bytes);

void save_dataset(const PairedDataset& ds, const std::filesystem::path& path);
PairedDataset load_dataset(const std::filesystem::path& path);

// FNV-1a of the serialized form.
std::uint64_t dataset_hash(const PairedDataset& ds);

}  // namespace crcl

#endif  // CRCL_SYNTH_DATA_H_
