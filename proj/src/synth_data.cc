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
#include "crcl/synth_data.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <string_view>

#include "byte_io.h"
#include "crcl/errors.h"

namespace crcl {
namespace {

using internal::ByteReader;
using internal::ByteWriter;

constexpr std::string_view kMagic = "CRCLDS01";
constexpr std::uint32_t kFormatVersion = 1;

// Stream ids for the seed mixer.
constexpr std::uint64_t kMapStream = 0x6d617073;  // "maps"
constexpr std::uint64_t kSampleStream = 0x73616d70;

Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
  return m;
}

}  // namespace

void GenConfig::validate() const {
  if (n < 2) throw ConfigError("GenConfig: n must be >= 2");
  if (latent_dim < 1 || d_v < 1 || d_t < 1)
    throw ConfigError("GenConfig: dimensions must be >= 1");
  if (latent_dim > std::min(d_v, d_t))
    throw ConfigError("GenConfig: latent_dim must not exceed min(d_v, d_t)");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
    throw ConfigError("GenConfig: noise_std must be finite and >= 0");
  if (identity_maps && !(latent_dim == d_v && latent_dim == d_t))
    throw ConfigError("GenConfig: identity maps need latent_dim == d_v == d_t");
}

void to_json(nlohmann::json& j, const GenConfig& cfg) {
  j = nlohmann::json{{"n", cfg.n},
                     {"latent_dim", cfg.latent_dim},
                     {"d_v", cfg.d_v},
                     {"d_t", cfg.d_t},
                     {"noise_std", cfg.noise_std},
                     {"seed", cfg.seed},
                     {"identity_maps", cfg.identity_maps}};
}

void from_json(const nlohmann::json& j, GenConfig& cfg) {
  GenConfig d;
  cfg.n = j.value("n", d.n);
  cfg.latent_dim = j.value("latent_dim", d.latent_dim);
  cfg.d_v = j.value("d_v", d.d_v);
  cfg.d_t = j.value("d_t", d.d_t);
  cfg.noise_std = j.value("noise_std", d.noise_std);
  cfg.seed = j.value("seed", d.seed);
  cfg.identity_maps = j.value("identity_maps", d.identity_maps);
}

std::size_t PairedDataset::noisy_count() const {
  return static_cast<std::size_t>(
      std::count(noise_flags.begin(), noise_flags.end(), true));
}

void PairedDataset::validate() const {
  const std::size_t n = pairing.size();
  if (static_cast<std::size_t>(images.rows()) != n ||
      static_cast<std::size_t>(texts.rows()) != n || noise_flags.size() != n)
    throw ValidationError("dataset: inconsistent sizes");
  std::vector<bool> hit(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (pairing[i] >= n || hit[pairing[i]])
      throw ValidationError("dataset: pairing is not a bijection");
    hit[pairing[i]] = true;
    if (noise_flags[i] != (pairing[i] != i))
      throw ValidationError("dataset: noise flag disagrees with pairing at " +
                            std::to_string(i));
  }
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0))
    throw ValidationError("dataset: noise_rate outside [0, 1]");
  const auto expected =
      static_cast<std::size_t>(std::llround(noise_rate * static_cast<double>(n)));
  if (expected != noisy_count())
    throw ValidationError("dataset: flag count differs from round(eta * N)");
}

Matrix PairedDataset::paired_texts() const {
  Matrix out(texts.rows(), texts.cols());
  for (std::size_t i = 0; i < pairing.size(); ++i)
    out.row(static_cast<Index>(i)) = texts.row(static_cast<Index>(pairing[i]));
  return out;
}

bool PairedDataset::operator==(const PairedDataset& o) const {
  // Bitwise comparison so that NaN payloads and signed zeros count.
  auto same = [](const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Index k = 0; k < a.size(); ++k)
      if (std::bit_cast<std::uint64_t>(a.data()[k]) !=
          std::bit_cast<std::uint64_t>(b.data()[k]))
        return false;
    return true;
  };
  return same(images, o.images) && same(texts, o.texts) &&
         pairing == o.pairing && noise_flags == o.noise_flags &&
         std::bit_cast<std::uint64_t>(noise_rate) ==
             std::bit_cast<std::uint64_t>(o.noise_rate) &&
         seed == o.seed;
}

PairedDataset generate_split(const GenConfig& cfg, std::size_t n,
                             std::uint64_t stream) {
  cfg.validate();
  if (n < 2) throw ConfigError("generate_split: n must be >= 2");
  const auto latent = static_cast<Index>(cfg.latent_dim);
  const auto dv = static_cast<Index>(cfg.d_v);
  const auto dt = static_cast<Index>(cfg.d_t);

  Matrix a, b;
  if (cfg.identity_maps) {
    a = Matrix::Identity(dv, latent);
    b = Matrix::Identity(dt, latent);
  } else {
    std::mt19937_64 map_rng(mix_seed(cfg.seed, kMapStream));
    // Scale keeps the signal variance per coordinate independent of latent_dim.
    const double scale = 1.0 / std::sqrt(static_cast<double>(latent));
    a = gaussian_matrix(dv, latent, map_rng) * scale;
    b = gaussian_matrix(dt, latent, map_rng) * scale;
  }

  std::mt19937_64 rng(mix_seed(mix_seed(cfg.seed, kSampleStream), stream));
  const auto rows = static_cast<Index>(n);
  Matrix z = gaussian_matrix(rows, latent, rng);
  PairedDataset ds;
  ds.images = z * a.transpose();
  ds.texts = z * b.transpose();
  if (cfg.noise_std > 0.0) {
    ds.images += gaussian_matrix(rows, dv, rng) * cfg.noise_std;
    ds.texts += gaussian_matrix(rows, dt, rng) * cfg.noise_std;
  }
  ds.pairing.resize(n);
  std::iota(ds.pairing.begin(), ds.pairing.end(), std::size_t{0});
  ds.noise_flags.assign(n, false);
  ds.noise_rate = 0.0;
  ds.seed = cfg.seed;
  return ds;
}

PairedDataset generate_bimodal(const GenConfig& cfg) {
  return generate_split(cfg, cfg.n, 0);
}

PairedDataset inject_noise(const PairedDataset& ds, double eta,
                           std::uint64_t seed,
                           std::vector<std::string>* warnings) {
  const std::size_t n = ds.size();
  if (n < 2) throw DomainError("inject_noise: need at least two pairs");
  const double max_eta = static_cast<double>(n - 1) / static_cast<double>(n);
  if (!(eta >= 0.0) || eta > max_eta)
    throw DomainError("inject_noise: eta must lie in [0, (N-1)/N]");

  auto m = static_cast<std::size_t>(std::llround(eta * static_cast<double>(n)));
  if (m == 1) {
    m = 2;
    if (warnings)
      warnings->push_back(
          "inject_noise: a single mismatched pair admits no derangement; "
          "using two");
  }

  PairedDataset out = ds;
  std::iota(out.pairing.begin(), out.pairing.end(), std::size_t{0});
  std::mt19937_64 rng(seed);

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> chosen;
  chosen.reserve(m);
  std::sample(all.begin(), all.end(), std::back_inserter(chosen), m, rng);

  if (m >= 2) {
    // Rejection sampling over uniform shuffles yields a uniform derangement;
    // the acceptance rate tends to 1/e.
    std::vector<std::size_t> perm = chosen;
    bool deranged = false;
    while (!deranged) {
      std::shuffle(perm.begin(), perm.end(), rng);
      deranged = true;
      for (std::size_t k = 0; k < m; ++k)
        if (perm[k] == chosen[k]) {
          deranged = false;
          break;
        }
    }
    for (std::size_t k = 0; k < m; ++k) out.pairing[chosen[k]] = perm[k];
  }

  out.noise_flags.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) out.noise_flags[i] = out.pairing[i] != i;
  out.noise_rate = static_cast<double>(m) / static_cast<double>(n);
  return out;
}

std::vector<unsigned char> serialize_dataset(const PairedDataset& ds) {
  ds.validate();
  ByteWriter w;
  w.raw(kMagic);
  w.u32(kFormatVersion);
  w.u32(0);
  w.u64(ds.size());
  w.u64(static_cast<std::uint64_t>(ds.images.cols()));
  w.u64(static_cast<std::uint64_t>(ds.texts.cols()));
  w.u64(ds.seed);
  w.f64(ds.noise_rate);
  for (Index r = 0; r < ds.images.rows(); ++r)
    for (Index c = 0; c < ds.images.cols(); ++c) w.f64(ds.images(r, c));
  for (Index r = 0; r < ds.texts.rows(); ++r)
    for (Index c = 0; c < ds.texts.cols(); ++c) w.f64(ds.texts(r, c));
  for (std::size_t p : ds.pairing) w.u64(p);
  for (bool f : ds.noise_flags) w.u8(f ? 1 : 0);
  return w.take();
}

PairedDataset deserialize_dataset(std::span<const unsigned char> bytes) {
  ByteReader r(bytes);
  for (char expected : kMagic) {
    const std::size_t at = r.offset();
    if (r.remaining() == 0) throw ParseError("truncated dataset magic", at);
    if (static_cast<char>(r.u8()) != expected)
      throw ParseError("bad dataset magic", at);
  }
  const std::size_t version_at = r.offset();
  if (r.u32() != kFormatVersion)
    throw ParseError("unsupported dataset version", version_at);
  r.u32();
  const std::uint64_t n = r.u64();
  const std::uint64_t dv = r.u64();
  const std::uint64_t dt = r.u64();
  // Guard against absurd headers before allocating.
  const std::size_t payload_at = r.offset() + 16;
  const long double need = static_cast<long double>(n) * (dv + dt + 1) * 8.0L +
                           static_cast<long double>(n) + 16.0L;
  if (need > static_cast<long double>(r.remaining()))
    throw ParseError("dataset payload shorter than header declares",
                     std::min(payload_at, bytes.size()));

  PairedDataset ds;
  ds.seed = r.u64();
  ds.noise_rate = r.f64();
  ds.images.resize(static_cast<Index>(n), static_cast<Index>(dv));
  ds.texts.resize(static_cast<Index>(n), static_cast<Index>(dt));
  for (Index i = 0; i < ds.images.rows(); ++i)
    for (Index c = 0; c < ds.images.cols(); ++c) ds.images(i, c) = r.f64();
  for (Index i = 0; i < ds.texts.rows(); ++i)
    for (Index c = 0; c < ds.texts.cols(); ++c) ds.texts(i, c) = r.f64();
  ds.pairing.resize(n);
  for (auto& p : ds.pairing) p = r.u64();
  ds.noise_flags.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t at = r.offset();
    const std::uint8_t f = r.u8();
    if (f > 1) throw ParseError("noise flag byte must be 0 or 1", at);
    ds.noise_flags[i] = f == 1;
  }
  if (r.remaining() != 0)
    throw ParseError("trailing bytes after dataset", r.offset());
  ds.validate();
  return ds;
}

void save_dataset(const PairedDataset& ds, const std::filesystem::path& path) {
  const auto bytes = serialize_dataset(ds);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

PairedDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return deserialize_dataset(bytes);
}

std::uint64_t dataset_hash(const PairedDataset& ds) {
  return fnv1a64(serialize_dataset(ds));
}

}  // namespace crcl
