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
#ifndef CRCL_COMMON_H_
#define CRCL_COMMON_H_

#include <cstdint>
#include <span>
#include <string_view>

#include <Eigen/Dense>

namespace crcl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Derives an independent seed from a master seed and a stream id
// (splitmix64 finalizer over the combined words).
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t stream);

// 64-bit FNV-1a over raw bytes. Stable across platforms; used for dataset
// hashes and run-directory keys.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes,
                      std::uint64_t state = 14695981039346656037ULL);
std::uint64_t fnv1a64(std::string_view text);

std::string hex64(std::uint64_t value);

// Throws NumericError naming `what` when any entry is NaN or infinite.
void require_finite(const Matrix& m, std::string_view what);

}  // namespace crcl

#endif  // CRCL_COMMON_H_
