// Copyright 2026 The vlnpairs Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vlnpairs {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::string base64_encode(std::string_view bytes);
/// Throws Error(PreconditionViolated) on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
/// Collapses runs of ASCII whitespace to one space and trims the ends.
std::string collapse_spaces(std::string_view s);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// Small deterministic PRNG. std::mt19937_64 is fully specified by the
// standard but the distributions are not, so every draw goes through the
// helpers below to keep output identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next();
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  /// Uniform integer in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi);
  /// Uniform double in [0, 1).
  double unit();
  bool bernoulli(double p);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);
/// Stable 64-bit hash of a string (FNV-1a followed by a splitmix finalizer).
std::uint64_t hash64(std::string_view data);

}  // namespace vlnpairs
