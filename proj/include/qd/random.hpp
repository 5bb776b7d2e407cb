/*
Copyright 2026 The qd Authors
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

                http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include <cstdint>
#include <random>

namespace qd {

/// What a random stream is used for. Part of the substream key, so
/// diagnostics never share draws with the optimization batch.
enum class Purpose : std::uint64_t {
  Optimize = 1,
  DiagPrev = 2,
  DiagNext = 3,
  Bootstrap = 4,
  Latent = 5,
  Estimate = 6,
  User = 7,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Seed of the substream keyed by (run_seed, iteration, purpose, chunk).
std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t iteration, Purpose purpose,
                          std::uint64_t chunk);

/// A deterministic random stream. Draws go through Boost.Random distributions,
/// whose algorithms are fixed by the library rather than by the standard
/// library vendor, so sequences are reproducible across toolchains.
class RandomStream {
public:
  using Engine = std::mt19937_64;

  RandomStream(std::uint64_t run_seed, std::uint64_t iteration, Purpose purpose);

  /// Independent child stream; `substream(c)` for the same parent and `c`
  /// always yields the same sequence.
  RandomStream substream(std::uint64_t chunk) const;

  double uniform();
  double normal();
  /// Gamma with the given shape and rate (mean shape/rate).
  double gamma(double shape, double rate);
  std::size_t index(std::size_t n);

  std::uint64_t run_seed() const { return run_seed_; }
  std::uint64_t iteration() const { return iteration_; }
  Purpose purpose() const { return purpose_; }

private:
  RandomStream(std::uint64_t run_seed, std::uint64_t iteration, Purpose purpose,
               std::uint64_t chunk_path);

  std::uint64_t run_seed_;
  std::uint64_t iteration_;
  Purpose purpose_;
  std::uint64_t path_;
  Engine engine_;
};

} // namespace qd
