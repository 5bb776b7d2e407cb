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

#include "qd/random.hpp"

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include <limits>

namespace qd {

namespace {
constexpr std::uint64_t kRootPath = std::numeric_limits<std::uint64_t>::max();
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t iteration, Purpose purpose,
                          std::uint64_t chunk) {
  std::uint64_t h = splitmix64(run_seed);
  h = splitmix64(h ^ iteration);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  return splitmix64(h ^ chunk);
}

RandomStream::RandomStream(std::uint64_t run_seed, std::uint64_t iteration, Purpose purpose)
    : RandomStream(run_seed, iteration, purpose, kRootPath) {}

RandomStream::RandomStream(std::uint64_t run_seed, std::uint64_t iteration, Purpose purpose,
                           std::uint64_t chunk_path)
    : run_seed_(run_seed),
      iteration_(iteration),
      purpose_(purpose),
      path_(chunk_path),
      engine_(chunk_path == kRootPath ? derive_seed(run_seed, iteration, purpose, kRootPath)
                                      : chunk_path) {}

RandomStream RandomStream::substream(std::uint64_t chunk) const {
  const std::uint64_t child = path_ == kRootPath
                                  ? derive_seed(run_seed_, iteration_, purpose_, chunk)
                                  : splitmix64(path_ ^ splitmix64(chunk));
  // kRootPath is reserved for roots; a collision would only alias a seed.
  return RandomStream(run_seed_, iteration_, purpose_, child == kRootPath ? child - 1 : child);
}

double RandomStream::uniform() {
  return boost::random::uniform_01<double>{}(engine_);
}

double RandomStream::normal() {
  return boost::random::normal_distribution<double>{}(engine_);
}

double RandomStream::gamma(double shape, double rate) {
  return boost::random::gamma_distribution<double>{shape, 1.0 / rate}(engine_);
}

std::size_t RandomStream::index(std::size_t n) {
  return boost::random::uniform_int_distribution<std::size_t>{0, n - 1}(engine_);
}

} // namespace qd
