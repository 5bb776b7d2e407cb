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

#include <cstddef>
#include <span>

namespace qd {

/// Pairwise (fan-in 2) summation. The tree shape depends only on the length.
double pairwise_sum(std::span<const double> values);

/// Deterministic tree reduction over [0, n): leaves of at most 8 indices are
/// folded left to right with `leaf`, then combined pairwise with `+`.
template <typename T, typename Leaf>
T tree_reduce(std::size_t begin, std::size_t end, const T& zero, Leaf&& leaf) {
  constexpr std::size_t kLeaf = 8;
  if (end - begin <= kLeaf) {
    T acc = zero;
    for (std::size_t i = begin; i < end; ++i) {
      leaf(acc, i);
    }
    return acc;
  }
  const std::size_t mid = begin + (end - begin) / 2;
  T left = tree_reduce(begin, mid, zero, leaf);
  T right = tree_reduce(mid, end, zero, leaf);
  left += right;
  return left;
}

double log_sum_exp(std::span<const double> values);

} // namespace qd
