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

#include "qd/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qd {

double pairwise_sum(std::span<const double> values) {
  if (values.empty()) {
    return 0.0;
  }
  if (values.size() == 1) {
    return values[0];
  }
  const std::size_t mid = values.size() / 2;
  return pairwise_sum(values.subspan(0, mid)) + pairwise_sum(values.subspan(mid));
}

double log_sum_exp(std::span<const double> values) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    top = std::max(top, v);
  }
  if (!std::isfinite(top)) {
    return top;
  }
  double acc = 0.0;
  for (double v : values) {
    acc += std::exp(v - top);
  }
  return top + std::log(acc);
}

} // namespace qd
