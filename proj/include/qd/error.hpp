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

#include <stdexcept>
#include <string>

namespace qd {

enum class ErrorCode {
  Domain = 1,
  Config = 2,
  DegenerateBatch = 3,
  Factorization = 4,
  StepFailure = 5,
  Unsupported = 6,
  DegeneratePoint = 7,
  Io = 8,
};

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error(ErrorCode::Domain, w) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorCode::Config, w) {}
};

/// Every rank weight of a batch is zero: the weighting truncates all samples.
struct DegenerateBatchError : Error {
  explicit DegenerateBatchError(const std::string& w) : Error(ErrorCode::DegenerateBatch, w) {}
};

struct FactorizationError : Error {
  explicit FactorizationError(const std::string& w) : Error(ErrorCode::Factorization, w) {}
};

struct StepFailure : Error {
  explicit StepFailure(const std::string& w) : Error(ErrorCode::StepFailure, w) {}
};

struct UnsupportedError : Error {
  explicit UnsupportedError(const std::string& w) : Error(ErrorCode::Unsupported, w) {}
};

struct DegeneratePointError : Error {
  explicit DegeneratePointError(const std::string& w) : Error(ErrorCode::DegeneratePoint, w) {}
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorCode::Io, w) {}
};

} // namespace qd
