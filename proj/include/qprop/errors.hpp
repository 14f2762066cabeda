// Copyright 2026 The qprop Authors.
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

#pragma once

#include <stdexcept>
#include <string>

namespace qprop {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested state dimension exceeds the configured cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, underflowing quantization steps and the like.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Evaluation outside an oracle's declared validity box or energy bounds.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed parameters, unknown model names, missing bounds.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Local optimizer could not produce a step.
class OptimizerError : public Error {
 public:
  using Error::Error;
};

}  // namespace qprop
