/* Copyright 2026 The dlcond Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <stdexcept>
#include <string>

namespace dlc {

// Base of every error raised by the engine. The CLI maps each subclass to a
// distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or axis mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid or unknown configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing, corrupt or inconsistent data on disk or in memory.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, undefined metrics, failed gradient checks.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Operation called in the wrong lifecycle state (e.g. backward without a
// cached forward).
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace dlc
