/*
 * Copyright 2026 The DRANet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DRANET_ERRORS_HPP_
#define DRANET_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dranet {

// Base of every fault raised by the library. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration, infeasible request, or inconsistent shapes between a
// checkpoint and its config. Exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Invalid identifiers or argument shapes passed to a library operation.
class DomainError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Malformed or missing data files. Exit code 3.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite losses or gradients. Exit code 4.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace dranet

#endif  // DRANET_ERRORS_HPP_
