// Copyright 2026 The HNF Authors.
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

#ifndef HNF_ERROR_HPP_
#define HNF_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace hnf {

// Base of every error thrown by the library. The CLI maps the concrete
// subclasses onto its exit-code contract.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes that do not chain, vectors of the wrong length, odd 2n lengths.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid scalar parameters (eps <= 0, trials == 0, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Invalid training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Empty, non-finite or otherwise unusable data.
class DataError : public Error {
 public:
  using Error::Error;
};

// CSV parse failure with a row/column location.
class ParseError : public DataError {
 public:
  using DataError::DataError;
};

// Malformed binary input (IDX, weight files, map blocks).
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// A weight matrix failed the full-column-rank check.
class NotInvertibleError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Layer-wise training could not certify a non-increasing cost.
class CertificationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Memory budget exceeded.
class ResourceError : public Error {
 public:
  using Error::Error;
};

// Operation requested on missing state (e.g. no map for a layer).
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace hnf

#endif  // HNF_ERROR_HPP_
