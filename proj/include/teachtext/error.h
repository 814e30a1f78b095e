// include/teachtext/error.h

// Copyright 2026  The teachtext authors

// See the top-level COPYING file for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef TEACHTEXT_ERROR_H_
#define TEACHTEXT_ERROR_H_

#include <stdexcept>
#include <string>

namespace teachtext {

// Base of every error the library raises. The CLI maps the concrete
// subclasses onto process exit codes (config 2, data 3, numerical 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid flags, config values, or option combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Anything wrong with on-disk inputs or with a model/store pairing.
class DataError : public Error {
 public:
  using Error::Error;
};

class MissingFileError : public DataError {
 public:
  using DataError::DataError;
};

class ShapeMismatchError : public DataError {
 public:
  using DataError::DataError;
};

class NonFiniteDataError : public DataError {
 public:
  using DataError::DataError;
};

class DanglingReferenceError : public DataError {
 public:
  using DataError::DataError;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

// Operand shapes that do not fit together (matmul, loss inputs, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A computation produced NaN/Inf.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace teachtext

#endif  // TEACHTEXT_ERROR_H_
