// Copyright 2026 The dffoct Authors
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

#ifndef DFFOCT_ERRORS_HPP_
#define DFFOCT_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dffoct {

// Base class for every error this library raises on bad input or bad state.
// Internal logic bugs use assertions / std::logic_error instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem-level failure (open, read, write); message carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed serialized data. The code pins down which contract was broken so
// callers and tests can distinguish failure modes without parsing messages.
class ParseError : public Error {
 public:
  enum class Code {
    kBadMagic,
    kBadHeader,
    kUnknownDtype,
    kDimsOverflow,
    kBadDims,
    kTruncated,
    kTrailingData,
    kNonFinite,
    kNonInteger,
  };

  ParseError(Code code, const std::string& what) : Error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

// Shape disagreement between two objects that must match (stack vs mask,
// matrix vs source dims, scene vs config).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A configuration value outside its documented range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A scalar or data argument outside an operation's domain (negative CDF
// argument, empty mask background, mismatched cell sets, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Too little data for a statistic to be defined (for example fewer than
// three singular vectors when an outlier threshold needs a spread estimate).
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// The configured memory budget cannot accommodate even one work unit.
// The CLI maps this to its resource exit code and suggests tiling.
class BudgetError : public Error {
 public:
  using Error::Error;
};

// A numerical backend failed to converge.
class ComputeError : public Error {
 public:
  using Error::Error;
};

}  // namespace dffoct

#endif  // DFFOCT_ERRORS_HPP_
