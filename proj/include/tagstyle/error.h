// Copyright (c) 2026 The tagstyle Authors
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

#ifndef TAGSTYLE_ERROR_H_
#define TAGSTYLE_ERROR_H_

#include <stdexcept>
#include <string>

namespace tagstyle {

// Process exit codes used by the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfigError = 2,
  kExitInputError = 3,
  kExitNumericError = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return kExitFailure; }
};

// Invalid configuration values or schema violations.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return kExitConfigError; }
};

// Bad user-supplied data: shapes, ids, missing files.
class InputError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return kExitInputError; }
};

// Non-finite values inside a computation.
class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return kExitNumericError; }
};

// API misuse, e.g. teacher-forced decode without a teacher.
class UsageError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return kExitInputError; }
};

}  // namespace tagstyle

#endif  // TAGSTYLE_ERROR_H_
