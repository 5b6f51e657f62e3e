// Copyright 2026 The rvseg Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace rvseg {

/// Base class for recoverable failures surfaced to the command line.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration (unknown keys, bad ranges).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Missing, truncated or protocol-violating input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or activation during training or inference.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace rvseg
