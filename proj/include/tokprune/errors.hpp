// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace tokprune {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or axis mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration, argument or profile content.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or unreadable file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Timing produced an unusable result.
class MeasurementError : public Error {
 public:
  using Error::Error;
};

}  // namespace tokprune
