// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace rydkz {

// Base class for all toolkit errors so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A request exceeds a hard size limit (basis dimension, site count, ...).
class CapacityError : public Error {
 public:
  using Error::Error;
};

// A bitmask violates the constraint of the basis it was looked up in.
class NotInBasisError : public Error {
 public:
  using Error::Error;
};

// Malformed drive protocol or waveform evaluation outside its domain.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// The adaptive integrator could not proceed (step underflow, bad interval).
class IntegrationError : public Error {
 public:
  using Error::Error;
};

// A fit cannot be performed on the data handed in (too few points,
// non-decaying signal, degenerate abscissae).
class FitError : public Error {
 public:
  using Error::Error;
};

// Iterative eigensolver failed to converge within its iteration budget.
class EigensolverError : public Error {
 public:
  using Error::Error;
};

// A mitigation grid or readout model that cannot be used as given.
class MitigationError : public Error {
 public:
  using Error::Error;
};

// Config or data file violates the expected schema; the message names
// the offending field or line.
class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace rydkz
