// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cowqkd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument is outside its documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// QBER requested on a link that produces no clicks at all.
class UndefinedQberError : public Error {
 public:
  using Error::Error;
};

/// Visibility requested from an empty fringe (max counts = 0).
class UndefinedVisibilityError : public Error {
 public:
  using Error::Error;
};

/// Too few monitor counts to say anything about coherence.
class InsufficientStatisticsError : public Error {
 public:
  using Error::Error;
};

/// A peer sent something the protocol does not allow (index out of range,
/// malformed payload, unexpected message type).
class ProtocolViolation : public Error {
 public:
  using Error::Error;
};

/// Malformed wire frame. `position()` is the byte offset of the problem.
class FrameError : public Error {
 public:
  FrameError(const std::string& what, std::size_t position)
      : Error(what + " at byte " + std::to_string(position)), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Key material exhausted (authentication pool or key store).
class KeyDepletionError : public Error {
 public:
  using Error::Error;
};

/// A message tag did not verify.
class AuthenticationFailure : public Error {
 public:
  using Error::Error;
};

/// The classical channel failed underneath a protocol.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Reconciliation was told to expect identical keys but found disagreement.
class ResidualErrorReport : public Error {
 public:
  ResidualErrorReport(const std::string& what, std::size_t odd_blocks)
      : Error(what), odd_blocks_(odd_blocks) {}

  std::size_t odd_blocks() const noexcept { return odd_blocks_; }

 private:
  std::size_t odd_blocks_;
};

}  // namespace cowqkd
