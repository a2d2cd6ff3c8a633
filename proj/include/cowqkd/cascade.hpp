// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "cowqkd/bit_vector.hpp"
#include "cowqkd/randomness.hpp"

namespace cowqkd {

/// ceil(0.73 / max(q, 0.001)), clamped to [8, max(2, n/2)].
std::size_t default_initial_block(double qber_estimate, std::size_t n);

struct CascadeConfig {
  std::size_t num_passes = 4;
  /// Maps (QBER estimate, key length) to the first-pass block size.
  /// Empty means default_initial_block.
  std::function<std::size_t(double, std::size_t)> initial_block_fn;
  /// Public randomness for the per-pass shuffles (pass 0 is unshuffled).
  Seed shuffle_seed{};
};

/// Block size of every pass: the first from initial_block_fn, then doubling,
/// each capped at max(2, n/2) so a pass never degenerates into one block.
std::vector<std::size_t> cascade_block_sizes(const CascadeConfig& config, double qber_estimate,
                                             std::size_t n);

/// Per-pass shuffles shared by both ends. order(p)[pos] is the key index
/// sitting at permuted position pos in pass p.
class CascadePermutations {
 public:
  CascadePermutations(std::size_t n, std::size_t num_passes, const Seed& shuffle_seed);

  std::size_t size() const noexcept { return n_; }
  std::size_t passes() const noexcept { return order_.size(); }
  std::span<const std::uint32_t> order(std::size_t pass) const { return order_.at(pass); }
  std::span<const std::uint32_t> position(std::size_t pass) const { return position_.at(pass); }

 private:
  std::size_t n_;
  std::vector<std::vector<std::uint32_t>> order_;
  std::vector<std::vector<std::uint32_t>> position_;
};

/// Parity of permuted positions [lo, hi) of one pass.
struct ParityQuery {
  std::uint32_t pass = 0;
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;
  bool operator==(const ParityQuery&) const = default;
};

/// One parity bit disclosed by Alice, as recorded for audit.
struct ParityRecord {
  std::uint32_t pass;
  std::uint32_t block;
  std::uint32_t lo;
  std::uint32_t hi;
  bool parity;
};

void write_transcript_csv(std::ostream& out, std::span<const ParityRecord> transcript);

/// Bob's view of the interactive link to Alice. One batch per call; calls are
/// strictly alternating request/response. May throw TransportError.
class ParityChannel {
 public:
  virtual ~ParityChannel() = default;
  virtual std::vector<bool> ask(std::span<const ParityQuery> queries) = 0;
};

/// Alice's side: answers parity queries on her key.
class CascadeResponder {
 public:
  CascadeResponder(const BitVector& key, std::size_t num_passes, const Seed& shuffle_seed);

  /// Throws ProtocolViolation for malformed queries.
  std::vector<bool> answer(std::span<const ParityQuery> queries) const;
  std::size_t answered() const noexcept { return answered_; }

 private:
  CascadePermutations perms_;
  std::vector<BitVector> keys_;
  mutable std::size_t answered_ = 0;
};

/// In-process channel straight to a responder.
class LocalParityChannel : public ParityChannel {
 public:
  explicit LocalParityChannel(const CascadeResponder& alice) : alice_(alice) {}
  std::vector<bool> ask(std::span<const ParityQuery> queries) override {
    ++exchanges_;
    return alice_.answer(queries);
  }
  std::size_t exchanges() const noexcept { return exchanges_; }

 private:
  const CascadeResponder& alice_;
  std::size_t exchanges_ = 0;
};

struct CascadeResult {
  BitVector corrected_key;
  std::size_t leaked_bits = 0;      // parities disclosed by Alice
  std::size_t parity_messages = 0;  // request + response messages
  std::size_t exchanges = 0;
  std::size_t corrections = 0;
  std::vector<std::size_t> block_sizes;
  std::vector<ParityRecord> transcript;
};

/// Bob's Cascade: shuffled passes with doubling block sizes, binary search in
/// odd blocks, and backtracking through every other pass after each fix.
///
/// The top-level parities of all passes are fetched in the first exchange.
/// Bisections of disjoint blocks then advance in lock-step, one parity per
/// block per exchange, so the whole run costs a few times log2(block) round
/// trips rather than one per parity. Odd blocks are started earlier passes
/// first, and a block whose bits overlap a running bisection waits for it.
///
/// qber_estimate = 0 means "keys expected identical": one round of first-pass
/// parities is checked and any odd block raises ResidualErrorReport.
CascadeResult cascade_reconcile(const BitVector& bob_key, double qber_estimate,
                                const CascadeConfig& config, ParityChannel& channel);

}  // namespace cowqkd
