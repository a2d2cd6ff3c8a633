// Copyright 2026 The cowqkd Authors
// SPDX-License-Identifier: Apache-2.0

#include "cowqkd/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "cowqkd/errors.hpp"

namespace cowqkd {

std::size_t default_initial_block(double qber_estimate, std::size_t n) {
  const double q = std::max(qber_estimate, 0.001);
  const auto k = static_cast<std::size_t>(std::ceil(0.73 / q));
  const std::size_t cap = std::max<std::size_t>(2, n / 2);
  return std::min(std::max<std::size_t>(k, 8), cap);
}

std::vector<std::size_t> cascade_block_sizes(const CascadeConfig& config, double qber_estimate,
                                             std::size_t n) {
  if (config.num_passes == 0) {
    throw ParameterError("Cascade needs at least one pass");
  }
  std::size_t k = config.initial_block_fn ? config.initial_block_fn(qber_estimate, n)
                                          : default_initial_block(qber_estimate, n);
  if (k < 2) {
    throw ParameterError("Cascade initial block size must be >= 2");
  }
  const std::size_t cap = std::max<std::size_t>(2, n / 2);
  std::vector<std::size_t> sizes;
  for (std::size_t p = 0; p < config.num_passes; ++p) {
    sizes.push_back(std::min(k, cap));
    k *= 2;
  }
  return sizes;
}

CascadePermutations::CascadePermutations(std::size_t n, std::size_t num_passes,
                                         const Seed& shuffle_seed)
    : n_(n) {
  if (n > 0xFFFFFFFFu) {
    throw ParameterError("Cascade key too long");
  }
  const BitSource root(shuffle_seed);
  for (std::size_t p = 0; p < num_passes; ++p) {
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0U);
    if (p > 0) {
      BitSource rng = root.fork("cascade-pass-" + std::to_string(p));
      for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(order[i - 1], order[j]);
      }
    }
    std::vector<std::uint32_t> position(n);
    for (std::size_t pos = 0; pos < n; ++pos) {
      position[order[pos]] = static_cast<std::uint32_t>(pos);
    }
    order_.push_back(std::move(order));
    position_.push_back(std::move(position));
  }
}

void write_transcript_csv(std::ostream& out, std::span<const ParityRecord> transcript) {
  out << "pass,block,lo,hi,parity\n";
  for (const auto& r : transcript) {
    out << r.pass << ',' << r.block << ',' << r.lo << ',' << r.hi << ',' << int{r.parity} << '\n';
  }
}

CascadeResponder::CascadeResponder(const BitVector& key, std::size_t num_passes,
                                   const Seed& shuffle_seed)
    : perms_(key.size(), num_passes, shuffle_seed) {
  for (std::size_t p = 0; p < num_passes; ++p) {
    BitVector permuted(key.size());
    const auto order = perms_.order(p);
    for (std::size_t pos = 0; pos < key.size(); ++pos) {
      permuted.set(pos, key.get(order[pos]));
    }
    keys_.push_back(std::move(permuted));
  }
}

std::vector<bool> CascadeResponder::answer(std::span<const ParityQuery> queries) const {
  std::vector<bool> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    if (q.pass >= keys_.size() || q.lo >= q.hi || q.hi > perms_.size()) {
      throw ProtocolViolation("malformed parity query (pass " + std::to_string(q.pass) + ", [" +
                              std::to_string(q.lo) + ", " + std::to_string(q.hi) + "))");
    }
    out.push_back(keys_[q.pass].parity(q.lo, q.hi));
  }
  answered_ += queries.size();
  return out;
}

namespace {

class BobCascade {
 public:
  BobCascade(const BitVector& key, std::vector<std::size_t> sizes, const Seed& seed,
             ParityChannel& channel)
      : n_(key.size()),
        sizes_(std::move(sizes)),
        perms_(n_, sizes_.size(), seed),
        channel_(channel),
        alice_top_(sizes_.size()),
        bob_top_(sizes_.size()),
        claimed_(n_, 0) {
    for (std::size_t p = 0; p < sizes_.size(); ++p) {
      BitVector permuted(n_);
      const auto order = perms_.order(p);
      for (std::size_t pos = 0; pos < n_; ++pos) {
        permuted.set(pos, key.get(order[pos]));
      }
      keys_.push_back(std::move(permuted));
    }
    result_.block_sizes = sizes_;
  }

  // All top-level parities go out in the first exchange. Odd blocks of every
  // pass are then bisected as soon as they do not overlap a running
  // bisection, earlier passes first.
  CascadeResult run() {
    std::vector<ParityQuery> tops;
    for (std::size_t pass = 0; pass < sizes_.size(); ++pass) {
      for (std::size_t b = 0; b < blocks_in(pass); ++b) {
        tops.push_back({static_cast<std::uint32_t>(pass), block_lo(pass, b), block_hi(pass, b)});
      }
    }
    record_tops(tops, exchange(tops));
    for (;;) {
      start_bisections();
      if (active_.empty()) {
        break;
      }
      round();
    }
    return finish();
  }

  // Only first-pass parities; reports disagreement instead of fixing it.
  CascadeResult check_only() {
    reveal_top(0);
    std::size_t odd = 0;
    for (std::size_t b = 0; b < alice_top_[0].size(); ++b) {
      odd += alice_top_[0][b] != bob_top_[0][b];
    }
    if (odd > 0) {
      throw ResidualErrorReport(
          "reconciliation expected identical keys but " + std::to_string(odd) +
              " first-pass blocks disagree",
          odd);
    }
    return finish();
  }

 private:
  struct Bisection {
    std::uint32_t pass;
    std::uint32_t block;
    std::uint32_t lo;
    std::uint32_t hi;
    bool alice_parity;
  };

  std::size_t blocks_in(std::size_t pass) const { return (n_ + sizes_[pass] - 1) / sizes_[pass]; }
  std::uint32_t block_lo(std::size_t pass, std::size_t b) const {
    return static_cast<std::uint32_t>(b * sizes_[pass]);
  }
  std::uint32_t block_hi(std::size_t pass, std::size_t b) const {
    return static_cast<std::uint32_t>(std::min(n_, (b + 1) * sizes_[pass]));
  }

  std::vector<bool> exchange(const std::vector<ParityQuery>& queries) {
    auto answers = channel_.ask(queries);
    if (answers.size() != queries.size()) {
      throw ProtocolViolation("parity response has " + std::to_string(answers.size()) +
                              " bits for " + std::to_string(queries.size()) + " queries");
    }
    ++result_.exchanges;
    result_.leaked_bits += answers.size();
    return answers;
  }

  void reveal_top(std::size_t pass) {
    std::vector<ParityQuery> queries;
    for (std::size_t b = 0; b < blocks_in(pass); ++b) {
      queries.push_back({static_cast<std::uint32_t>(pass), block_lo(pass, b), block_hi(pass, b)});
    }
    record_tops(queries, exchange(queries));
  }

  // Queries are whole blocks, grouped by pass in block order.
  void record_tops(const std::vector<ParityQuery>& queries, const std::vector<bool>& answers) {
    for (std::size_t k = 0; k < queries.size(); ++k) {
      const auto& q = queries[k];
      const std::size_t b = q.lo / sizes_[q.pass];
      alice_top_[q.pass].push_back(answers[k]);
      bob_top_[q.pass].push_back(keys_[q.pass].parity(q.lo, q.hi));
      result_.transcript.push_back({q.pass, static_cast<std::uint32_t>(b), q.lo, q.hi, answers[k]});
    }
  }

  bool try_claim(std::size_t pass, std::size_t b) {
    const auto order = perms_.order(pass);
    const std::uint32_t lo = block_lo(pass, b);
    const std::uint32_t hi = block_hi(pass, b);
    for (std::uint32_t pos = lo; pos < hi; ++pos) {
      if (claimed_[order[pos]]) {
        return false;
      }
    }
    for (std::uint32_t pos = lo; pos < hi; ++pos) {
      claimed_[order[pos]] = 1;
    }
    return true;
  }

  void release(std::size_t pass, std::size_t b) {
    const auto order = perms_.order(pass);
    for (std::uint32_t pos = block_lo(pass, b); pos < block_hi(pass, b); ++pos) {
      claimed_[order[pos]] = 0;
    }
  }

  void start_bisections() {
    for (std::size_t p = 0; p < sizes_.size(); ++p) {
      for (std::size_t b = 0; b < alice_top_[p].size(); ++b) {
        if (alice_top_[p][b] == bob_top_[p][b]) {
          continue;
        }
        if (!try_claim(p, b)) {
          continue;  // already running, or overlaps a running bisection
        }
        active_.push_back({static_cast<std::uint32_t>(p), static_cast<std::uint32_t>(b),
                           block_lo(p, b), block_hi(p, b), alice_top_[p][b] != 0});
      }
    }
  }

  void round() {
    std::vector<ParityQuery> queries;
    std::vector<std::size_t> asking;
    for (std::size_t i = 0; i < active_.size(); ++i) {
      const auto& a = active_[i];
      if (a.hi - a.lo >= 2) {
        queries.push_back({a.pass, a.lo, a.lo + (a.hi - a.lo) / 2});
        asking.push_back(i);
      }
    }
    if (!queries.empty()) {
      const auto answers = exchange(queries);
      for (std::size_t k = 0; k < asking.size(); ++k) {
        auto& a = active_[asking[k]];
        const std::uint32_t mid = queries[k].hi;
        const bool alice_left = answers[k];
        result_.transcript.push_back({a.pass, a.block, a.lo, mid, alice_left});
        if (keys_[a.pass].parity(a.lo, mid) != alice_left) {
          a.hi = mid;
          a.alice_parity = alice_left;
        } else {
          a.lo = mid;
          a.alice_parity = a.alice_parity != alice_left;
        }
      }
    }

    std::vector<std::uint32_t> found;
    std::vector<Bisection> still;
    for (const auto& a : active_) {
      if (a.hi - a.lo == 1) {
        found.push_back(perms_.order(a.pass)[a.lo]);
        release(a.pass, a.block);
      } else {
        still.push_back(a);
      }
    }
    active_ = std::move(still);
    std::sort(found.begin(), found.end());
    found.erase(std::unique(found.begin(), found.end()), found.end());
    for (auto idx : found) {
      flip(idx);
    }
  }

  void flip(std::uint32_t idx) {
    ++result_.corrections;
    for (std::size_t p = 0; p < sizes_.size(); ++p) {
      const std::uint32_t pos = perms_.position(p)[idx];
      keys_[p].flip(pos);
      if (!bob_top_[p].empty()) {
        bob_top_[p][pos / sizes_[p]] ^= 1;
      }
    }
  }

  CascadeResult finish() {
    BitVector out(n_);
    for (std::size_t pos = 0; pos < n_; ++pos) {
      out.set(pos, keys_[0].get(pos));  // pass 0 is the identity order
    }
    result_.corrected_key = std::move(out);
    result_.parity_messages = 2 * result_.exchanges;
    return std::move(result_);
  }

  std::size_t n_;
  std::vector<std::size_t> sizes_;
  CascadePermutations perms_;
  ParityChannel& channel_;
  std::vector<BitVector> keys_;
  std::vector<std::vector<std::uint8_t>> alice_top_;
  std::vector<std::vector<std::uint8_t>> bob_top_;
  std::vector<std::uint8_t> claimed_;
  std::vector<Bisection> active_;
  CascadeResult result_;
};

}  // namespace

CascadeResult cascade_reconcile(const BitVector& bob_key, double qber_estimate,
                                const CascadeConfig& config, ParityChannel& channel) {
  if (!(qber_estimate >= 0.0 && qber_estimate <= 0.5)) {
    throw ParameterError("cascade_reconcile: qber_estimate must be in [0, 0.5]");
  }
  if (bob_key.size() < 2) {
    throw ParameterError("cascade_reconcile: key must have at least 2 bits");
  }
  auto sizes = cascade_block_sizes(config, qber_estimate, bob_key.size());
  if (bob_key.size() < sizes.front()) {
    throw ParameterError("cascade_reconcile: key shorter than the initial block");
  }
  BobCascade bob(bob_key, std::move(sizes), config.shuffle_seed, channel);
  return qber_estimate == 0.0 ? bob.check_only() : bob.run();
}

}  // namespace cowqkd
