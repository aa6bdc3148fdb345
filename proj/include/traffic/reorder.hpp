#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "traffic/envelope.hpp"

namespace traffic {

// Restores source sequence order behind a pool of stage workers that may
// complete out of order. accept() returns the maximal contiguous run
// starting at the next expected seq (possibly empty). Out-of-order
// envelopes are held, up to max_buffered; callers must stall before
// submitting beyond that (ready_for is the gate).
class ReorderBuffer {
 public:
  explicit ReorderBuffer(std::int64_t first_expected = 0,
                         std::size_t max_buffered = std::numeric_limits<std::size_t>::max())
      : next_expected_(first_expected), max_buffered_(max_buffered) {}

  // True when accept(seq) may be called without exceeding the bound.
  bool ready_for(std::int64_t seq) const {
    return seq == next_expected_ || pending_.size() < max_buffered_;
  }

  // Throws std::invalid_argument on a duplicate seq, std::logic_error when
  // the caller ignored ready_for.
  std::vector<FrameEnvelope> accept(FrameEnvelope env);

  std::int64_t next_expected() const { return next_expected_; }
  std::size_t buffered() const { return pending_.size(); }
  std::size_t max_buffered() const { return max_buffered_; }

 private:
  std::int64_t next_expected_;
  std::size_t max_buffered_;
  std::map<std::int64_t, FrameEnvelope> pending_;
};

}  // namespace traffic
