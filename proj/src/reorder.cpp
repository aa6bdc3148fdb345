#include "traffic/reorder.hpp"

#include <stdexcept>
#include <string>

namespace traffic {

std::vector<FrameEnvelope> ReorderBuffer::accept(FrameEnvelope env) {
  const std::int64_t seq = env.seq();
  if (seq < next_expected_ || pending_.count(seq) > 0) {
    throw std::invalid_argument("ReorderBuffer: duplicate seq " + std::to_string(seq));
  }
  std::vector<FrameEnvelope> run;
  if (seq == next_expected_) {
    run.push_back(std::move(env));
    ++next_expected_;
    for (auto it = pending_.begin();
         it != pending_.end() && it->first == next_expected_;) {
      run.push_back(std::move(it->second));
      it = pending_.erase(it);
      ++next_expected_;
    }
    return run;
  }
  if (pending_.size() >= max_buffered_) {
    throw std::logic_error("ReorderBuffer: bound exceeded; caller must stall");
  }
  pending_.emplace(seq, std::move(env));
  return run;
}

}  // namespace traffic
