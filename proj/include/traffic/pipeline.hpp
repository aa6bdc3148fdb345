#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "traffic/envelope.hpp"
#include "traffic/frame.hpp"

namespace traffic {

enum class FailurePolicy { FailFast, SkipFrame };

// A per-batch transformation over envelopes (batch_size 1 = per frame).
// Invoked concurrently when worker_count > 1; stateful tasks must run with
// worker_count 1.
using StageFn = std::function<void(std::vector<FrameEnvelope>&)>;

// Pulls the next frame; nullopt at end of stream. Frames must arrive with
// contiguous seq starting at 0.
using SourceFn = std::function<std::optional<Frame>()>;

using SinkFn = std::function<void(const FrameEnvelope&)>;

struct StageSpec {
  std::string name;
  StageFn task;
  int worker_count = 1;
  int batch_size = 1;
  int queue_capacity = 8;  // capacity of this stage's input queue
  FailurePolicy failure = FailurePolicy::FailFast;
};

struct PipelineSpec {
  SourceFn source;
  std::vector<StageSpec> stages;
  std::vector<SinkFn> sinks;
  int sink_queue_capacity = 8;
};

struct StageStats {
  std::string name;
  double busy_ms = 0.0;
  std::int64_t batches = 0;
  std::int64_t skipped = 0;  // frames passed through by the skip-frame policy
};

struct QueueStats {
  std::string name;
  std::size_t capacity = 0;
  std::size_t high_water = 0;
};

struct RunStats {
  std::int64_t frames_in = 0;
  std::int64_t frames_out = 0;
  double wall_ms = 0.0;
  // Peak number of envelopes held inside the pipeline (queues + stage
  // workers) at any instant.
  std::int64_t peak_in_flight = 0;
  std::vector<StageStats> stages;
  std::vector<QueueStats> queues;
  std::vector<std::pair<std::string, std::int64_t>> incidents;  // (stage, seq)
};

// Thrown by Pipeline::run under the fail-fast policy. Carries the stats
// accumulated up to the abort.
class StageFailure : public std::runtime_error {
 public:
  StageFailure(std::string stage, std::int64_t seq, const std::string& detail,
               RunStats stats)
      : std::runtime_error("stage '" + stage + "' failed at seq " +
                           std::to_string(seq) + ": " + detail),
        stage_(std::move(stage)),
        seq_(seq),
        stats_(std::move(stats)) {}

  const std::string& stage() const { return stage_; }
  std::int64_t seq() const { return seq_; }
  const RunStats& stats() const { return stats_; }

 private:
  std::string stage_;
  std::int64_t seq_;
  RunStats stats_;
};

class Pipeline {
 public:
  // Validates the spec (duplicate names, parameter ranges, at least one
  // sink) without starting any work.
  static Pipeline build(PipelineSpec spec);

  // Runs source -> stages -> sinks to exhaustion. Every frame traverses
  // every stage exactly once and reaches the sinks in source order.
  RunStats run();

  std::size_t worker_count() const;  // stage workers (source/sink excluded)
  std::size_t queue_count() const;

 private:
  explicit Pipeline(PipelineSpec spec) : spec_(std::move(spec)) {}
  PipelineSpec spec_;
};

// Groups consecutive envelopes into batches of batch_size, final partial
// batch included. Order is preserved within and across batches.
std::vector<std::vector<FrameEnvelope>> batch_window(
    int batch_size, std::vector<FrameEnvelope> envs);

}  // namespace traffic
