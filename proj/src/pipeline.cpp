#include "traffic/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "traffic/queue.hpp"
#include "traffic/reorder.hpp"

namespace traffic {

namespace {

using Clock = std::chrono::steady_clock;
using EnvQueue = BoundedQueue<FrameEnvelope>;

struct StageRuntime {
  const StageSpec* spec = nullptr;
  EnvQueue* in = nullptr;
  EnvQueue* out = nullptr;
  // Bound 0: a worker keeps hold of its batch until its turn to emit, so
  // stage memory stays at worker_count * batch_size envelopes.
  ReorderBuffer reorder{0, 0};
  std::mutex emit_mu;
  std::condition_variable emit_cv;
  std::atomic<int> live_workers{0};
  std::atomic<std::int64_t> busy_ns{0};
  std::atomic<std::int64_t> batches{0};
  std::atomic<std::int64_t> skipped{0};
};

struct ErrorRecord {
  std::string stage;
  std::int64_t seq = 0;
  std::string detail;
};

class Engine {
 public:
  explicit Engine(const PipelineSpec& spec) : spec_(spec) {
    for (const auto& st : spec_.stages) {
      queues_.push_back(std::make_unique<EnvQueue>(st.queue_capacity));
    }
    queues_.push_back(std::make_unique<EnvQueue>(spec_.sink_queue_capacity));
    stages_.resize(spec_.stages.size());
    for (std::size_t i = 0; i < spec_.stages.size(); ++i) {
      auto& s = stages_[i];
      s.spec = &spec_.stages[i];
      s.in = queues_[i].get();
      s.out = queues_[i + 1].get();
      s.live_workers = s.spec->worker_count;
    }
  }

  RunStats run() {
    const auto wall0 = Clock::now();
    std::vector<std::thread> threads;
    threads.emplace_back([this] { source_loop(); });
    for (auto& s : stages_) {
      for (int w = 0; w < s.spec->worker_count; ++w) {
        threads.emplace_back([this, &s] { worker_loop(s); });
      }
    }
    threads.emplace_back([this] { sink_loop(); });
    for (auto& t : threads) t.join();

    RunStats stats;
    stats.frames_in = frames_in_.load();
    stats.frames_out = frames_out_.load();
    stats.peak_in_flight = peak_in_flight_.load();
    stats.wall_ms =
        std::chrono::duration<double, std::milli>(Clock::now() - wall0).count();
    for (const auto& s : stages_) {
      stats.stages.push_back({s.spec->name, s.busy_ns.load() / 1e6,
                              s.batches.load(), s.skipped.load()});
    }
    for (std::size_t i = 0; i < queues_.size(); ++i) {
      const std::string name =
          i < spec_.stages.size() ? "in:" + spec_.stages[i].name : "in:sink";
      stats.queues.push_back({name, queues_[i]->capacity(), queues_[i]->high_water()});
    }
    {
      std::lock_guard lk(incident_mu_);
      stats.incidents = incidents_;
    }
    {
      std::lock_guard lk(err_mu_);
      if (error_) {
        throw StageFailure(error_->stage, error_->seq, error_->detail, stats);
      }
    }
    return stats;
  }

 private:
  void fail(const std::string& stage, std::int64_t seq, const std::string& detail) {
    {
      std::lock_guard lk(err_mu_);
      if (!error_) error_ = ErrorRecord{stage, seq, detail};
    }
    aborted_.store(true);
    for (auto& q : queues_) q->abort();
    for (auto& s : stages_) s.emit_cv.notify_all();
  }

  void note_in_flight_increase() {
    const std::int64_t cur = in_flight_.fetch_add(1) + 1;
    std::int64_t peak = peak_in_flight_.load();
    while (cur > peak && !peak_in_flight_.compare_exchange_weak(peak, cur)) {
    }
  }

  void source_loop() {
    std::int64_t next_seq = 0;
    while (!aborted_.load()) {
      std::optional<Frame> frame;
      try {
        frame = spec_.source();
      } catch (const std::exception& e) {
        fail("source", next_seq, e.what());
        return;
      }
      if (!frame) break;
      if (frame->seq() != next_seq) {
        fail("source", frame->seq(), "source frames must have contiguous seq from 0");
        return;
      }
      ++next_seq;
      if (!queues_.front()->push(FrameEnvelope(std::move(*frame)))) return;
      frames_in_.fetch_add(1);
      note_in_flight_increase();
    }
    if (!aborted_.load()) queues_.front()->close();
  }

  // Emits a contiguous batch downstream in seq order. Workers whose turn
  // has not come wait here, holding their processed envelopes.
  bool ordered_emit(StageRuntime& s, std::vector<FrameEnvelope>&& batch) {
    std::unique_lock lk(s.emit_mu);
    const std::int64_t front = batch.front().seq();
    s.emit_cv.wait(lk, [&] { return aborted_.load() || s.reorder.ready_for(front); });
    if (aborted_.load()) return false;
    for (auto& env : batch) {
      for (auto& out : s.reorder.accept(std::move(env))) {
        if (!s.out->push(std::move(out))) return false;
      }
    }
    s.emit_cv.notify_all();
    return true;
  }

  void worker_loop(StageRuntime& s) {
    const auto n = static_cast<std::size_t>(s.spec->batch_size);
    for (;;) {
      auto batch = s.in->pop_batch(n);
      if (batch.empty()) break;
      const std::int64_t front_seq = batch.front().seq();
      const std::size_t count = batch.size();
      s.batches.fetch_add(1);
      const auto t0 = Clock::now();
      bool ok = true;
      if (s.spec->failure == FailurePolicy::SkipFrame) {
        std::vector<FrameEnvelope> backup = batch;
        try {
          s.spec->task(batch);
        } catch (const std::exception&) {
          batch = std::move(backup);
          s.skipped.fetch_add(static_cast<std::int64_t>(count));
          std::lock_guard lk(incident_mu_);
          incidents_.emplace_back(s.spec->name, front_seq);
        }
      } else {
        try {
          s.spec->task(batch);
        } catch (const std::exception& e) {
          fail(s.spec->name, front_seq, e.what());
          ok = false;
        }
      }
      s.busy_ns.fetch_add(
          std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0)
              .count());
      if (!ok) break;
      if (batch.size() != count || batch.front().seq() != front_seq) {
        fail(s.spec->name, front_seq, "task altered the envelope batch shape");
        break;
      }
      if (!ordered_emit(s, std::move(batch))) break;
    }
    if (s.live_workers.fetch_sub(1) == 1 && !aborted_.load()) {
      s.out->close();
    }
  }

  void sink_loop() {
    std::int64_t expected = 0;
    for (;;) {
      auto env = queues_.back()->pop();
      if (!env) break;
      in_flight_.fetch_sub(1);
      if (env->seq() != expected) {
        fail("sink", env->seq(), "out-of-order delivery to sink");
        return;
      }
      ++expected;
      try {
        for (const auto& sink : spec_.sinks) sink(*env);
      } catch (const std::exception& e) {
        fail("sink", env->seq(), e.what());
        return;
      }
      frames_out_.fetch_add(1);
    }
  }

  const PipelineSpec& spec_;
  std::vector<std::unique_ptr<EnvQueue>> queues_;
  std::deque<StageRuntime> stages_;

  std::atomic<bool> aborted_{false};
  std::mutex err_mu_;
  std::optional<ErrorRecord> error_;
  std::mutex incident_mu_;
  std::vector<std::pair<std::string, std::int64_t>> incidents_;

  std::atomic<std::int64_t> frames_in_{0};
  std::atomic<std::int64_t> frames_out_{0};
  std::atomic<std::int64_t> in_flight_{0};
  std::atomic<std::int64_t> peak_in_flight_{0};
};

}  // namespace

Pipeline Pipeline::build(PipelineSpec spec) {
  if (!spec.source) throw std::invalid_argument("Pipeline: missing source");
  if (spec.sinks.empty()) throw std::invalid_argument("Pipeline: at least one sink required");
  for (const auto& sink : spec.sinks) {
    if (!sink) throw std::invalid_argument("Pipeline: null sink");
  }
  if (spec.sink_queue_capacity < 1) {
    throw std::invalid_argument("Pipeline: sink_queue_capacity must be >= 1");
  }
  std::vector<std::string> names;
  for (const auto& st : spec.stages) {
    if (st.name.empty()) throw std::invalid_argument("Pipeline: empty stage name");
    if (!st.task) throw std::invalid_argument("Pipeline: stage '" + st.name + "' has no task");
    if (st.worker_count < 1 || st.batch_size < 1 || st.queue_capacity < 1) {
      throw std::invalid_argument("Pipeline: stage '" + st.name +
                                  "' has non-positive worker/batch/queue parameter");
    }
    if (st.queue_capacity < st.batch_size) {
      throw std::invalid_argument("Pipeline: stage '" + st.name +
                                  "' queue_capacity must be >= batch_size");
    }
    for (const auto& n : names) {
      if (n == st.name) {
        throw std::invalid_argument("Pipeline: duplicate stage name '" + st.name + "'");
      }
    }
    names.push_back(st.name);
  }
  return Pipeline(std::move(spec));
}

RunStats Pipeline::run() {
  Engine engine(spec_);
  return engine.run();
}

std::size_t Pipeline::worker_count() const {
  std::size_t n = 0;
  for (const auto& st : spec_.stages) n += static_cast<std::size_t>(st.worker_count);
  return n;
}

std::size_t Pipeline::queue_count() const { return spec_.stages.size() + 1; }

std::vector<std::vector<FrameEnvelope>> batch_window(
    int batch_size, std::vector<FrameEnvelope> envs) {
  if (batch_size < 1) throw std::invalid_argument("batch_window: batch_size must be >= 1");
  std::vector<std::vector<FrameEnvelope>> batches;
  std::vector<FrameEnvelope> cur;
  cur.reserve(static_cast<std::size_t>(batch_size));
  for (auto& e : envs) {
    cur.push_back(std::move(e));
    if (cur.size() == static_cast<std::size_t>(batch_size)) {
      batches.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) batches.push_back(std::move(cur));
  return batches;
}

}  // namespace traffic
