#include "pflow/chunkpipe.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <optional>
#include <string>

#include "pflow/error.hpp"
#include "pflow/kernels.hpp"
#include "pflow/parallel.hpp"

namespace pflow::chunkpipe {

struct ChunkPipeline::Job {
  std::uint64_t id = 0;
  PipelineConfig config;
  std::shared_ptr<const Bytes> owned;
  ByteSpan input;
  ChunkPlan plan;
  std::atomic<JobStatus> status{JobStatus::Queued};

  // Compressed payloads; nullopt marks a chunk stored raw.
  std::vector<std::optional<Bytes>> results;

  std::mutex mu;
  std::condition_variable cv;
  std::size_t completed = 0;
  bool failed = false;
  std::size_t error_chunk = 0;
  std::string error_message;

  Bytes output;
};

namespace {

void write_container(Bytes& out, CodecId codec, std::size_t chunk_size, ByteSpan input, std::uint32_t crc,
                     const ChunkPlan& plan, const std::function<std::optional<ByteSpan>(std::size_t)>& payload_of) {
  std::size_t total = kContainerHeaderSize;
  for (std::size_t i = 0; i < plan.ranges.size(); ++i) {
    const auto p = payload_of(i);
    total += kChunkHeaderSize + (p ? p->size() : plan.ranges[i].size());
  }
  out.clear();
  out.reserve(total);
  ByteWriter w(out);
  w.raw(ByteSpan(kMagic));
  w.u16(kVersion);
  w.u8(static_cast<std::uint8_t>(codec));
  w.u32(static_cast<std::uint32_t>(chunk_size));
  w.u64(input.size());
  w.u32(crc);
  w.u32(static_cast<std::uint32_t>(plan.ranges.size()));
  for (std::size_t i = 0; i < plan.ranges.size(); ++i) {
    const auto p = payload_of(i);
    const ByteSpan payload = p ? *p : input.subspan(plan.ranges[i].begin, plan.ranges[i].size());
    w.u8(p ? 0 : 1);
    w.u32(static_cast<std::uint32_t>(payload.size()));
    w.raw(payload);
  }
}

}  // namespace

ChunkPlan plan_chunks(std::size_t input_len, std::size_t chunk_size) {
  if (chunk_size < kMinChunkSize || chunk_size > kMaxChunkSize) {
    throw Error(ErrorCode::BadChunkSize, "chunk size " + std::to_string(chunk_size) + " outside [" +
                                             std::to_string(kMinChunkSize) + ", " + std::to_string(kMaxChunkSize) + "]");
  }
  ChunkPlan plan;
  plan.chunk_size = chunk_size;
  plan.ranges.reserve((input_len + chunk_size - 1) / chunk_size);
  for (std::size_t begin = 0; begin < input_len; begin += chunk_size) {
    plan.ranges.push_back({begin, std::min(input_len, begin + chunk_size)});
  }
  return plan;
}

void PipelineConfig::validate() const {
  plan_chunks(0, chunk_size);
  if (window < chunk_size) {
    throw Error(ErrorCode::WindowTooSmall, "window " + std::to_string(window) + " is smaller than chunk size " +
                                               std::to_string(chunk_size));
  }
  if (workers == 0) throw Error(ErrorCode::InvalidArgument, "pipeline needs at least one worker");
}

std::string_view job_status_name(JobStatus s) noexcept {
  switch (s) {
    case JobStatus::Queued: return "queued";
    case JobStatus::Running: return "running";
    case JobStatus::Done: return "done";
    case JobStatus::Failed: return "failed";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// ChunkPipeline

ChunkPipeline::ChunkPipeline(std::size_t workers, PipelineHooks hooks) : hooks_(std::move(hooks)) {
  if (workers == 0) throw Error(ErrorCode::InvalidArgument, "pipeline needs at least one worker");
  workers_.reserve(workers);
  for (std::size_t i = 0; i < workers; ++i) workers_.emplace_back([this] { worker_loop(); });
  dispatcher_ = std::jthread([this] { dispatcher_loop(); });
}

ChunkPipeline::~ChunkPipeline() { shutdown(); }

JobTicket ChunkPipeline::submit(Bytes input, const PipelineConfig& config) {
  config.validate();
  auto job = std::make_shared<Job>();
  job->config = config;
  job->owned = std::make_shared<const Bytes>(std::move(input));
  job->input = *job->owned;
  return enqueue(std::move(job));
}

JobTicket ChunkPipeline::submit_view(ByteSpan input, const PipelineConfig& config) {
  config.validate();
  auto job = std::make_shared<Job>();
  job->config = config;
  job->input = input;
  return enqueue(std::move(job));
}

JobTicket ChunkPipeline::enqueue(std::shared_ptr<Job> job) {
  std::lock_guard lock(mu_);
  if (!accepting_) throw Error(ErrorCode::PipelineShutdown, "pipeline no longer accepts jobs");
  job->id = next_id_++;
  jobs_.emplace(job->id, job);
  pending_.push_back(job);
  jobs_cv_.notify_one();
  return JobTicket{job->id};
}

JobStatus ChunkPipeline::poll(const JobTicket& ticket) const {
  std::lock_guard lock(mu_);
  const auto it = jobs_.find(ticket.id);
  if (it == jobs_.end()) throw Error(ErrorCode::UnknownJob, "no job " + std::to_string(ticket.id));
  return it->second->status.load();
}

Bytes ChunkPipeline::await_result(const JobTicket& ticket) {
  std::shared_ptr<Job> job;
  {
    std::unique_lock lock(mu_);
    const auto it = jobs_.find(ticket.id);
    if (it == jobs_.end()) throw Error(ErrorCode::UnknownJob, "no job " + std::to_string(ticket.id));
    job = it->second;
    done_cv_.wait(lock, [&] {
      const JobStatus s = job->status.load();
      return s == JobStatus::Done || s == JobStatus::Failed;
    });
    jobs_.erase(ticket.id);
  }
  if (job->status.load() == JobStatus::Failed) {
    throw Error(ErrorCode::JobFailed, "chunk " + std::to_string(job->error_chunk) + ": " + job->error_message,
                job->error_chunk);
  }
  return std::move(job->output);
}

void ChunkPipeline::shutdown() {
  {
    std::lock_guard lock(mu_);
    if (shut_down_) return;
    shut_down_ = true;
    accepting_ = false;
    stopping_ = true;
  }
  jobs_cv_.notify_all();
  if (dispatcher_.joinable()) dispatcher_.join();
  {
    std::lock_guard lock(mu_);
    workers_stop_ = true;
  }
  tasks_cv_.notify_all();
  for (auto& w : workers_) {
    if (w.joinable()) w.join();
  }
}

PipelineStats ChunkPipeline::stats() const {
  PipelineStats s;
  {
    std::lock_guard lock(window_mu_);
    s.max_in_flight = max_in_flight_;
    s.window_violations = window_violations_;
  }
  s.live_chunk_buffers = live_chunk_buffers_.load();
  std::lock_guard lock(mu_);
  s.tracked_jobs = jobs_.size();
  return s;
}

void ChunkPipeline::window_acquire(std::size_t n) {
  std::unique_lock lock(window_mu_);
  window_cv_.wait(lock, [&] { return in_flight_ + n <= window_limit_; });
  in_flight_ += n;
  if (in_flight_ > window_limit_) ++window_violations_;
  max_in_flight_ = std::max(max_in_flight_, in_flight_);
}

void ChunkPipeline::window_release(std::size_t n) {
  {
    std::lock_guard lock(window_mu_);
    in_flight_ -= n;
  }
  window_cv_.notify_all();
}

void ChunkPipeline::dispatcher_loop() {
  for (;;) {
    std::shared_ptr<Job> job;
    {
      std::unique_lock lock(mu_);
      jobs_cv_.wait(lock, [&] { return !pending_.empty() || stopping_; });
      if (pending_.empty()) return;
      job = std::move(pending_.front());
      pending_.pop_front();
    }
    job->status = JobStatus::Running;
    {
      std::lock_guard lock(window_mu_);
      window_limit_ = job->config.window;
    }
    job->plan = plan_chunks(job->input.size(), job->config.chunk_size);
    job->results.assign(job->plan.ranges.size(), std::nullopt);

    std::size_t dispatched = 0;
    for (std::size_t i = 0; i < job->plan.ranges.size(); ++i) {
      {
        std::lock_guard lock(job->mu);
        if (job->failed) break;
      }
      const std::size_t len = job->plan.ranges[i].size();
      window_acquire(len);
      if (hooks_.on_dispatch) hooks_.on_dispatch(len);
      {
        std::lock_guard lock(mu_);
        tasks_.push_back({job, i});
      }
      tasks_cv_.notify_one();
      ++dispatched;
    }
    {
      std::unique_lock lock(job->mu);
      job->cv.wait(lock, [&] { return job->completed == dispatched; });
    }
    finish_job(*job);
  }
}

void ChunkPipeline::worker_loop() {
  for (;;) {
    Task task;
    {
      std::unique_lock lock(mu_);
      tasks_cv_.wait(lock, [&] { return !tasks_.empty() || workers_stop_; });
      if (tasks_.empty()) return;
      task = std::move(tasks_.front());
      tasks_.pop_front();
    }
    run_chunk(task);
  }
}

void ChunkPipeline::run_chunk(const Task& task) {
  Job& job = *task.job;
  const ChunkRange range = job.plan.ranges[task.chunk];
  const ByteSpan chunk = job.input.subspan(range.begin, range.size());
  std::optional<std::string> error;
  if (job.config.codec != CodecId::None) {
    try {
      Bytes c = compress(job.config.codec, chunk);
      if (c.size() < chunk.size()) {
        job.results[task.chunk] = std::move(c);
        live_chunk_buffers_.fetch_add(1);
      }
    } catch (const std::exception& e) {
      error = e.what();
    }
  }
  if (hooks_.on_complete) hooks_.on_complete(range.size());
  window_release(range.size());

  std::lock_guard lock(job.mu);
  if (error && (!job.failed || task.chunk < job.error_chunk)) {
    job.failed = true;
    job.error_chunk = task.chunk;
    job.error_message = *error;
  }
  ++job.completed;
  job.cv.notify_all();
}

void ChunkPipeline::finish_job(Job& job) {
  bool failed;
  {
    std::lock_guard lock(job.mu);
    failed = job.failed;
  }
  if (!failed) {
    const std::uint32_t crc = kernels::crc32(job.input);
    write_container(job.output, job.config.codec, job.config.chunk_size, job.input, crc, job.plan,
                    [&](std::size_t i) -> std::optional<ByteSpan> {
                      if (!job.results[i]) return std::nullopt;
                      return ByteSpan(*job.results[i]);
                    });
  }
  for (auto& r : job.results) {
    if (r) live_chunk_buffers_.fetch_sub(1);
  }
  job.results.clear();
  job.results.shrink_to_fit();
  job.owned.reset();
  job.input = {};
  {
    std::lock_guard lock(mu_);
    job.status = failed ? JobStatus::Failed : JobStatus::Done;
  }
  done_cv_.notify_all();
}

// ---------------------------------------------------------------------------
// Synchronous API

Bytes compress_chunked(ByteSpan input, const PipelineConfig& config, PipelineHooks hooks) {
  config.validate();
  ChunkPipeline pipeline(config.workers, std::move(hooks));
  const JobTicket ticket = pipeline.submit_view(input, config);
  try {
    return pipeline.await_result(ticket);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::JobFailed) throw;
    throw Error(ErrorCode::CodecFailure, e.what(), e.index());
  }
}

ContainerInfo inspect(ByteSpan container) {
  ByteReader r(container);
  if (r.remaining() < kMagic.size()) throw Error(ErrorCode::Truncated, "container shorter than its magic");
  const auto magic = r.take(kMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) {
    throw Error(ErrorCode::BadMagic, "container does not start with PCHK");
  }
  const std::uint16_t version = r.u16();
  if (version != kVersion) throw Error(ErrorCode::UnsupportedVersion, "container version " + std::to_string(version));

  ContainerInfo info;
  const std::uint8_t codec_byte = r.u8();
  const auto codec = codec_from_byte(codec_byte);
  if (!codec) throw Error(ErrorCode::CodecFailure, "unknown codec id " + std::to_string(codec_byte));
  info.codec = *codec;
  info.chunk_size = r.u32();
  info.total_uncompressed = r.u64();
  info.crc32 = r.u32();
  const std::uint32_t count = r.u32();

  if (info.chunk_size < kMinChunkSize || info.chunk_size > kMaxChunkSize) {
    throw Error(ErrorCode::BadChunkSize, "container chunk size " + std::to_string(info.chunk_size));
  }
  const std::uint64_t expected_count = (info.total_uncompressed + info.chunk_size - 1) / info.chunk_size;
  if (count != expected_count) {
    throw Error(ErrorCode::LayoutMismatch, "container has " + std::to_string(count) + " chunks, expected " +
                                               std::to_string(expected_count));
  }
  if (static_cast<std::uint64_t>(count) * kChunkHeaderSize > r.remaining()) {
    throw Error(ErrorCode::Truncated, "container declares " + std::to_string(count) + " chunks");
  }

  info.chunks.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    ContainerChunk c;
    const std::uint8_t flag = r.u8();
    if (flag > 1) throw Error(ErrorCode::LayoutMismatch, "bad raw flag " + std::to_string(flag), i);
    c.raw = flag == 1;
    c.stored_len = r.u32();
    c.payload_offset = r.position();
    const std::uint64_t chunk_len =
        std::min<std::uint64_t>(info.chunk_size, info.total_uncompressed - std::uint64_t{i} * info.chunk_size);
    if (c.raw && c.stored_len != chunk_len) {
      throw Error(ErrorCode::LayoutMismatch, "raw chunk with stored_len " + std::to_string(c.stored_len), i);
    }
    if (!c.raw && info.codec == CodecId::None) {
      throw Error(ErrorCode::LayoutMismatch, "compressed chunk in an uncompressed container", i);
    }
    r.skip(c.stored_len);
    info.chunks.push_back(c);
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCode::LayoutMismatch, std::to_string(r.remaining()) + " trailing bytes after last chunk");
  }
  return info;
}

Bytes decompress_chunked(ByteSpan container, std::size_t workers) {
  const ContainerInfo info = inspect(container);
  const ChunkPlan plan = plan_chunks(info.total_uncompressed, info.chunk_size);
  Bytes out(info.total_uncompressed);
  parallel_for(plan.ranges.size(), std::max<std::size_t>(workers, 1), [&](std::size_t i) {
    const ContainerChunk& c = info.chunks[i];
    const ChunkRange range = plan.ranges[i];
    try {
      decompress(c.raw ? CodecId::None : info.codec, container.subspan(c.payload_offset, c.stored_len),
                 std::span<std::uint8_t>(out).subspan(range.begin, range.size()));
    } catch (const Error& e) {
      throw Error(ErrorCode::CodecFailure, "chunk " + std::to_string(i) + ": " + e.what(), i);
    }
  });
  const std::uint32_t crc = kernels::crc32(out);
  if (crc != info.crc32) {
    throw Error(ErrorCode::CrcMismatch, "stored crc " + std::to_string(info.crc32) + ", computed " + std::to_string(crc));
  }
  return out;
}

Bytes assemble_container(CodecId codec, std::size_t chunk_size, ByteSpan input, const std::vector<Bytes>& payloads,
                         const std::vector<bool>& raw) {
  const ChunkPlan plan = plan_chunks(input.size(), chunk_size);
  if (payloads.size() != plan.ranges.size() || raw.size() != plan.ranges.size()) {
    throw Error(ErrorCode::LayoutMismatch, "need one payload per chunk");
  }
  Bytes out;
  write_container(out, codec, chunk_size, input, kernels::crc32(input), plan, [&](std::size_t i) -> std::optional<ByteSpan> {
    if (raw[i]) return std::nullopt;
    return ByteSpan(payloads[i]);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Throughput

Bytes probe_input(std::size_t len, std::uint64_t seed) {
  std::uint64_t state = seed;
  auto next = [&] {
    state += 0x9e3779b97f4a7c15ULL;
    return kernels::splitmix64_mix(state);
  };

  std::vector<std::string> vocab(512);
  for (auto& word : vocab) {
    const std::size_t n = 2 + next() % 8;
    for (std::size_t i = 0; i < n; ++i) word.push_back(static_cast<char>('a' + next() % 26));
    word.push_back(' ');
  }

  Bytes out;
  out.reserve(len + 16);
  while (out.size() < len) {
    // Squaring a uniform draw skews picks toward low ranks.
    const std::uint64_t r = next() % 512;
    const std::string& w = vocab[(r * r) / 512];
    out.insert(out.end(), w.begin(), w.end());
  }
  out.resize(len);
  return out;
}

Throughput throughput_probe(std::size_t input_len, const PipelineConfig& config, std::size_t repetitions,
                            std::uint64_t seed) {
  config.validate();
  repetitions = std::max<std::size_t>(repetitions, 1);
  const Bytes input = probe_input(input_len, seed);
  std::vector<double> comp;
  std::vector<double> decomp;
  const double bits = static_cast<double>(input_len) * 8.0;
  for (std::size_t r = 0; r < repetitions; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    const Bytes container = compress_chunked(input, config);
    auto t1 = std::chrono::steady_clock::now();
    const Bytes back = decompress_chunked(container, config.workers);
    auto t2 = std::chrono::steady_clock::now();
    if (back.size() != input.size()) throw Error(ErrorCode::LayoutMismatch, "probe round trip changed size");
    const double cs = std::max(std::chrono::duration<double>(t1 - t0).count(), 1e-9);
    const double ds = std::max(std::chrono::duration<double>(t2 - t1).count(), 1e-9);
    comp.push_back(bits / cs / 1e9);
    decomp.push_back(bits / ds / 1e9);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  return {median(comp), median(decomp)};
}

}  // namespace pflow::chunkpipe
