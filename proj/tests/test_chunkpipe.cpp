#include <zlib.h>

#include <atomic>
#include <mutex>

#include "pflow/chunkpipe.hpp"
#include "support.hpp"

using namespace pflow;
using namespace pflow::chunkpipe;

namespace {

std::uint64_t get(const Bytes& b, std::size_t at, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= std::uint64_t{b[at + i]} << (8 * i);
  return v;
}

// Mixed-entropy input: runs of text-like tokens interleaved with noise.
Bytes mixed_input(std::mt19937_64& rng, std::size_t n) {
  Bytes out;
  out.reserve(n);
  while (out.size() < n) {
    const std::size_t run = 1 + rng() % 3000;
    if (rng() % 3 == 0) {
      for (std::size_t i = 0; i < run && out.size() < n; ++i) out.push_back(static_cast<std::uint8_t>(rng()));
    } else {
      static constexpr std::string_view kWords[] = {"track ", "hit ", "0.125 ", "layer=3 ", "id:42 "};
      while (out.size() < n) {
        const auto w = kWords[rng() % 5];
        for (char c : w) {
          if (out.size() == n) break;
          out.push_back(static_cast<std::uint8_t>(c));
        }
        if (rng() % 64 == 0) break;
      }
    }
  }
  return out;
}

PipelineConfig config(CodecId codec = CodecId::Deflate, std::size_t workers = 1, std::size_t chunk = 65536,
                      std::size_t window = kDefaultWindow) {
  return {codec, chunk, workers, window};
}

}  // namespace

TEST_CASE("plan_chunks examples") {
  const auto p = plan_chunks(150000, 65536);
  const std::vector<ChunkRange> want = {{0, 65536}, {65536, 131072}, {131072, 150000}};
  CHECK(p.ranges == want);
  CHECK(plan_chunks(65536, 65536).ranges == std::vector<ChunkRange>{{0, 65536}});
  CHECK(plan_chunks(0, 65536).ranges.empty());
  CHECK_CODE(plan_chunks(10, 4095), ErrorCode::BadChunkSize);
  CHECK_CODE(plan_chunks(10, 65537), ErrorCode::BadChunkSize);
}

TEST_CASE("plan_chunks covers the input exactly") {
  std::mt19937_64 rng(43);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t len = rng() % (1u << 22);
    const std::size_t cs = kMinChunkSize + rng() % (kMaxChunkSize - kMinChunkSize + 1);
    const auto p = plan_chunks(len, cs);
    REQUIRE(p.ranges.size() == (len + cs - 1) / cs);
    std::size_t at = 0;
    for (const auto& r : p.ranges) {
      REQUIRE(r.begin == at);
      REQUIRE(r.end > r.begin);
      REQUIRE(r.size() <= cs);
      at = r.end;
    }
    REQUIRE(at == len);
  }
}

TEST_CASE("empty input container") {
  const Bytes c = compress_chunked({}, config());
  REQUIRE(c.size() == kContainerHeaderSize);
  CHECK(std::equal(kMagic.begin(), kMagic.end(), c.begin()));
  CHECK(get(c, 4, 2) == 1);
  CHECK(get(c, 6, 1) == static_cast<std::uint8_t>(CodecId::Deflate));
  CHECK(get(c, 7, 4) == 65536);
  CHECK(get(c, 11, 8) == 0);
  CHECK(get(c, 19, 4) == ::crc32(0, nullptr, 0));
  CHECK(get(c, 23, 4) == 0);
  CHECK(decompress_chunked(c).empty());
}

TEST_CASE("container framing") {
  std::mt19937_64 rng(47);
  const Bytes in = mixed_input(rng, 300000);
  const Bytes c = compress_chunked(in, config(CodecId::Deflate, 2, 8192));
  CHECK(get(c, 7, 4) == 8192);
  CHECK(get(c, 11, 8) == in.size());
  CHECK(get(c, 19, 4) == ::crc32(0, in.data(), static_cast<uInt>(in.size())));
  const std::size_t chunks = get(c, 23, 4);
  CHECK(chunks == (in.size() + 8191) / 8192);
  std::size_t at = kContainerHeaderSize;
  for (std::size_t i = 0; i < chunks; ++i) {
    const std::size_t slen = get(c, at + 1, 4);
    at += kChunkHeaderSize + slen;
  }
  CHECK(at == c.size());
  CHECK(inspect(c).chunks.size() == chunks);
}

TEST_CASE("random data chunks are stored raw") {
  std::mt19937_64 rng(53);
  const Bytes in = testing::random_bytes(rng, 1 << 20);
  const auto info = inspect(compress_chunked(in, config()));
  REQUIRE(info.chunks.size() == 16);
  for (const auto& ch : info.chunks) {
    CHECK(ch.raw);
    CHECK(ch.stored_len == 65536);
  }
}

TEST_CASE("round trip and determinism across workers, window and codec") {
  std::mt19937_64 rng(59);
  const std::size_t sizes[] = {1, 4095, 4096, 65535, 65537, 1000000, 16u << 20};
  for (std::size_t n : sizes) {
    CAPTURE(n);
    const Bytes in = mixed_input(rng, n);
    for (CodecId codec : {CodecId::Deflate, CodecId::Zstd, CodecId::Lz4Frame, CodecId::None}) {
      CAPTURE(codec_name(codec));
      if (n > (1u << 20) && codec != CodecId::Deflate) continue;
      const std::size_t cs = n > (1u << 20) ? 65536 : 4096 + rng() % 60000;
      const Bytes one = compress_chunked(in, config(codec, 1, cs));
      CHECK(compress_chunked(in, config(codec, 4, cs)) == one);
      CHECK(compress_chunked(in, config(codec, 3, cs, cs)) == one);
      CHECK(decompress_chunked(one, 1) == in);
      CHECK(decompress_chunked(one, 4) == in);
    }
  }
}

TEST_CASE("corruption is detected") {
  std::mt19937_64 rng(61);
  const Bytes in = mixed_input(rng, 200000);
  const Bytes c = compress_chunked(in, config());
  for (int i = 0; i < 60; ++i) {
    Bytes bad = c;
    const std::size_t at = kContainerHeaderSize + rng() % (c.size() - kContainerHeaderSize);
    bad[at] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
    const auto code = testing::error_of([&] { (void)decompress_chunked(bad); });
    REQUIRE(code.has_value());
    CHECK((*code == ErrorCode::CrcMismatch || *code == ErrorCode::CodecFailure || *code == ErrorCode::Truncated));
  }
  Bytes bad = c;
  bad[0] = 'X';
  CHECK_CODE(decompress_chunked(bad), ErrorCode::BadMagic);
  CHECK_CODE(decompress_chunked(ByteSpan(c.data(), c.size() - 3)), ErrorCode::Truncated);

  // A raw chunk with one flipped byte decodes but fails the checksum.
  const Bytes noise = testing::random_bytes(rng, 10000);
  Bytes raw = compress_chunked(noise, config());
  raw[kContainerHeaderSize + kChunkHeaderSize + 100] ^= 1;
  CHECK_CODE(decompress_chunked(raw), ErrorCode::CrcMismatch);
}

TEST_CASE("config validation") {
  CHECK_CODE(compress_chunked({}, config(CodecId::Deflate, 1, 65536, 1000)), ErrorCode::WindowTooSmall);
  CHECK_CODE(compress_chunked({}, config(CodecId::Deflate, 1, 100)), ErrorCode::BadChunkSize);
}

TEST_CASE("window bound under instrumentation") {
  std::mt19937_64 rng(67);
  const Bytes in = mixed_input(rng, 16u << 20);
  const std::size_t window = 1u << 20;
  for (int run = 0; run < 3; ++run) {
    std::mutex mu;
    std::size_t in_flight = 0, peak = 0;
    PipelineHooks hooks;
    hooks.on_dispatch = [&](std::size_t n) {
      std::lock_guard lock(mu);
      in_flight += n;
      peak = std::max(peak, in_flight);
    };
    hooks.on_complete = [&](std::size_t n) {
      std::lock_guard lock(mu);
      in_flight -= n;
    };
    ChunkPipeline pipe(8, hooks);
    const Bytes out = pipe.await_result(pipe.submit_view(in, config(CodecId::Deflate, 8, 65536, window)));
    CHECK(peak <= window);
    CHECK(peak > 0);
    CHECK(in_flight == 0);
    const auto stats = pipe.stats();
    CHECK(stats.max_in_flight <= window);
    CHECK(stats.window_violations == 0);
    CHECK(decompress_chunked(out) == in);
  }
}

TEST_CASE("asynchronous jobs") {
  std::mt19937_64 rng(71);
  const Bytes in = mixed_input(rng, 3u << 20);
  ChunkPipeline pipe(2);
  const auto t = pipe.submit(in, config());
  const JobStatus s = pipe.poll(t);
  CHECK(s != JobStatus::Failed);
  CHECK(pipe.await_result(t) == compress_chunked(in, config()));
  CHECK_CODE(pipe.poll(t), ErrorCode::UnknownJob);

  std::vector<JobTicket> tickets;
  std::vector<Bytes> inputs;
  for (int i = 0; i < 6; ++i) inputs.push_back(mixed_input(rng, rng() % 400000));
  for (const Bytes& b : inputs) tickets.push_back(pipe.submit_view(b, config(CodecId::Zstd, 2, 4096)));
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    CHECK(decompress_chunked(pipe.await_result(tickets[i])) == inputs[i]);
  }
  CHECK(pipe.stats().tracked_jobs == 0);

  pipe.shutdown();
  CHECK_CODE(pipe.submit(in, config()), ErrorCode::PipelineShutdown);
}

TEST_CASE("submit validates its config") {
  ChunkPipeline pipe(1);
  CHECK_CODE(pipe.submit({}, config(CodecId::Deflate, 1, 1234)), ErrorCode::BadChunkSize);
}

TEST_CASE("chunk buffers return to baseline after each job") {
  const Bytes in = probe_input(16u << 20, 5);
  ChunkPipeline pipe(2);
  const auto baseline = pipe.stats();
  for (int job = 0; job < 100; ++job) {
    const Bytes out = pipe.await_result(pipe.submit_view(in, config(CodecId::Lz4Frame, 2)));
    REQUIRE(!out.empty());
    const auto s = pipe.stats();
    REQUIRE(s.live_chunk_buffers == baseline.live_chunk_buffers);
    REQUIRE(s.tracked_jobs == baseline.tracked_jobs);
  }
}

TEST_CASE("throughput probe") {
  const auto one = throughput_probe(1u << 20, config(), 1);
  CHECK(one.compress_gbps > 0);
  CHECK(one.decompress_gbps > 0);

  // A window of one chunk serializes the pipeline; it must not be faster.
  double narrow = 0, wide = 0;
  for (int i = 0; i < 3; ++i) {
    narrow += throughput_probe(8u << 20, config(CodecId::Deflate, 2, 65536, 65536), 3).compress_gbps;
    wide += throughput_probe(8u << 20, config(CodecId::Deflate, 2), 3).compress_gbps;
  }
  CHECK(narrow <= wide * 1.15);
}

TEST_CASE("deflate chunks interoperate with zlib") {
  std::mt19937_64 rng(73);
  const Bytes in = mixed_input(rng, 20 * 65536 + 123);
  const Bytes c = compress_chunked(in, config());
  const auto info = inspect(c);
  const auto plan = plan_chunks(in.size(), 65536);
  for (std::size_t i = 0; i < info.chunks.size(); ++i) {
    const auto& ch = info.chunks[i];
    if (ch.raw) continue;
    z_stream zs{};
    REQUIRE(inflateInit2(&zs, -15) == Z_OK);
    Bytes out(plan.ranges[i].size());
    zs.next_in = const_cast<Bytef*>(c.data() + ch.payload_offset);
    zs.avail_in = static_cast<uInt>(ch.stored_len);
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    CHECK(inflate(&zs, Z_FINISH) == Z_STREAM_END);
    inflateEnd(&zs);
    CHECK(std::equal(out.begin(), out.end(), in.begin() + static_cast<std::ptrdiff_t>(plan.ranges[i].begin)));
  }
}
