#include <zlib.h>

#include "pflow/kernels.hpp"
#include "support.hpp"

using namespace pflow;
using testing::crc32_bitwise;

namespace {

std::vector<std::uint8_t> random_mask(std::mt19937_64& rng, std::size_t nbits, int density_pct) {
  std::vector<std::uint8_t> m((nbits + 7) / 8, 0);
  for (std::size_t i = 0; i < nbits; ++i) {
    if (static_cast<int>(rng() % 100) < density_pct) m[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
  }
  return m;
}

bool bit(const std::vector<std::uint8_t>& v, std::size_t i) { return (v[i >> 3] >> (i & 7)) & 1u; }

}  // namespace

TEST_CASE("crc32 check value") {
  const std::string s = "123456789";
  const auto* p = reinterpret_cast<const std::uint8_t*>(s.data());
  CHECK(crc32_bitwise(p, s.size()) == 0xCBF43926u);
  CHECK(::crc32(0, p, static_cast<uInt>(s.size())) == 0xCBF43926u);
  for (const auto* k : kernels::available()) {
    CAPTURE(kernels::isa_name(k->isa));
    CHECK(k->crc32_update(0, {p, s.size()}) == 0xCBF43926u);
  }
  CHECK(kernels::crc32({p, s.size()}) == 0xCBF43926u);
  CHECK(kernels::crc32({}) == 0u);
}

TEST_CASE("crc32 kernels agree with bitwise and zlib references") {
  std::mt19937_64 rng(7);
  const auto data = testing::random_bytes(rng, 1 << 20);
  std::vector<std::size_t> lengths = {0, 1, 7, 8, 15, 16, 31, 63, 64, 65, 127, 128, 129, 255, 256, 1000, 4096, 65536};
  for (int i = 0; i < 100; ++i) lengths.push_back(rng() % 5000);
  for (const auto* k : kernels::available()) {
    CAPTURE(kernels::isa_name(k->isa));
    for (std::size_t len : lengths) {
      const std::size_t off = rng() % 17;
      const std::uint8_t* p = data.data() + off;
      const std::uint32_t want = crc32_bitwise(p, len);
      CHECK(k->crc32_update(0, {p, len}) == want);
      CHECK(::crc32(0, p, static_cast<uInt>(len)) == want);
    }
    // Incremental updates compose.
    const std::size_t cut = 12345;
    const std::uint32_t head = k->crc32_update(0, {data.data(), cut});
    CHECK(k->crc32_update(head, {data.data() + cut, data.size() - cut}) ==
          ::crc32(0, data.data(), static_cast<uInt>(data.size())));
  }
}

TEST_CASE("partition_indices kernels match the bit rule") {
  std::mt19937_64 rng(11);
  std::vector<std::int64_t> ids(1037);
  for (auto& id : ids) id = static_cast<std::int64_t>(rng());
  ids[0] = -1;
  ids[1] = 0;
  ids[2] = std::numeric_limits<std::int64_t>::min();
  ids[3] = std::numeric_limits<std::int64_t>::max();
  for (const auto* k : kernels::available()) {
    CAPTURE(kernels::isa_name(k->isa));
    for (bool hash : {false, true}) {
      for (unsigned bits = 1; bits <= 4; ++bits) {
        for (unsigned shift : {0u, 1u, 4u, 13u, 60u}) {
          std::vector<std::uint8_t> out(ids.size(), 0xFF);
          k->partition_indices(ids, shift, bits, hash, out);
          for (std::size_t i = 0; i < ids.size(); ++i) {
            std::uint64_t v = static_cast<std::uint64_t>(ids[i]);
            if (hash) v = testing::mix_oracle(v);
            REQUIRE(out[i] == ((v >> shift) & ((1u << bits) - 1)));
          }
        }
      }
    }
  }
}

TEST_CASE("match_mask, popcount and compaction kernels agree with scalar") {
  std::mt19937_64 rng(3);
  const auto& ref = kernels::scalar();
  for (const auto* k : kernels::available()) {
    CAPTURE(kernels::isa_name(k->isa));
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = trial < 70 ? static_cast<std::size_t>(trial) : rng() % 3000;
      const int density = static_cast<int>(rng() % 101);
      CAPTURE(n);

      std::vector<std::uint8_t> idx(n);
      for (auto& v : idx) v = static_cast<std::uint8_t>(rng() % 4);
      std::vector<std::uint8_t> got((n + 7) / 8, 0xAA), want((n + 7) / 8, 0x55);
      k->match_mask(idx, 2, got);
      ref.match_mask(idx, 2, want);
      CHECK(got == want);
      for (std::size_t i = 0; i < n; ++i) REQUIRE(bit(got, i) == (idx[i] == 2));

      const auto mask = random_mask(rng, n, density);
      std::size_t ones = 0;
      for (std::size_t i = 0; i < n; ++i) ones += bit(mask, i);
      CHECK(k->popcount(mask, n) == ones);
      if (n > 3) CHECK(k->popcount(mask, n - 3) == ref.popcount(mask, n - 3));

      std::vector<std::uint64_t> src(n);
      for (auto& v : src) v = rng();
      std::vector<std::uint64_t> out(n + 8, 0), expect;
      for (std::size_t i = 0; i < n; ++i) {
        if (bit(mask, i)) expect.push_back(src[i]);
      }
      const std::size_t kept = k->compress64(src, mask, out.data());
      REQUIRE(kept == expect.size());
      CHECK(std::equal(expect.begin(), expect.end(), out.begin()));

      const auto src_bits = random_mask(rng, n, 50);
      std::vector<std::uint8_t> packed((n + 7) / 8 + 8, 0);
      const std::size_t kept_bits = k->compress_bits(src_bits, mask, n, packed.data());
      REQUIRE(kept_bits == ones);
      std::size_t o = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (bit(mask, i)) REQUIRE(bit(packed, o++) == bit(src_bits, i));
      }
      for (std::size_t j = o; j < packed.size() * 8; ++j) REQUIRE_FALSE(bit(packed, j));
    }
  }
}

TEST_CASE("active kernel table is one of the available ones") {
  const auto all = kernels::available();
  CHECK(std::find(all.begin(), all.end(), &kernels::active()) != all.end());
  CHECK(all.front()->isa == kernels::Isa::Scalar);
}
