#include <array>
#include <cmath>

#include "pflow/kernels.hpp"
#include "pflow/workbench.hpp"

namespace pflow::workbench {

namespace {

// splitmix64 stream; raw outputs only, so sequences match across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return kernels::splitmix64_mix(state_);
  }
  // [0, n); modulo bias is negligible for the small n used here.
  std::uint64_t below(std::uint64_t n) noexcept { return next() % n; }
  std::int64_t range(std::int64_t lo, std::int64_t hi) noexcept {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }
  bool one_in(std::uint64_t n) noexcept { return below(n) == 0; }

 private:
  std::uint64_t state_;
};

// k * 2^-exp, exact for |k| < 2^53.
double fixed(std::int64_t k, int exp) { return std::ldexp(static_cast<double>(k), -exp); }

constexpr std::uint64_t kNullOneIn = 100;

std::string letters(Rng& rng, std::size_t n, std::string_view alphabet) {
  std::string s;
  s.reserve(n);
  for (std::size_t i = 0; i < n; ++i) s.push_back(alphabet[rng.below(alphabet.size())]);
  return s;
}

constexpr std::string_view kUpper = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
constexpr std::string_view kDigits = "0123456789";

// Appends a value unless the cell is drawn as null (nullable fields only).
struct RowWriter {
  TableBuilder& b;
  const Schema& schema;
  Rng& nulls;
  std::size_t col = 0;

  bool null_here() {
    const bool nullable = schema.field(col).nullable;
    if (nullable && nulls.one_in(kNullOneIn)) {
      b.column(col++).append_null();
      return true;
    }
    return false;
  }
  void i64(std::int64_t v) {
    if (!null_here()) b.column(col++).append_int64(v);
  }
  void f64(double v) {
    if (!null_here()) b.column(col++).append_float64(v);
  }
  void str(std::string_view v) {
    if (!null_here()) b.column(col++).append_utf8(v);
  }
};

Table gen_particles(std::size_t rows, std::uint64_t seed) {
  const Schema schema = dataset_schema(DatasetKind::Particles);
  TableBuilder b(schema, rows);
  Rng rng(seed);
  Rng nulls(seed ^ 0x5bd1e995ULL);

  struct Particle {
    std::int64_t id;
    std::int64_t x0, y0, z0, px, py, pz, charge, energy;
  };
  const std::size_t n_particles = std::max<std::size_t>(1, rows / 10);
  const std::int64_t base = static_cast<std::int64_t>(rng.below(1u << 20)) + 1;
  std::vector<Particle> particles(n_particles);
  for (std::size_t p = 0; p < n_particles; ++p) {
    auto& q = particles[p];
    // Low two bits only ever take the values 0, 1, 2.
    q.id = ((base + static_cast<std::int64_t>(p)) << 2) | static_cast<std::int64_t>(p % 3);
    q.x0 = rng.range(-1024, 1024);
    q.y0 = rng.range(-1024, 1024);
    q.z0 = rng.range(-3000, 3000);
    q.px = rng.range(-2000, 2000);
    q.py = rng.range(-2000, 2000);
    q.pz = rng.range(-8000, 8000);
    q.charge = rng.one_in(2) ? 1 : -1;
    q.energy = rng.range(100, 100000);
  }

  for (std::size_t r = 0; r < rows; ++r) {
    const Particle& q = particles[r % n_particles];
    const auto step = static_cast<std::int64_t>(r / n_particles);
    RowWriter w{b, schema, nulls};
    w.i64(q.id);
    w.i64(step);
    // Straight-line tracks on a 1/16 mm grid.
    w.f64(fixed(q.x0 * 16 + q.px * step / 64, 4));
    w.f64(fixed(q.y0 * 16 + q.py * step / 64, 4));
    w.f64(fixed(q.z0 * 16 + q.pz * step / 64, 4));
    w.f64(fixed(q.px, 8));
    w.f64(fixed(q.py, 8));
    w.f64(fixed(q.pz, 8));
    w.i64(q.charge);
    w.f64(fixed(q.energy - step * 3, 6));
  }
  return b.finish();
}

Table gen_planes(std::size_t rows, std::uint64_t seed) {
  const Schema schema = dataset_schema(DatasetKind::Planes);
  TableBuilder b(schema, rows);
  Rng rng(seed);
  Rng nulls(seed ^ 0x27d4eb2fULL);

  struct Aircraft {
    std::int64_t id;
    std::string callsign, squawk;
    std::int64_t lat, lon, alt, speed, heading, climb;
  };
  // A multiple of 16 so rows spread evenly over the low four ID bits.
  const std::size_t n_aircraft = std::max<std::size_t>(16, (rows / 50 + 15) / 16 * 16);
  const std::int64_t base = static_cast<std::int64_t>(rng.below(1u << 16)) + 1;
  std::vector<Aircraft> fleet(n_aircraft);
  for (std::size_t a = 0; a < n_aircraft; ++a) {
    auto& f = fleet[a];
    f.id = ((base + static_cast<std::int64_t>(a)) << 4) | static_cast<std::int64_t>(a & 15);
    f.callsign = letters(rng, 3, kUpper) + letters(rng, 1 + rng.below(4), kDigits);
    f.squawk = letters(rng, 4, "01234567");
  }
  // Kinematics are drawn once per block of 16 aircraft, so every low-bit
  // class sees the same mix of flight profiles.
  for (std::size_t g = 0; g < n_aircraft; g += 16) {
    const std::int64_t lat = rng.range(-60 * 4096, 70 * 4096);
    const std::int64_t lon = rng.range(-180 * 4096, 180 * 4096);
    const std::int64_t alt = rng.range(0, 12000);
    const std::int64_t speed = rng.range(60, 280);
    const std::int64_t heading = rng.range(0, 359);
    const std::int64_t climb = rng.range(-20, 20);
    for (std::size_t a = g; a < g + 16; ++a) {
      auto& f = fleet[a];
      const auto k = static_cast<std::int64_t>(a - g);
      f.lat = lat + k * 64;
      f.lon = lon - k * 64;
      f.alt = alt;
      f.speed = speed;
      f.heading = heading;
      f.climb = climb;
    }
  }

  const std::int64_t t0 = 1'600'000'000;
  for (std::size_t r = 0; r < rows; ++r) {
    const Aircraft& f = fleet[r % n_aircraft];
    const auto step = static_cast<std::int64_t>(r / n_aircraft);
    const std::int64_t t = t0 + step * 10;
    const std::int64_t alt = std::max<std::int64_t>(0, f.alt + f.climb * step);
    RowWriter w{b, schema, nulls};
    w.i64(f.id);
    w.i64(t);
    w.str(f.callsign);
    w.f64(fixed(f.lat + step * (f.speed % 7 - 3), 12));
    w.f64(fixed(f.lon + step * (f.speed % 5 - 2), 12));
    w.f64(fixed(f.speed * 4 + static_cast<std::int64_t>(rng.below(4)), 2));
    w.f64(fixed(f.heading * 8 + rng.range(-4, 4), 3));
    w.f64(fixed(f.climb * 16 + rng.range(-8, 8), 4));
    w.i64(alt == 0 ? 1 : 0);
    w.i64(rng.one_in(500) ? 1 : 0);
    w.i64(0);
    w.str(f.squawk);
    w.f64(fixed(alt * 4, 2));
    w.f64(fixed(alt * 4 + rng.range(-40, 40), 2));
    w.f64(fixed((t - static_cast<std::int64_t>(rng.below(3))) * 4, 2));
    w.f64(fixed(t * 4, 2));
  }
  return b.finish();
}

Table gen_ships(std::size_t rows, std::uint64_t seed) {
  const Schema schema = dataset_schema(DatasetKind::Ships);
  TableBuilder b(schema, rows);
  Rng rng(seed);
  Rng nulls(seed ^ 0x165667b1ULL);

  // Low-two-bit class of ship s by s % 10: 40% / 30% / 20% / 10%.
  constexpr std::array<std::int64_t, 10> kClass = {0, 0, 0, 0, 1, 1, 1, 2, 2, 3};

  struct Ship {
    std::int64_t id;
    std::string name;
    std::int64_t lat, lon, sog, cog, type, status, length, width, draft, cargo, imo, cls, voyage;
  };
  const std::size_t n_ships = std::max<std::size_t>(10, (rows / 40 + 9) / 10 * 10);
  const std::int64_t base = static_cast<std::int64_t>(rng.below(1u << 20)) + 200'000;
  std::vector<Ship> fleet(n_ships);
  for (std::size_t s = 0; s < n_ships; ++s) {
    auto& f = fleet[s];
    f.id = ((base + static_cast<std::int64_t>(s)) << 2) | kClass[s % 10];
    f.name = letters(rng, 3 + rng.below(10), kUpper);
    f.lat = rng.range(10 * 1024, 60 * 1024);
    f.lon = rng.range(-170 * 1024, -50 * 1024);
    f.sog = rng.range(0, 250);
    f.cog = rng.range(0, 3599);
    f.type = rng.range(20, 99);
    f.status = rng.range(0, 15);
    f.length = rng.range(10, 400);
    f.width = rng.range(3, 60);
    f.draft = rng.range(10, 200);
    f.cargo = rng.range(0, 99);
    f.imo = 9'000'000 + rng.range(0, 999'999);
    f.cls = rng.one_in(4) ? 1 : 0;
    f.voyage = rng.range(1, 5000);
  }

  const std::int64_t t0 = 1'577'836'800;
  for (std::size_t r = 0; r < rows; ++r) {
    const Ship& f = fleet[r % n_ships];
    const auto step = static_cast<std::int64_t>(r / n_ships);
    RowWriter w{b, schema, nulls};
    w.i64(f.id);
    w.i64(t0 + step * 60);
    w.f64(fixed(f.lat + step * (f.sog % 5 - 2), 10));
    w.f64(fixed(f.lon + step * (f.sog % 3 - 1), 10));
    w.f64(fixed(f.sog + rng.range(-2, 2), 1));
    w.f64(fixed(f.cog, 1));
    w.f64(fixed(f.cog / 10, 0));
    w.str(f.name);
    w.i64(f.type);
    w.i64(f.status);
    w.f64(fixed(f.length, 0));
    w.f64(fixed(f.width, 0));
    w.f64(fixed(f.draft, 1));
    w.i64(f.cargo);
    w.i64(f.imo);
    w.i64(f.cls);
    w.i64(f.voyage);
  }
  return b.finish();
}

Field key(std::string name) { return {std::move(name), DataType::Int64, false}; }
Field i64(std::string name) { return {std::move(name), DataType::Int64, true}; }
Field f64(std::string name) { return {std::move(name), DataType::Float64, true}; }
Field utf8(std::string name) { return {std::move(name), DataType::Utf8, true}; }

}  // namespace

std::string_view kind_name(DatasetKind kind) noexcept {
  switch (kind) {
    case DatasetKind::Particles: return "particles";
    case DatasetKind::Planes: return "planes";
    case DatasetKind::Ships: return "ships";
  }
  return "unknown";
}

std::optional<DatasetKind> parse_kind(std::string_view name) noexcept {
  if (name == "particles") return DatasetKind::Particles;
  if (name == "planes") return DatasetKind::Planes;
  if (name == "ships") return DatasetKind::Ships;
  return std::nullopt;
}

Schema dataset_schema(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Particles:
      return Schema({key("id"), key("time"), f64("x"), f64("y"), f64("z"), f64("px"), f64("py"), f64("pz"),
                     i64("charge"), f64("energy")});
    case DatasetKind::Planes:
      return Schema({key("id"), key("time"), utf8("callsign"), f64("lat"), f64("lon"), f64("velocity"),
                     f64("heading"), f64("vertrate"), i64("onground"), i64("alert"), i64("spi"), utf8("squawk"),
                     f64("baroaltitude"), f64("geoaltitude"), f64("lastposupdate"), f64("lastcontact")});
    case DatasetKind::Ships:
      return Schema({key("id"), key("time"), f64("lat"), f64("lon"), f64("sog"), f64("cog"), f64("heading"),
                     utf8("vessel_name"), i64("vessel_type"), i64("status"), f64("length"), f64("width"),
                     f64("draft"), i64("cargo"), i64("imo"), i64("transceiver_class"), i64("voyage")});
  }
  throw Error(ErrorCode::InvalidArgument, "unknown dataset kind");
}

Table gen_dataset(const GenProfile& profile) {
  switch (profile.kind) {
    case DatasetKind::Particles: return gen_particles(profile.rows, profile.seed);
    case DatasetKind::Planes: return gen_planes(profile.rows, profile.seed);
    case DatasetKind::Ships: return gen_ships(profile.rows, profile.seed);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown dataset kind");
}

}  // namespace pflow::workbench
