#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "pflow/wire.hpp"
#include "pflow/workbench.hpp"

namespace pflow::workbench {

namespace {

bool needs_quotes(std::string_view s) {
  return s.empty() || s.find_first_of(",\"\r\n") != std::string_view::npos;
}

void write_cell(std::ostream& out, const Column& col, std::size_t row) {
  if (!col.is_valid(row)) return;
  char buf[64];
  switch (col.dtype()) {
    case DataType::Int64: {
      auto r = std::to_chars(buf, buf + sizeof buf, col.int64_values()[row]);
      out.write(buf, r.ptr - buf);
      break;
    }
    case DataType::Float64: {
      // Shortest round-trip form; always '.' as decimal point.
      auto r = std::to_chars(buf, buf + sizeof buf, col.float64_values()[row]);
      out.write(buf, r.ptr - buf);
      break;
    }
    case DataType::Utf8: {
      const std::string_view v = col.utf8_value(row);
      if (!needs_quotes(v)) {
        out << v;
        break;
      }
      out << '"';
      for (char c : v) {
        if (c == '"') out << '"';
        out << c;
      }
      out << '"';
      break;
    }
  }
}

struct Cell {
  std::string text;
  bool quoted = false;
};

// One record, RFC 4180 style. Returns false at end of input.
bool next_record(std::istream& in, std::vector<Cell>& cells) {
  cells.clear();
  int c = in.get();
  if (c == EOF) return false;
  Cell cell;
  bool in_quotes = false;
  for (;; c = in.get()) {
    if (in_quotes) {
      if (c == EOF) throw Error(ErrorCode::ParseError, "unterminated quoted cell");
      if (c == '"') {
        if (in.peek() == '"') {
          in.get();
          cell.text.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        cell.text.push_back(static_cast<char>(c));
      }
      continue;
    }
    if (c == EOF || c == '\n') break;
    if (c == '\r') {
      if (in.peek() == '\n') in.get();
      break;
    }
    if (c == ',') {
      cells.push_back(std::move(cell));
      cell = Cell{};
    } else if (c == '"' && cell.text.empty() && !cell.quoted) {
      in_quotes = true;
      cell.quoted = true;
    } else {
      cell.text.push_back(static_cast<char>(c));
    }
  }
  cells.push_back(std::move(cell));
  return true;
}

template <class T>
bool parse_number(const std::string& s, T& v) {
  const char* end = s.data() + s.size();
  auto r = std::from_chars(s.data(), end, v);
  return r.ec == std::errc() && r.ptr == end;
}

}  // namespace

void write_csv(const Table& table, std::ostream& out) {
  const Schema& schema = table.schema();
  for (std::size_t c = 0; c < schema.size(); ++c) {
    if (c) out << ',';
    out << schema.field(c).name;
  }
  out << '\n';
  for (std::size_t r = 0; r < table.nrows(); ++r) {
    for (std::size_t c = 0; c < schema.size(); ++c) {
      if (c) out << ',';
      write_cell(out, table.column(c), r);
    }
    out << '\n';
  }
}

void write_csv(const Table& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  write_csv(table, out);
  if (!out) throw Error(ErrorCode::IoError, "write to " + path.string() + " failed");
}

Table read_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
  return read_csv(in, schema);
}

Table read_csv(std::istream& in, const Schema& schema) {
  std::vector<Cell> cells;
  if (!next_record(in, cells)) throw Error(ErrorCode::HeaderMismatch, "missing header row");
  bool header_ok = cells.size() == schema.size();
  for (std::size_t c = 0; header_ok && c < cells.size(); ++c) header_ok = cells[c].text == schema.field(c).name;
  if (!header_ok) throw Error(ErrorCode::HeaderMismatch, "header does not match the schema field names");

  TableBuilder b(schema);
  std::size_t row = 0;
  while (next_record(in, cells)) {
    ++row;
    if (cells.size() == 1 && cells[0].text.empty() && !cells[0].quoted && schema.size() > 1) continue;  // blank line
    if (cells.size() != schema.size()) {
      throw Error(ErrorCode::ParseError,
                  "row " + std::to_string(row) + ": expected " + std::to_string(schema.size()) + " cells, got " +
                      std::to_string(cells.size()),
                  row);
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const Field& f = schema.field(c);
      const Cell& cell = cells[c];
      auto fail = [&](const char* what) {
        return Error(ErrorCode::ParseError,
                     "row " + std::to_string(row) + ", column '" + f.name + "': " + what + " '" + cell.text + "'", row);
      };
      if (cell.text.empty() && !cell.quoted) {
        if (!f.nullable) throw fail("empty cell in non-nullable column");
        b.column(c).append_null();
        continue;
      }
      switch (f.dtype) {
        case DataType::Int64: {
          std::int64_t v = 0;
          if (!parse_number(cell.text, v)) throw fail("not an int64");
          b.column(c).append_int64(v);
          break;
        }
        case DataType::Float64: {
          double v = 0;
          if (!parse_number(cell.text, v)) throw fail("not a float64");
          b.column(c).append_float64(v);
          break;
        }
        case DataType::Utf8:
          b.column(c).append_utf8(cell.text);
          break;
      }
    }
  }
  return b.finish();
}

Table cap_rows(const Table& table, std::size_t byte_limit) {
  std::size_t lo = 0;
  std::size_t hi = table.nrows();
  if (wire::uncompressed_envelope_size(table, hi) <= byte_limit) return table;
  // Invariant: size(lo) fits or lo == 0; size(hi) does not fit.
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (wire::uncompressed_envelope_size(table, mid) <= byte_limit) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return slice(table, 0, lo);
}

}  // namespace pflow::workbench
