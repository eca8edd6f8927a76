#include "roadres/csvio.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>

#include "roadres/errors.hpp"

namespace roadres {

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw ComputeError("format_double failed");
  return std::string(buf, ptr);
}

double parse_double(std::string_view s, const std::string& context) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ParseError(context + ": bad number '" + std::string(s) + "'");
  return v;
}

std::int64_t parse_int(std::string_view s, const std::string& context) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ParseError(context + ": bad integer '" + std::string(s) + "'");
  return v;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  return fnv1a64(read_file(path));
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ComputeError("cannot write file: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ComputeError("short write: " + path.string());
}

namespace {

bool needs_quoting(std::string_view f) {
  return f.find_first_of(",\"\n\r") != std::string_view::npos;
}

void append_field(std::string& out, std::string_view f) {
  if (!needs_quoting(f)) {
    out.append(f);
    return;
  }
  out.push_back('"');
  for (char c : f) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

}  // namespace

CsvWriter::CsvWriter(const std::filesystem::path& path, std::string_view schema_name, int version,
                     const std::vector<std::string>& columns)
    : path_(path), n_columns_(columns.size()), columns_(columns) {
  buffer_ = "#schema: roadres/" + std::string(schema_name) + "/v" + std::to_string(version) + "\n";
}

CsvWriter::~CsvWriter() {
  try {
    close();
  } catch (...) {
    // destructor must not throw; an explicit close() surfaces errors
  }
}

void CsvWriter::comment(std::string_view key, std::string_view value) {
  if (header_written_) throw ComputeError("CsvWriter: comment after first row");
  comments_.emplace_back(key, value);
}

void CsvWriter::flush_header() {
  for (const auto& [k, v] : comments_) buffer_ += "#" + k + ": " + v + "\n";
  std::string line;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i) line.push_back(',');
    append_field(line, columns_[i]);
  }
  buffer_ += line + "\n";
  header_written_ = true;
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (!header_written_) flush_header();
  if (fields.size() != n_columns_)
    throw ComputeError("CsvWriter: row width " + std::to_string(fields.size()) + " != " +
                       std::to_string(n_columns_) + " for " + path_.string());
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line.push_back(',');
    append_field(line, fields[i]);
  }
  buffer_ += line + "\n";
  ++rows_;
}

void CsvWriter::close() {
  if (closed_) return;
  if (!header_written_) flush_header();
  write_file(path_, buffer_);
  closed_ = true;
}

std::vector<std::string> split_csv_line(std::string_view line, const std::string& context) {
  std::vector<std::string> out;
  std::string field;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  if (in_quotes) throw ParseError(context + ": unterminated quote");
  out.push_back(std::move(field));
  return out;
}

CsvReader::CsvReader(const std::filesystem::path& path) : path_(path), content_(read_file(path)) {
  // header: skip comments, first non-comment line is the column row
  while (auto line = next_line()) {
    if (line->empty()) continue;
    if ((*line)[0] == '#') {
      auto colon = line->find(':');
      if (colon != std::string::npos) {
        std::string key = line->substr(1, colon - 1);
        std::size_t vs = colon + 1;
        while (vs < line->size() && (*line)[vs] == ' ') ++vs;
        comments_.emplace_back(key, line->substr(vs));
      }
      continue;
    }
    columns_ = split_csv_line(*line, path_.string() + ":" + std::to_string(line_));
    return;
  }
  throw ParseError(path_.string() + ": missing CSV header");
}

void CsvReader::require_columns(const std::vector<std::string>& expected) {
  if (columns_ != expected) {
    std::string got;
    for (const auto& c : columns_) got += (got.empty() ? "" : ",") + c;
    throw ParseError(path_.string() + ": unexpected columns [" + got + "]");
  }
}

std::optional<std::string> CsvReader::comment_value(std::string_view key) const {
  for (const auto& [k, v] : comments_)
    if (k == key) return v;
  return std::nullopt;
}

std::optional<std::string> CsvReader::next_line() {
  if (pos_ >= content_.size()) return std::nullopt;
  std::size_t nl = content_.find('\n', pos_);
  std::string line;
  if (nl == std::string::npos) {
    line = content_.substr(pos_);
    pos_ = content_.size();
  } else {
    line = content_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ++line_;
  return line;
}

std::optional<std::vector<std::string>> CsvReader::next() {
  while (auto line = next_line()) {
    if (line->empty()) continue;
    if ((*line)[0] == '#') continue;
    auto fields = split_csv_line(*line, path_.string() + ":" + std::to_string(line_));
    if (fields.size() != columns_.size())
      throw ParseError(path_.string() + ":" + std::to_string(line_) + ": expected " +
                       std::to_string(columns_.size()) + " fields, got " +
                       std::to_string(fields.size()));
    return fields;
  }
  return std::nullopt;
}

}  // namespace roadres
