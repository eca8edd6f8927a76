#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace roadres {

/// Shortest round-trip decimal representation (deterministic across runs).
std::string format_double(double v);
double parse_double(std::string_view s, const std::string& context);
std::int64_t parse_int(std::string_view s, const std::string& context);

/// FNV-1a 64-bit. Used for the workspace manifest; change detection only,
/// not cryptographic.
std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string hash_hex(std::uint64_t h);

/// CSV writer emitting a `#schema: roadres/<name>/v<version>` line, then the
/// column header, then rows. Fields containing commas, quotes or newlines are
/// quoted RFC-4180 style. Lines end with '\n'.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::string_view schema_name, int version,
            const std::vector<std::string>& columns);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  /// Extra `#key: value` metadata line; must be called before the first row.
  void comment(std::string_view key, std::string_view value);
  void row(const std::vector<std::string>& fields);
  void close();  // flushes; called by destructor

  std::size_t rows_written() const { return rows_; }

 private:
  std::string buffer_;
  std::filesystem::path path_;
  std::size_t n_columns_;
  std::size_t rows_ = 0;
  bool header_written_ = false;
  bool closed_ = false;
  std::vector<std::string> columns_;
  std::vector<std::pair<std::string, std::string>> comments_;
  void flush_header();
};

/// Row-oriented CSV reader. Skips `#` comment lines (collecting them),
/// validates the header against expected columns when given.
class CsvReader {
 public:
  explicit CsvReader(const std::filesystem::path& path);

  /// Throws ParseError if the file's header does not match.
  void require_columns(const std::vector<std::string>& expected);

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<std::pair<std::string, std::string>>& comments() const { return comments_; }
  std::optional<std::string> comment_value(std::string_view key) const;

  /// Next data row, or nullopt at end of file.
  std::optional<std::vector<std::string>> next();

  std::size_t line_number() const { return line_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::string content_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
  std::vector<std::string> columns_;
  std::vector<std::pair<std::string, std::string>> comments_;
  std::optional<std::string> next_line();
};

std::vector<std::string> split_csv_line(std::string_view line, const std::string& context);

/// Reads a whole file into memory; throws ParseError if missing.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace roadres
