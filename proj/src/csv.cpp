#include "cipipe/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace cipipe {
namespace {

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      return fields;
    }
    fields.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

// Reads the next line without its terminator. Returns false at end of input.
bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

void expect_header(std::istream& in, std::string_view header) {
  std::string line;
  if (!next_line(in, line) || line != header) {
    throw Error(Errc::missing_header, "expected CSV header '" + std::string(header) + "'");
  }
}

std::ifstream open_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

LikesIndex read_likes(std::istream& in) {
  expect_header(in, "user_id,image_id");
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  std::size_t line_no = 1;
  while (next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 2) {
      throw Error(Errc::malformed_row, "likes line " + std::to_string(line_no) + ": expected 2 fields");
    }
    if (fields[0].empty() || fields[1].empty()) {
      throw Error(Errc::empty_field, "likes line " + std::to_string(line_no) + ": empty field");
    }
    pairs.emplace_back(std::move(fields[0]), std::move(fields[1]));
  }
  if (pairs.empty()) throw Error(Errc::zero_rows, "likes file has no rows");
  return LikesIndex::from_pairs(pairs);
}

LikesIndex read_likes_file(const std::filesystem::path& path) {
  auto in = open_text(path);
  return read_likes(in);
}

void write_likes(const LikesIndex& likes, std::ostream& out) {
  out << "user_id,image_id\n";
  for (std::size_t u = 0; u < likes.total_users(); ++u) {
    for (const auto& image : likes.liked(u)) out << likes.users()[u] << ',' << image << '\n';
  }
}

AttributeMap read_attributes(std::istream& in) {
  expect_header(in, "image_id,attribute,value");
  AttributeMap out;
  std::string line;
  std::size_t line_no = 1;
  while (next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    const std::string where = "attributes line " + std::to_string(line_no);
    if (fields.size() != 3) throw Error(Errc::malformed_row, where + ": expected 3 fields");
    if (fields[0].empty() || fields[1].empty()) throw Error(Errc::empty_field, where + ": empty field");
    auto& entry = out[fields[0]];
    if (fields[2].empty()) {
      entry.labels.insert(fields[1]);
      continue;
    }
    const auto& text = fields[2];
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
      throw Error(Errc::malformed_numeric, where + ": malformed numeric value '" + text + "'");
    }
    entry.numeric[fields[1]] = value;
  }
  return out;
}

AttributeMap read_attributes_file(const std::filesystem::path& path) {
  auto in = open_text(path);
  return read_attributes(in);
}

}  // namespace cipipe
