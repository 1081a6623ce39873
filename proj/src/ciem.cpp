#include "cipipe/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

namespace cipipe {
namespace {

static_assert(std::endian::native == std::endian::little, "CIEM I/O assumes a little-endian host");

constexpr std::array<char, 4> kMagic{'C', 'I', 'E', 'M'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

// Bytes still available in a seekable stream, or max() if unknown.
std::uint64_t remaining(std::istream& in) {
  const auto here = in.tellg();
  if (here < 0) return UINT64_MAX;
  in.seekg(0, std::ios::end);
  const auto end = in.tellg();
  in.seekg(here);
  if (end < 0) return UINT64_MAX;
  return static_cast<std::uint64_t>(end - here);
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(void* dst, std::size_t n, const std::string& what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw Error(Errc::truncated, "CIEM stream truncated in " + what);
    }
  }

  template <typename T>
  T get(const std::string& what) {
    T v;
    bytes(&v, sizeof(T), what);
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace

std::uint64_t write_embeddings(std::span<const EmbeddingRecord> records, std::uint32_t dim, std::ostream& out) {
  if (dim == 0) throw Error(Errc::dimension_mismatch, "CIEM dimension must be >= 1");
  std::unordered_set<std::string_view> seen;
  for (const auto& r : records) {
    if (static_cast<std::size_t>(r.vector.size()) != dim) {
      throw Error(Errc::dimension_mismatch, "record '" + r.image_id + "' does not have dimension " + std::to_string(dim));
    }
    if (r.image_id.empty()) throw Error(Errc::empty_id, "record with an empty id");
    if (r.image_id.size() > UINT16_MAX) throw Error(Errc::invalid_argument, "image id longer than 65535 bytes");
    if (!r.vector.allFinite()) throw Error(Errc::non_finite, "record '" + r.image_id + "' has a non-finite component");
    if (!seen.insert(r.image_id).second) throw Error(Errc::duplicate_id, "duplicate image id '" + r.image_id + "'");
  }

  out.write(kMagic.data(), kMagic.size());
  put<std::uint8_t>(out, kCiemVersion);
  put<std::uint32_t>(out, dim);
  put<std::uint64_t>(out, records.size());
  std::uint64_t written = kCiemHeaderBytes;
  for (const auto& r : records) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(r.image_id.size()));
    out.write(r.image_id.data(), static_cast<std::streamsize>(r.image_id.size()));
    out.write(reinterpret_cast<const char*>(r.vector.data()), static_cast<std::streamsize>(sizeof(float) * dim));
    written += 2 + r.image_id.size() + sizeof(float) * dim;
  }
  if (!out) throw Error(Errc::io_failure, "failed to write CIEM stream");
  return written;
}

EmbeddingSet read_embeddings(std::istream& in) {
  Reader rd(in);
  std::array<char, 4> magic{};
  rd.bytes(magic.data(), magic.size(), "header");
  if (magic != kMagic) throw Error(Errc::bad_magic, "not a CIEM stream (bad magic)");
  const auto version = rd.get<std::uint8_t>("header");
  if (version != kCiemVersion) {
    throw Error(Errc::unsupported_version, "unsupported CIEM version " + std::to_string(version));
  }
  EmbeddingSet set;
  set.dim = rd.get<std::uint32_t>("header");
  const auto count = rd.get<std::uint64_t>("header");
  if (set.dim == 0) throw Error(Errc::dimension_mismatch, "CIEM dimension must be >= 1");

  const std::uint64_t left = remaining(in);
  const std::uint64_t min_record = 2 + 1 + 4ULL * set.dim;
  if (left != UINT64_MAX && count > 0 && (count > left || left / count < min_record)) {
    throw Error(Errc::truncated, "CIEM stream truncated: header declares " + std::to_string(count) +
                                     " records of dimension " + std::to_string(set.dim));
  }
  set.records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));

  std::unordered_set<std::string> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string where = "record " + std::to_string(i);
    EmbeddingRecord rec;
    const auto len = rd.get<std::uint16_t>(where);
    if (len == 0) throw Error(Errc::empty_id, where + " has an empty id");
    rec.image_id.resize(len);
    rd.bytes(rec.image_id.data(), len, where);
    rec.vector.resize(set.dim);
    rd.bytes(rec.vector.data(), sizeof(float) * set.dim, where);
    if (!rec.vector.allFinite()) throw Error(Errc::non_finite, where + " ('" + rec.image_id + "') has a non-finite component");
    if (!seen.insert(rec.image_id).second) throw Error(Errc::duplicate_id, "duplicate image id '" + rec.image_id + "'");
    set.records.push_back(std::move(rec));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(Errc::trailing_data, "CIEM stream has bytes after the last record");
  }
  return set;
}

void write_embeddings_file(const EmbeddingSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_failure, "cannot open '" + path.string() + "' for writing");
  write_embeddings(set.records, set.dim, out);
  out.close();
  if (!out) throw Error(Errc::io_failure, "failed to write '" + path.string() + "'");
}

EmbeddingSet read_embeddings_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot open '" + path.string() + "'");
  return read_embeddings(in);
}

}  // namespace cipipe
