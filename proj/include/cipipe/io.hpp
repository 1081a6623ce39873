#pragma once

#include "cipipe/types.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>

namespace cipipe {

// --- CIEM binary embeddings -------------------------------------------------
//
//   "CIEM" | u8 version=1 | u32 dim | u64 count |
//   count x ( u16 id_len | id bytes | dim x f32 )
//
// All integers and floats little-endian.

inline constexpr std::uint8_t kCiemVersion = 1;
inline constexpr std::size_t kCiemHeaderBytes = 4 + 1 + 4 + 8;

/// Returns the number of bytes written.
std::uint64_t write_embeddings(std::span<const EmbeddingRecord> records, std::uint32_t dim, std::ostream& out);
EmbeddingSet read_embeddings(std::istream& in);

void write_embeddings_file(const EmbeddingSet& set, const std::filesystem::path& path);
EmbeddingSet read_embeddings_file(const std::filesystem::path& path);

// --- CSV ----------------------------------------------------------------------

/// `user_id,image_id`
LikesIndex read_likes(std::istream& in);
LikesIndex read_likes_file(const std::filesystem::path& path);
void write_likes(const LikesIndex& likes, std::ostream& out);

/// `image_id,attribute,value`; an empty value marks a categorical label.
AttributeMap read_attributes(std::istream& in);
AttributeMap read_attributes_file(const std::filesystem::path& path);

}  // namespace cipipe
