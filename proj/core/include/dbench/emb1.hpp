#pragma once

// EMB1 embedding interchange format, little-endian throughout:
//
//   "EMB1"  u32 dim  u32 count
//   count x { u32 id_len, id bytes (UTF-8), dim x float32 }
//
// The same layout is written by the builtin embedder and by external adapters.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dbench/embedding.hpp"

namespace dbench::emb1 {

std::vector<std::uint8_t> encode(std::span<const Embedding> records);

/// Strict decode: rejects bad magic, truncation, trailing bytes, duplicate
/// ids, non-finite values, and records inconsistent with `expected_dim`
/// when given. Errors are FormatError with the failing byte offset.
std::vector<Embedding> decode(std::span<const std::uint8_t> bytes, std::optional<std::uint32_t> expected_dim = {});

void write_file(const std::filesystem::path& path, std::span<const Embedding> records);
std::vector<Embedding> read_file(const std::filesystem::path& path, std::optional<std::uint32_t> expected_dim = {});

}  // namespace dbench::emb1
