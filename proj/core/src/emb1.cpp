#include "dbench/emb1.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <unordered_set>

#include "dbench/error.hpp"

namespace dbench::emb1 {
namespace {

constexpr std::uint8_t kMagic[4] = {'E', 'M', 'B', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    throw FormatError("EMB1: " + msg + " at byte offset " + std::to_string(at));
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) fail(std::string("truncated ") + what, pos_);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode(std::span<const Embedding> records) {
  const std::size_t dim = records.empty() ? 0 : records.front().dim();
  if (dim > std::numeric_limits<std::uint32_t>::max() || records.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw UsageError("EMB1: too many records or dimensions");
  }
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(dim));
  put_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    if (r.dim() != dim) {
      throw UsageError("EMB1: record '" + r.id() + "' has dim " + std::to_string(r.dim()) + ", file dim is " +
                       std::to_string(dim));
    }
    put_u32(out, static_cast<std::uint32_t>(r.id().size()));
    out.insert(out.end(), r.id().begin(), r.id().end());
    for (double v : r.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

std::vector<Embedding> decode(std::span<const std::uint8_t> bytes, std::optional<std::uint32_t> expected_dim) {
  Cursor in(bytes);
  const auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) in.fail("bad magic, expected \"EMB1\"", 0);
  const std::uint32_t dim = in.u32("dim");
  if (expected_dim && *expected_dim != dim) {
    in.fail("dim " + std::to_string(dim) + " does not match expected " + std::to_string(*expected_dim), 4);
  }
  const std::uint32_t count = in.u32("count");
  if (dim == 0 && count > 0) in.fail("dim must be positive", 4);

  std::vector<Embedding> out;
  std::unordered_set<std::string> ids;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::size_t record_at = in.offset();
    const std::uint32_t id_len = in.u32("id length");
    const auto id_bytes = in.take(id_len, "id");
    std::string id(id_bytes.begin(), id_bytes.end());
    if (!ids.insert(id).second) in.fail("duplicate id '" + id + "'", record_at);
    const std::size_t values_at = in.offset();
    const auto raw = in.take(static_cast<std::size_t>(dim) * 4, "vector");
    std::vector<double> values(dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(raw[4 * i + b]) << (8 * b);
      values[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    try {
      out.emplace_back(std::move(id), std::move(values));
    } catch (const UsageError& e) {
      in.fail(e.what(), values_at);
    }
  }
  if (!in.done()) in.fail("trailing bytes after " + std::to_string(count) + " records", in.offset());
  return out;
}

void write_file(const std::filesystem::path& path, std::span<const Embedding> records) {
  const auto bytes = encode(records);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<Embedding> read_file(const std::filesystem::path& path, std::optional<std::uint32_t> expected_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes, expected_dim);
}

}  // namespace dbench::emb1
