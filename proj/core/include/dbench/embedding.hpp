#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dbench/image.hpp"

namespace dbench {

/// Fixed-dimension feature vector for one image. Construction enforces the
/// invariants: non-empty, finite, at least one non-zero entry.
class Embedding {
 public:
  Embedding(std::string id, std::vector<double> vector);

  const std::string& id() const noexcept { return id_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t dim() const noexcept { return values_.size(); }

  bool operator==(const Embedding&) const = default;

 private:
  std::string id_;
  std::vector<double> values_;
};

/// 1 - cos(a, b), clamped to [0, 2]. Throws UsageError on dimension mismatch.
double cosine_distance(const Embedding& a, const Embedding& b);
double cosine_distance(std::span<const double> a, std::span<const double> b);

inline constexpr int kBuiltinGrid = 32;

/// Grayscale -> 32x32 area average -> mean-centred -> unit L2 norm.
/// Images whose centred vector vanishes map to e1; never throws.
Embedding builtin_embed(const Image& img, std::string id = {});

/// What a provider needs to embed one image. `key` names the (identity,
/// treatment) pair; `load` produces the pixels on demand, so providers that
/// look embeddings up by key never touch the image files.
struct EmbedRequest {
  std::string key;
  std::function<Image()> load;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::string name() const = 0;
  /// Providers that cannot run concurrently return false; callers then embed serially.
  virtual bool concurrent() const { return true; }
  virtual Embedding embed(const EmbedRequest& request) const = 0;
};

class BuiltinProvider final : public EmbeddingProvider {
 public:
  std::string name() const override { return "builtin"; }
  Embedding embed(const EmbedRequest& request) const override;
};

/// Serves embeddings precomputed into an EMB1 file, looked up by key.
class FileProvider final : public EmbeddingProvider {
 public:
  /// Reads the whole file up front; missing or malformed files raise ProviderError.
  explicit FileProvider(const std::filesystem::path& path);

  std::string name() const override { return "embeddings-file:" + path_.string(); }
  Embedding embed(const EmbedRequest& request) const override;

  std::size_t size() const noexcept { return table_.size(); }
  std::size_t dim() const noexcept { return dim_; }

 private:
  std::filesystem::path path_;
  std::size_t dim_ = 0;
  std::unordered_map<std::string, Embedding> table_;
};

/// Parses "builtin" or "embeddings-file:PATH".
std::unique_ptr<EmbeddingProvider> make_provider(std::string_view spec);

/// Validates a provider spec string without loading anything.
bool is_valid_provider_spec(std::string_view spec);

}  // namespace dbench
