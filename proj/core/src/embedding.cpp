#include "dbench/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dbench/degrade.hpp"
#include "dbench/emb1.hpp"
#include "dbench/error.hpp"

namespace dbench {

Embedding::Embedding(std::string id, std::vector<double> vector) : id_(std::move(id)), values_(std::move(vector)) {
  if (values_.empty()) throw UsageError("embedding '" + id_ + "' has dimension 0");
  bool nonzero = false;
  for (double v : values_) {
    if (!std::isfinite(v)) throw UsageError("embedding '" + id_ + "' has a non-finite entry");
    nonzero = nonzero || v != 0.0;
  }
  if (!nonzero) throw UsageError("embedding '" + id_ + "' is the zero vector");
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw UsageError("embedding dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  const double d = 1.0 - ab / std::sqrt(aa * bb);
  return std::clamp(d, 0.0, 2.0);
}

double cosine_distance(const Embedding& a, const Embedding& b) { return cosine_distance(a.values(), b.values()); }

Embedding builtin_embed(const Image& img, std::string id) {
  const Image gray = to_grayscale(img);
  std::vector<double> v = area_average(gray, 0, kBuiltinGrid, kBuiltinGrid);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double norm2 = 0.0;
  for (double& x : v) {
    x -= mean;
    norm2 += x * x;
  }
  const double norm = std::sqrt(norm2);
  if (!(norm > 1e-9)) {
    std::fill(v.begin(), v.end(), 0.0);
    v[0] = 1.0;
    return Embedding(std::move(id), std::move(v));
  }
  for (double& x : v) x /= norm;
  return Embedding(std::move(id), std::move(v));
}

Embedding BuiltinProvider::embed(const EmbedRequest& request) const {
  return builtin_embed(request.load(), request.key);
}

FileProvider::FileProvider(const std::filesystem::path& path) : path_(path) {
  std::vector<Embedding> records;
  try {
    records = emb1::read_file(path);
  } catch (const Error& e) {
    throw ProviderError("embeddings file " + path.string() + ": " + e.what());
  }
  dim_ = records.empty() ? 0 : records.front().dim();
  table_.reserve(records.size());
  for (auto& r : records) {
    auto key = r.id();
    table_.emplace(std::move(key), std::move(r));
  }
}

Embedding FileProvider::embed(const EmbedRequest& request) const {
  const auto it = table_.find(request.key);
  if (it == table_.end()) {
    throw ProviderError("embeddings file " + path_.string() + " has no record '" + request.key + "'");
  }
  return it->second;
}

namespace {
constexpr std::string_view kFilePrefix = "embeddings-file:";
}

bool is_valid_provider_spec(std::string_view spec) {
  return spec == "builtin" || (spec.starts_with(kFilePrefix) && spec.size() > kFilePrefix.size());
}

std::unique_ptr<EmbeddingProvider> make_provider(std::string_view spec) {
  if (spec == "builtin") return std::make_unique<BuiltinProvider>();
  if (spec.starts_with(kFilePrefix) && spec.size() > kFilePrefix.size()) {
    const std::filesystem::path path(std::string(spec.substr(kFilePrefix.size())));
    if (!std::filesystem::exists(path)) throw ProviderError("embeddings file not found: " + path.string());
    return std::make_unique<FileProvider>(path);
  }
  throw UsageError("unknown provider '" + std::string(spec) + "'; expected builtin or embeddings-file:PATH");
}

}  // namespace dbench
