#include "dbench/search.hpp"

#include <algorithm>
#include <unordered_map>

#include "dbench/error.hpp"

namespace dbench {

bool MatchResult::is_match(std::size_t gallery_index) const {
  return std::binary_search(matched.begin(), matched.end(), gallery_index);
}

std::vector<std::string> MatchResult::matched_ids(std::span<const FaceRecord> gallery) const {
  std::vector<std::string> ids;
  ids.reserve(matched.size());
  for (auto i : matched) ids.push_back(gallery[i].id);
  return ids;
}

MatchResult match_from_distances(std::string probe_id, std::vector<double> distances, double threshold) {
  MatchResult r{std::move(probe_id), {}, std::move(distances)};
  for (std::size_t i = 0; i < r.distances.size(); ++i) {
    if (r.distances[i] <= threshold) r.matched.push_back(i);
  }
  return r;
}

MatchResult search_1_to_n(const Embedding& probe, std::span<const Embedding> gallery, double threshold) {
  if (gallery.empty()) throw UsageError("search against an empty gallery");
  std::vector<double> d(gallery.size());
  for (std::size_t i = 0; i < gallery.size(); ++i) d[i] = cosine_distance(probe, gallery[i]);
  return match_from_distances(probe.id(), std::move(d), threshold);
}

std::string_view tally_mode_name(TallyMode mode) {
  return mode == TallyMode::PerComparison ? "per-comparison" : "per-probe";
}

std::optional<TallyMode> parse_tally_mode(std::string_view name) {
  if (name == "per-comparison") return TallyMode::PerComparison;
  if (name == "per-probe") return TallyMode::PerProbe;
  return std::nullopt;
}

ConfusionCounts tally_probe(const MatchResult& result, std::size_t gallery_size, std::optional<std::size_t> mate_index,
                            TallyMode mode) {
  if (result.distances.size() != gallery_size) {
    throw UsageError("match result for '" + result.probe_id + "' covers " + std::to_string(result.distances.size()) +
                     " gallery entries, gallery has " + std::to_string(gallery_size));
  }
  ConfusionCounts c;
  const bool mate_matched = mate_index && result.is_match(*mate_index);
  const std::size_t nonmate_matches = result.matched.size() - (mate_matched ? 1 : 0);
  const std::size_t nonmates = gallery_size - (mate_index ? 1 : 0);

  if (mate_index) (mate_matched ? c.tp : c.fn) += 1;
  if (mode == TallyMode::PerComparison) {
    c.fp += nonmate_matches;
    c.tn += nonmates - nonmate_matches;
  } else if (nonmates > 0) {
    (nonmate_matches > 0 ? c.fp : c.tn) += 1;
  }
  return c;
}

std::vector<std::optional<std::size_t>> mate_indices(const Split& split) {
  std::unordered_map<std::string_view, std::size_t> position;
  for (std::size_t i = 0; i < split.gallery.size(); ++i) position.emplace(split.gallery[i].id, i);
  std::vector<std::optional<std::size_t>> out;
  out.reserve(split.probes.size());
  for (const auto& p : split.probes) {
    const auto it = position.find(p.record.id);
    if (p.target_present) {
      if (it == position.end()) throw UsageError("target-present probe '" + p.record.id + "' has no gallery mate");
      out.emplace_back(it->second);
    } else {
      if (it != position.end()) throw UsageError("target-absent probe '" + p.record.id + "' is enrolled in the gallery");
      out.emplace_back(std::nullopt);
    }
  }
  return out;
}

ConfusionCounts tally(const Split& split, std::span<const MatchResult> results, TallyMode mode) {
  if (results.size() != split.probes.size()) {
    throw UsageError("tally got " + std::to_string(results.size()) + " results for " +
                     std::to_string(split.probes.size()) + " probes");
  }
  const auto mates = mate_indices(split);
  ConfusionCounts total;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].probe_id != split.probes[i].record.id) {
      throw UsageError("result " + std::to_string(i) + " is for '" + results[i].probe_id + "', expected probe '" +
                       split.probes[i].record.id + "'");
    }
    total += tally_probe(results[i], split.gallery.size(), mates[i], mode);
  }
  return total;
}

}  // namespace dbench
