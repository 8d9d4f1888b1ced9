#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dbench/cohort.hpp"
#include "dbench/embedding.hpp"

namespace dbench {

/// Operating point used unless configured otherwise (cosine distance).
inline constexpr double kDefaultThreshold = 0.68;

/// Outcome of one threshold-driven 1:n search. `distances` is aligned with
/// the gallery order; `matched` holds gallery indices with distance <= T in
/// ascending order. There is no rank cutoff.
struct MatchResult {
  std::string probe_id;
  std::vector<std::size_t> matched;
  std::vector<double> distances;

  bool is_match(std::size_t gallery_index) const;
  std::vector<std::string> matched_ids(std::span<const FaceRecord> gallery) const;
};

MatchResult search_1_to_n(const Embedding& probe, std::span<const Embedding> gallery, double threshold);

/// Same decision rule over distances computed elsewhere.
MatchResult match_from_distances(std::string probe_id, std::vector<double> distances, double threshold);

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
  bool operator==(const ConfusionCounts&) const = default;
};

enum class TallyMode {
  PerComparison,  // every probe-vs-gallery pair contributes one outcome
  PerProbe,       // one mate outcome and one nonmate outcome per probe
};

std::string_view tally_mode_name(TallyMode mode);
std::optional<TallyMode> parse_tally_mode(std::string_view name);

/// Counts for a single probe against `gallery`. `mate_index` is the gallery
/// position of the probe's identity, or nullopt for target-absent probes.
ConfusionCounts tally_probe(const MatchResult& result, std::size_t gallery_size, std::optional<std::size_t> mate_index,
                            TallyMode mode = TallyMode::PerComparison);

/// Gallery index of each probe's mate (nullopt when target-absent). Throws
/// UsageError if a target-present probe has no mate in the gallery.
std::vector<std::optional<std::size_t>> mate_indices(const Split& split);

/// Sums tally_probe over all probes. Results must be one per probe, in probe order.
ConfusionCounts tally(const Split& split, std::span<const MatchResult> results,
                      TallyMode mode = TallyMode::PerComparison);

}  // namespace dbench
