#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dbench {

enum class Race { White, Black, Asian };
enum class Gender { Female, Male };

inline constexpr std::array<Race, 3> kAllRaces = {Race::White, Race::Black, Race::Asian};
inline constexpr std::array<Gender, 2> kAllGenders = {Gender::Female, Gender::Male};

std::string_view race_name(Race race);
std::string_view gender_name(Gender gender);
std::optional<Race> parse_race(std::string_view name);
std::optional<Gender> parse_gender(std::string_view name);

/// One race x gender stratum, indexed race-major: White/Female = 0 ... Asian/Male = 5.
struct Cell {
  Race race;
  Gender gender;

  std::size_t index() const noexcept {
    return static_cast<std::size_t>(race) * kAllGenders.size() + static_cast<std::size_t>(gender);
  }
  static Cell from_index(std::size_t i) noexcept {
    return {kAllRaces[i / kAllGenders.size()], kAllGenders[i % kAllGenders.size()]};
  }
  bool operator==(const Cell&) const = default;
};

inline constexpr std::size_t kCellCount = kAllRaces.size() * kAllGenders.size();

std::string cell_name(Cell cell);

/// "all", a race marginal, a gender marginal, or a race x gender cell.
struct Subgroup {
  std::optional<Race> race;
  std::optional<Gender> gender;

  static Subgroup all() { return {}; }
  bool contains(Cell cell) const noexcept {
    return (!race || *race == cell.race) && (!gender || *gender == cell.gender);
  }
  /// "all", "White", "Female", "Black-Female".
  std::string name() const;
  bool operator==(const Subgroup&) const = default;
};

std::optional<Subgroup> parse_subgroup(std::string_view name);

/// all, 3 races, 2 genders, 6 cells.
std::vector<Subgroup> default_subgroups();

struct FaceRecord {
  std::string id;
  std::filesystem::path image_path;
  Race race;
  Gender gender;
  std::string age_bucket;
  std::map<double, std::filesystem::path> pose_variants;  // psi -> image; contains 0 when non-empty

  Cell cell() const noexcept { return {race, gender}; }
  bool operator==(const FaceRecord&) const = default;
};

struct Manifest {
  std::vector<FaceRecord> records;  // sorted by id
  std::size_t dropped_children = 0;
  std::size_t dropped_unknown_race = 0;
  std::vector<std::string> warnings;
};

/// Reads the face manifest CSV. Indian is folded into Asian, ages under 10
/// and unsupported race labels are dropped (and counted). Relative image
/// paths resolve against the manifest's directory.
Manifest load_manifest(const std::filesystem::path& path);

/// Parses manifest text; `base_dir` anchors relative image paths.
Manifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir);

/// True for FairFace-style age buckets whose upper bound is below 10.
bool is_child_age_bucket(std::string_view bucket);

struct TargetDistribution {
  std::map<Race, double> race;
  std::map<Gender, double> gender;

  /// 2020 US Census: 57.8% White, 12.1% Black, 5.9% Asian; 50.4% female.
  static TargetDistribution us_census_2020();
  void validate() const;
  /// Per-cell weights race_p * gender_p, renormalized to sum to 1.
  std::array<double, kCellCount> cell_weights() const;
  bool operator==(const TargetDistribution&) const = default;
};

/// Hamilton / largest-remainder apportionment of n seats over weights that
/// sum to 1. Ties in the remainder go to the lower index.
std::vector<std::size_t> largest_remainder(std::span<const double> weights, std::size_t n);

/// Stratified simple random sample without replacement. Output sorted by id.
std::vector<FaceRecord> stratified_sample(std::span<const FaceRecord> pop, const TargetDistribution& dist,
                                          std::size_t n, std::uint64_t seed);

/// Uniform sample of n records without replacement. Output sorted by id.
std::vector<FaceRecord> uniform_sample(std::span<const FaceRecord> pop, std::size_t n, std::uint64_t seed);

struct SplitPlan {
  std::size_t gallery_size = 167;
  std::size_t probes_absent = 84;
  std::size_t probes_present = 83;
  std::size_t replications = 256;
  std::uint64_t seed = 0;
  bool stratify_probes = true;
  bool freeze_gallery = false;

  void validate() const;
  bool operator==(const SplitPlan&) const = default;
};

struct Probe {
  FaceRecord record;
  bool target_present;

  bool operator==(const Probe&) const = default;
};

struct Split {
  std::vector<FaceRecord> gallery;  // sorted by id
  std::vector<Probe> probes;        // target-present first, then target-absent; each sorted by id

  bool operator==(const Split&) const = default;
};

Split make_split(std::span<const FaceRecord> pop, const TargetDistribution& dist, const SplitPlan& plan,
                 std::size_t replication_index);

}  // namespace dbench
