#include "dbench/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "dbench/error.hpp"
#include "dbench/rng.hpp"

namespace dbench {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// RFC 4180-style field splitting for a single line (no embedded newlines).
std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) throw FormatError("manifest line " + std::to_string(line_no) + ": unterminated quote");
  fields.emplace_back(trim(field));
  return fields;
}

std::vector<FaceRecord> sorted_by_id(std::vector<FaceRecord> records) {
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return records;
}

// Draws k of the given records uniformly without replacement (partial
// Fisher-Yates over the id-sorted candidates).
void draw_without_replacement(std::vector<const FaceRecord*> candidates, std::size_t k, Rng& rng,
                              std::vector<FaceRecord>& out) {
  std::sort(candidates.begin(), candidates.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
    out.push_back(*candidates[i]);
  }
}

std::vector<FaceRecord> sample(std::span<const FaceRecord> pop, const TargetDistribution* dist, std::size_t n,
                               std::uint64_t seed, const char* what) {
  Rng rng(seed);
  std::vector<FaceRecord> out;
  out.reserve(n);
  if (dist == nullptr) {
    if (pop.size() < n) {
      throw CapacityError(std::string(what) + ": need " + std::to_string(n) + " records, population has " +
                          std::to_string(pop.size()));
    }
    std::vector<const FaceRecord*> all;
    all.reserve(pop.size());
    for (const auto& r : pop) all.push_back(&r);
    draw_without_replacement(std::move(all), n, rng, out);
    return sorted_by_id(std::move(out));
  }

  const auto weights = dist->cell_weights();
  const auto seats = largest_remainder(weights, n);
  std::array<std::vector<const FaceRecord*>, kCellCount> strata;
  for (const auto& r : pop) strata[r.cell().index()].push_back(&r);
  for (std::size_t c = 0; c < kCellCount; ++c) {
    if (strata[c].size() < seats[c]) {
      throw CapacityError(std::string(what) + ": cell " + cell_name(Cell::from_index(c)) + " needs " +
                          std::to_string(seats[c]) + " records, population has " + std::to_string(strata[c].size()));
    }
  }
  for (std::size_t c = 0; c < kCellCount; ++c) draw_without_replacement(std::move(strata[c]), seats[c], rng, out);
  return sorted_by_id(std::move(out));
}

}  // namespace

std::string_view race_name(Race race) {
  switch (race) {
    case Race::White:
      return "White";
    case Race::Black:
      return "Black";
    case Race::Asian:
      return "Asian";
  }
  return "";
}

std::string_view gender_name(Gender gender) { return gender == Gender::Female ? "Female" : "Male"; }

std::optional<Race> parse_race(std::string_view name) {
  for (auto r : kAllRaces) {
    if (race_name(r) == name) return r;
  }
  return std::nullopt;
}

std::optional<Gender> parse_gender(std::string_view name) {
  for (auto g : kAllGenders) {
    if (gender_name(g) == name) return g;
  }
  return std::nullopt;
}

std::string cell_name(Cell cell) { return std::string(race_name(cell.race)) + "-" + std::string(gender_name(cell.gender)); }

std::string Subgroup::name() const {
  if (race && gender) return cell_name({*race, *gender});
  if (race) return std::string(race_name(*race));
  if (gender) return std::string(gender_name(*gender));
  return "all";
}

std::optional<Subgroup> parse_subgroup(std::string_view name) {
  if (name == "all") return Subgroup::all();
  if (auto r = parse_race(name)) return Subgroup{r, std::nullopt};
  if (auto g = parse_gender(name)) return Subgroup{std::nullopt, g};
  const auto dash = name.find('-');
  if (dash == std::string_view::npos) return std::nullopt;
  auto r = parse_race(name.substr(0, dash));
  auto g = parse_gender(name.substr(dash + 1));
  if (!r || !g) return std::nullopt;
  return Subgroup{r, g};
}

std::vector<Subgroup> default_subgroups() {
  std::vector<Subgroup> out{Subgroup::all()};
  for (auto r : kAllRaces) out.push_back({r, std::nullopt});
  for (auto g : kAllGenders) out.push_back({std::nullopt, g});
  for (auto r : kAllRaces) {
    for (auto g : kAllGenders) out.push_back({r, g});
  }
  return out;
}

bool is_child_age_bucket(std::string_view bucket) {
  bucket = trim(bucket);
  const auto dash = bucket.find('-');
  if (dash == std::string_view::npos) return false;
  const auto upper = bucket.substr(dash + 1);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(upper.data(), upper.data() + upper.size(), value);
  if (ec != std::errc() || ptr != upper.data() + upper.size()) return false;
  return value < 10;
}

Manifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (trim(line).empty()) continue;
    rows.emplace_back(line_no, split_csv_line(line, line_no));
  }
  if (rows.empty()) throw FormatError("manifest is empty; header row required");

  const auto& header = rows.front().second;
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column.emplace(header[i], i);
  for (const char* required : {"id", "image_path", "race", "gender", "age_bucket"}) {
    if (!column.contains(required)) throw FormatError(std::string("manifest: missing required column '") + required + "'");
  }
  const bool has_pose = column.contains("pose_psi") && column.contains("pose_path");
  if (column.contains("pose_psi") != column.contains("pose_path")) {
    throw FormatError("manifest: pose_psi and pose_path columns must appear together");
  }

  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };

  Manifest m;
  std::set<std::string> seen;
  std::set<std::string> dropped;
  std::vector<std::pair<std::size_t, const std::vector<std::string>*>> pose_rows;
  std::map<std::string, FaceRecord> kept;

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& [ln, fields] = rows[r];
    if (fields.size() < header.size()) {
      throw FormatError("manifest line " + std::to_string(ln) + ": expected " + std::to_string(header.size()) +
                        " fields, got " + std::to_string(fields.size()));
    }
    auto get = [&](const char* name) -> const std::string& { return fields[column.at(name)]; };
    if (get("id").empty()) throw FormatError("manifest line " + std::to_string(ln) + ": empty id");
    if (has_pose && (!get("pose_psi").empty() || !get("pose_path").empty())) {
      pose_rows.emplace_back(ln, &fields);
      continue;
    }
    const std::string& id = get("id");
    if (!seen.insert(id).second) throw FormatError("manifest line " + std::to_string(ln) + ": duplicate id '" + id + "'");

    const std::string& race_label = get("race");
    std::optional<Race> race = race_label == "Indian" ? std::optional<Race>(Race::Asian) : parse_race(race_label);
    if (!race) {
      ++m.dropped_unknown_race;
      m.warnings.push_back("line " + std::to_string(ln) + ": dropped '" + id + "' with unsupported race '" +
                           race_label + "'");
      dropped.insert(id);
      continue;
    }
    const auto gender = parse_gender(get("gender"));
    if (!gender) {
      throw FormatError("manifest line " + std::to_string(ln) + ": unknown gender '" + get("gender") + "'");
    }
    if (is_child_age_bucket(get("age_bucket"))) {
      ++m.dropped_children;
      dropped.insert(id);
      continue;
    }
    if (get("image_path").empty()) throw FormatError("manifest line " + std::to_string(ln) + ": empty image_path");
    kept.emplace(id, FaceRecord{id, resolve(get("image_path")), *race, *gender, get("age_bucket"), {}});
  }

  for (const auto& [ln, fields] : pose_rows) {
    auto get = [&](const char* name) -> const std::string& { return (*fields)[column.at(name)]; };
    const std::string& id = get("id");
    if (dropped.contains(id)) continue;
    auto it = kept.find(id);
    if (it == kept.end()) {
      throw FormatError("manifest line " + std::to_string(ln) + ": pose row for unknown id '" + id + "'");
    }
    const std::string& psi_text = get("pose_psi");
    double psi = 0.0;
    const auto [ptr, ec] = std::from_chars(psi_text.data(), psi_text.data() + psi_text.size(), psi);
    if (ec != std::errc() || ptr != psi_text.data() + psi_text.size() || get("pose_path").empty()) {
      throw FormatError("manifest line " + std::to_string(ln) + ": pose rows need numeric pose_psi and pose_path");
    }
    if (!it->second.pose_variants.emplace(psi, resolve(get("pose_path"))).second) {
      throw FormatError("manifest line " + std::to_string(ln) + ": duplicate pose_psi for '" + id + "'");
    }
  }

  for (auto& [id, rec] : kept) {
    if (!rec.pose_variants.empty() && !rec.pose_variants.contains(0.0)) {
      throw FormatError("manifest: pose variants for '" + id + "' lack psi = 0");
    }
    m.records.push_back(std::move(rec));
  }
  if (m.dropped_unknown_race > 0) {
    m.warnings.push_back(std::to_string(m.dropped_unknown_race) + " record(s) dropped for unsupported race labels");
  }
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str(), path.parent_path());
}

TargetDistribution TargetDistribution::us_census_2020() {
  return {{{Race::White, 0.578}, {Race::Black, 0.121}, {Race::Asian, 0.059}},
          {{Gender::Female, 0.504}, {Gender::Male, 0.496}}};
}

void TargetDistribution::validate() const {
  double race_sum = 0.0, gender_sum = 0.0;
  for (const auto& [r, p] : race) {
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("race proportion for " + std::string(race_name(r)) + " outside [0,1]");
    race_sum += p;
  }
  for (const auto& [g, p] : gender) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw UsageError("gender proportion for " + std::string(gender_name(g)) + " outside [0,1]");
    }
    gender_sum += p;
  }
  if (race_sum > 1.0 + 1e-9 || gender_sum > 1.0 + 1e-9) throw UsageError("proportions sum to more than 1");
  if (race_sum <= 0.0 || gender_sum <= 0.0) throw UsageError("target distribution has no positive proportions");
}

std::array<double, kCellCount> TargetDistribution::cell_weights() const {
  validate();
  std::array<double, kCellCount> w{};
  double total = 0.0;
  for (std::size_t c = 0; c < kCellCount; ++c) {
    const Cell cell = Cell::from_index(c);
    const auto r = race.find(cell.race);
    const auto g = gender.find(cell.gender);
    w[c] = (r == race.end() ? 0.0 : r->second) * (g == gender.end() ? 0.0 : g->second);
    total += w[c];
  }
  for (auto& v : w) v /= total;
  return w;
}

std::vector<std::size_t> largest_remainder(std::span<const double> weights, std::size_t n) {
  std::vector<std::size_t> seats(weights.size());
  std::vector<double> remainder(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = weights[i] * static_cast<double>(n);
    seats[i] = static_cast<std::size_t>(std::floor(quota));
    remainder[i] = quota - static_cast<double>(seats[i]);
    assigned += seats[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n && k < order.size(); ++k, ++assigned) ++seats[order[k]];
  return seats;
}

std::vector<FaceRecord> stratified_sample(std::span<const FaceRecord> pop, const TargetDistribution& dist,
                                          std::size_t n, std::uint64_t seed) {
  return sample(pop, &dist, n, seed, "stratified sample");
}

std::vector<FaceRecord> uniform_sample(std::span<const FaceRecord> pop, std::size_t n, std::uint64_t seed) {
  return sample(pop, nullptr, n, seed, "uniform sample");
}

void SplitPlan::validate() const {
  if (gallery_size == 0 || probes_absent == 0 || probes_present == 0 || replications == 0) {
    throw UsageError("split plan counts must all be positive");
  }
  if (probes_present > gallery_size) throw UsageError("probes_present cannot exceed gallery_size");
}

Split make_split(std::span<const FaceRecord> pop, const TargetDistribution& dist, const SplitPlan& plan,
                 std::size_t replication_index) {
  plan.validate();
  if (pop.size() < plan.gallery_size + plan.probes_absent) {
    throw CapacityError("population of " + std::to_string(pop.size()) + " cannot supply " +
                        std::to_string(plan.gallery_size) + " gallery + " + std::to_string(plan.probes_absent) +
                        " target-absent identities");
  }
  const std::uint64_t rep_seed = derive_seed(plan.seed, replication_index);
  const std::uint64_t gallery_seed =
      plan.freeze_gallery ? derive_seed(derive_seed(plan.seed, 0), 1) : derive_seed(rep_seed, 1);

  Split split;
  split.gallery = sample(pop, &dist, plan.gallery_size, gallery_seed, "gallery");

  const TargetDistribution* probe_dist = plan.stratify_probes ? &dist : nullptr;
  auto present = sample(split.gallery, probe_dist, plan.probes_present, derive_seed(rep_seed, 2), "target-present probes");

  std::unordered_set<std::string> in_gallery;
  for (const auto& r : split.gallery) in_gallery.insert(r.id);
  std::vector<FaceRecord> outside;
  for (const auto& r : pop) {
    if (!in_gallery.contains(r.id)) outside.push_back(r);
  }
  auto absent = sample(outside, probe_dist, plan.probes_absent, derive_seed(rep_seed, 3), "target-absent probes");

  split.probes.reserve(present.size() + absent.size());
  for (auto& r : present) split.probes.push_back({std::move(r), true});
  for (auto& r : absent) split.probes.push_back({std::move(r), false});
  return split;
}

}  // namespace dbench
