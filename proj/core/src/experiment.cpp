#include "dbench/experiment.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "dbench/embedding.hpp"
#include "dbench/error.hpp"
#include "dbench/image_io.hpp"
#include "dbench/parallel.hpp"
#include "dbench/plot.hpp"

namespace dbench {
namespace {

// Embedding values plus the squared norm, accumulated in the same order as
// cosine_distance so table lookups agree with it bit for bit.
struct Prepared {
  std::vector<double> v;
  double sq = 0.0;
};

Prepared prepare(const Embedding& e) {
  Prepared p{std::vector<double>(e.values().begin(), e.values().end()), 0.0};
  for (double x : p.v) p.sq += x * x;
  return p;
}

double distance(const Prepared& a, const Prepared& b) {
  double ab = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) ab += a.v[i] * b.v[i];
  return std::clamp(1.0 - ab / std::sqrt(a.sq * b.sq), 0.0, 2.0);
}

std::string where(std::optional<std::size_t> replication, const std::optional<DegradationFactor>& factor) {
  std::string s;
  if (replication) s += "replication " + std::to_string(*replication);
  if (factor) {
    if (!s.empty()) s += ", ";
    s += std::string(factor_name(factor->kind())) + " level " + format_level(factor->raw_level());
  }
  return s;
}

// Runs fn, prefixing any harness error with the experiment coordinates.
template <class Fn>
auto with_context(std::optional<std::size_t> replication, const std::optional<DegradationFactor>& factor, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw_error(e.kind(), "[" + where(replication, factor) + "] " + e.what());
  } catch (const std::exception& e) {
    throw_error(ErrorKind::Data, "[" + where(replication, factor) + "] " + e.what());
  }
}

std::string opt(const std::optional<double>& v) { return v ? format_level(*v) : "NA"; }

// Removes everything it recorded unless commit() is called.
class OutputGuard {
 public:
  explicit OutputGuard(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    created_dir_ = !std::filesystem::exists(dir_, ec);
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : files_) std::filesystem::remove(p, ec);
    if (created_dir_) std::filesystem::remove(dir_, ec);
  }

  void write(const std::string& name, const std::string& content) {
    const auto path = dir_ / name;
    files_.push_back(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) throw IoError("cannot write " + path.string());
  }
  void track(const std::filesystem::path& p) { files_.push_back(p); }
  void commit() { committed_ = true; }

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> files_;
  bool created_dir_ = false;
  bool committed_ = false;
};

std::vector<Prepared> embed_all(const EmbeddingProvider& provider, const std::vector<EmbedRequest>& requests,
                                std::size_t threads, const std::optional<DegradationFactor>& factor) {
  std::vector<Prepared> out(requests.size());
  with_context(std::nullopt, factor, [&] {
    parallel_for(requests.size(), provider.concurrent() ? threads : 1,
                 [&](std::size_t i) { out[i] = prepare(provider.embed(requests[i])); });
    return 0;
  });
  return out;
}

using CellCounts = std::array<ConfusionCounts, kCellCount>;

struct PoseShift {
  std::string subgroup;
  RateKind rate;
  double baseline;
  double psi0;
  bool clamped;
};

}  // namespace

std::string treatment_key(const std::string& id, const DegradationFactor& factor) {
  if (factor.kind() != FactorKind::Pose && factor.is_baseline()) return id;
  return id + "__" + std::string(factor_name(factor.kind())) + "_" + format_level(factor.raw_level());
}

Image load_treated_image(const FaceRecord& record, const DegradationFactor& factor) {
  if (factor.kind() == FactorKind::Pose) {
    const auto it = record.pose_variants.find(factor.raw_level());
    if (it == record.pose_variants.end()) {
      throw DataError("record " + record.id + " has no pose variant for psi = " + format_level(factor.raw_level()));
    }
    return load_image(it->second);
  }
  const Image clean = load_image(record.image_path);
  return factor.is_baseline() ? clean : apply(clean, factor);
}

RunResult run_experiment(const ExperimentConfig& cfg, const LogFn& log) {
  auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };
  cfg.validate();
  const auto provider = make_provider(cfg.provider);
  const std::size_t threads = resolve_threads(cfg.threads);

  RunResult result;
  result.output_dir = cfg.output_dir;
  Manifest manifest = load_manifest(cfg.manifest);
  result.warnings = manifest.warnings;
  if (manifest.dropped_children > 0) {
    result.warnings.push_back("dropped " + std::to_string(manifest.dropped_children) + " records under age 10");
  }
  if (manifest.dropped_unknown_race > 0) {
    result.warnings.push_back("dropped " + std::to_string(manifest.dropped_unknown_race) +
                              " records with unsupported race labels");
  }

  std::vector<FaceRecord> pop = std::move(manifest.records);
  const auto pose_sweep = std::find_if(cfg.sweeps.begin(), cfg.sweeps.end(),
                                       [](const auto& s) { return s.kind == FactorKind::Pose; });
  if (pose_sweep != cfg.sweeps.end()) {
    const auto before = pop.size();
    std::erase_if(pop, [&](const FaceRecord& r) {
      return std::any_of(pose_sweep->levels.begin(), pose_sweep->levels.end(),
                         [&](double psi) { return !r.pose_variants.contains(psi); });
    });
    if (pop.empty()) throw DataError("no record has pose variants for every requested psi");
    if (pop.size() < before) {
      result.warnings.push_back("pose sweep restricts the population to " + std::to_string(pop.size()) + " of " +
                                std::to_string(before) + " records with all requested pose variants");
    }
  }
  for (const auto& w : result.warnings) say("warning: " + w);

  const std::size_t reps = cfg.plan.replications;
  std::vector<Split> splits(reps);
  parallel_for(reps, threads, [&](std::size_t r) {
    splits[r] = with_context(r, std::nullopt, [&] { return make_split(pop, cfg.target, cfg.plan, r); });
  });
  say("built " + std::to_string(reps) + " splits from " + std::to_string(pop.size()) + " records");

  // Positions into `pop` for every id used as gallery or probe in any replication.
  std::map<std::string, std::size_t> pop_index;
  for (std::size_t i = 0; i < pop.size(); ++i) pop_index.emplace(pop[i].id, i);
  std::vector<std::ptrdiff_t> gallery_col(pop.size(), -1), probe_row(pop.size(), -1);
  std::vector<std::size_t> gallery_members, probe_members;
  for (const auto& split : splits) {
    for (const auto& g : split.gallery) {
      const auto i = pop_index.at(g.id);
      if (gallery_col[i] < 0) gallery_col[i] = 0;
    }
    for (const auto& p : split.probes) {
      const auto i = pop_index.at(p.record.id);
      if (probe_row[i] < 0) probe_row[i] = 0;
    }
  }
  for (std::size_t i = 0; i < pop.size(); ++i) {
    if (gallery_col[i] >= 0) {
      gallery_col[i] = static_cast<std::ptrdiff_t>(gallery_members.size());
      gallery_members.push_back(i);
    }
    if (probe_row[i] >= 0) {
      probe_row[i] = static_cast<std::ptrdiff_t>(probe_members.size());
      probe_members.push_back(i);
    }
  }

  auto clean_requests = [&](const std::vector<std::size_t>& members) {
    std::vector<EmbedRequest> reqs;
    reqs.reserve(members.size());
    for (auto i : members) {
      reqs.push_back({pop[i].id, [&rec = pop[i]] { return load_image(rec.image_path); }});
    }
    return reqs;
  };
  const auto gallery_vecs = embed_all(*provider, clean_requests(gallery_members), threads, std::nullopt);
  say("embedded " + std::to_string(gallery_vecs.size()) + " gallery images");
  std::vector<Prepared> clean_probe_vecs;
  const bool any_clean_probe = std::any_of(cfg.sweeps.begin(), cfg.sweeps.end(), [](const auto& s) {
    return s.kind != FactorKind::Pose &&
           std::any_of(s.levels.begin(), s.levels.end(), [&](double l) { return l == baseline_level(s.kind); });
  });
  if (any_clean_probe) clean_probe_vecs = embed_all(*provider, clean_requests(probe_members), threads, std::nullopt);

  const std::size_t dim = gallery_vecs.front().v.size();
  auto check_dim = [&](const std::vector<Prepared>& vecs, const std::optional<DegradationFactor>& f) {
    for (const auto& p : vecs) {
      if (p.v.size() != dim) {
        throw ProviderError("[" + where(std::nullopt, f) + "] provider returned embeddings of dimension " +
                            std::to_string(p.v.size()) + " and " + std::to_string(dim));
      }
    }
  };
  check_dim(clean_probe_vecs, std::nullopt);

  // A dense probe x gallery table pays off whenever the id unions are no
  // larger than the comparisons the replications would make on their own.
  const std::size_t rows = probe_members.size(), cols = gallery_members.size();
  std::size_t comparisons_per_level = 0;
  for (const auto& s : splits) comparisons_per_level += s.probes.size() * s.gallery.size();
  const bool dense = rows * cols <= comparisons_per_level;

  // counts[sweep][level][replication][cell]
  std::vector<std::vector<std::vector<CellCounts>>> counts(cfg.sweeps.size());
  for (std::size_t si = 0; si < cfg.sweeps.size(); ++si) {
    const auto& sweep = cfg.sweeps[si];
    counts[si].resize(sweep.levels.size());
    for (std::size_t li = 0; li < sweep.levels.size(); ++li) {
      const DegradationFactor factor(sweep.kind, sweep.levels[li]);
      say("running " + std::string(factor_name(sweep.kind)) + " level " + format_level(factor.raw_level()));

      std::vector<Prepared> treated;
      const bool clean = sweep.kind != FactorKind::Pose && factor.is_baseline();
      if (!clean) {
        std::vector<EmbedRequest> reqs;
        reqs.reserve(rows);
        for (auto i : probe_members) {
          reqs.push_back({treatment_key(pop[i].id, factor),
                          [&rec = pop[i], factor] { return load_treated_image(rec, factor); }});
        }
        treated = embed_all(*provider, reqs, threads, factor);
        check_dim(treated, factor);
      }
      const auto& probe_vecs = clean ? clean_probe_vecs : treated;

      std::vector<double> table;
      if (dense) {
        table.resize(rows * cols);
        parallel_for(rows, threads, [&](std::size_t r) {
          for (std::size_t c = 0; c < cols; ++c) table[r * cols + c] = distance(probe_vecs[r], gallery_vecs[c]);
        });
      }

      auto& level_counts = counts[si][li];
      level_counts.resize(reps);
      parallel_for(reps, threads, [&](std::size_t r) {
        with_context(r, factor, [&] {
          const Split& split = splits[r];
          const auto mates = mate_indices(split);
          std::vector<std::size_t> gcols(split.gallery.size());
          for (std::size_t j = 0; j < gcols.size(); ++j) {
            gcols[j] = static_cast<std::size_t>(gallery_col[pop_index.at(split.gallery[j].id)]);
          }
          CellCounts cells{};
          for (std::size_t p = 0; p < split.probes.size(); ++p) {
            const auto& rec = split.probes[p].record;
            const auto row = static_cast<std::size_t>(probe_row[pop_index.at(rec.id)]);
            std::vector<double> d(gcols.size());
            for (std::size_t j = 0; j < gcols.size(); ++j) {
              d[j] = dense ? table[row * cols + gcols[j]] : distance(probe_vecs[row], gallery_vecs[gcols[j]]);
            }
            const auto match = match_from_distances(rec.id, std::move(d), cfg.threshold);
            cells[rec.cell().index()] += tally_probe(match, split.gallery.size(), mates[p], cfg.tally);
          }
          level_counts[r] = cells;
          return 0;
        });
      });
    }
  }

  auto subgroup_total = [](const CellCounts& cells, const Subgroup& g) {
    ConfusionCounts total;
    for (std::size_t c = 0; c < kCellCount; ++c) {
      if (g.contains(Cell::from_index(c))) total += cells[c];
    }
    return total;
  };

  // Curves, one block per (factor, subgroup), levels ascending.
  std::vector<std::vector<std::vector<CurvePoint>>> curves(cfg.sweeps.size());
  for (std::size_t si = 0; si < cfg.sweeps.size(); ++si) {
    const auto& sweep = cfg.sweeps[si];
    for (const auto& g : cfg.subgroups) {
      std::vector<LevelSamples> levels;
      for (std::size_t li = 0; li < sweep.levels.size(); ++li) {
        LevelSamples ls{sweep.levels[li], {}};
        for (const auto& cells : counts[si][li]) ls.replications.emplace_back(subgroup_total(cells, g));
        levels.push_back(std::move(ls));
      }
      curves[si].push_back(assemble_curve(sweep.kind, g, levels, cfg.confidence));
    }
  }

  std::vector<PoseShift> shifts;
  if (pose_sweep != cfg.sweeps.end()) {
    const auto psi = static_cast<std::size_t>(pose_sweep - cfg.sweeps.begin());
    const auto ref = std::find_if(cfg.sweeps.begin(), cfg.sweeps.end(),
                                  [](const auto& s) { return s.kind != FactorKind::Pose; });
    if (ref == cfg.sweeps.end()) {
      result.warnings.push_back("pose curves left unaligned: no other factor supplies a baseline");
      say("warning: " + result.warnings.back());
    } else {
      const auto ri = static_cast<std::size_t>(ref - cfg.sweeps.begin());
      for (std::size_t gi = 0; gi < cfg.subgroups.size(); ++gi) {
        const auto& ref_curve = curves[ri][gi];
        const auto base = std::find_if(ref_curve.begin(), ref_curve.end(),
                                       [](const auto& p) { return p.normalized_level == 0.0; });
        auto& pose = curves[psi][gi];
        const auto zero = std::find_if(pose.begin(), pose.end(), [](const auto& p) { return p.raw_level == 0.0; });
        for (auto kind : {RateKind::Fpr, RateKind::Fnr}) {
          const char* rate_name = kind == RateKind::Fpr ? "FPR" : "FNR";
          const auto b = base->rate(kind);
          const auto z = zero->rate(kind);
          if (!b || !z) {
            result.warnings.push_back(std::string("pose ") + rate_name + " for " + cfg.subgroups[gi].name() +
                                      " left unaligned: rate undefined at baseline or psi = 0");
            say("warning: " + result.warnings.back());
            continue;
          }
          pose = align_pose_curve(pose, kind, *b);
          const bool clamped = std::any_of(pose.begin(), pose.end(), [](const auto& p) { return p.clamped; });
          shifts.push_back({cfg.subgroups[gi].name(), kind, *b, *z, clamped});
        }
      }
    }
  }

  std::ostringstream curves_csv, counts_csv, pose_csv;
  for (const auto& per_factor : curves) {
    for (const auto& c : per_factor) result.curves.insert(result.curves.end(), c.begin(), c.end());
  }
  curves_csv << curves_to_csv(result.curves);

  counts_csv << "factor,raw_level,subgroup,replication,tp,fp,tn,fn\n";
  for (std::size_t si = 0; si < cfg.sweeps.size(); ++si) {
    const auto& sweep = cfg.sweeps[si];
    std::vector<std::size_t> order(sweep.levels.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
      return normalize(sweep.kind, sweep.levels[a]) < normalize(sweep.kind, sweep.levels[b]);
    });
    for (auto li : order) {
      for (const auto& g : cfg.subgroups) {
        for (std::size_t r = 0; r < reps; ++r) {
          const auto c = subgroup_total(counts[si][li][r], g);
          counts_csv << factor_name(sweep.kind) << ',' << format_level(sweep.levels[li]) << ',' << g.name() << ','
                     << r << ',' << c.tp << ',' << c.fp << ',' << c.tn << ',' << c.fn << '\n';
        }
      }
    }
  }

  OutputGuard out(cfg.output_dir);
  out.write("curves.csv", curves_csv.str());
  out.write("counts.csv", counts_csv.str());
  out.write("config-echo.json", config_to_json(cfg));
  if (!shifts.empty()) {
    pose_csv << "subgroup,rate,baseline,psi0_rate,shift,clamped\n";
    for (const auto& s : shifts) {
      pose_csv << s.subgroup << ',' << (s.rate == RateKind::Fpr ? "fpr" : "fnr") << ',' << format_level(s.baseline)
               << ',' << format_level(s.psi0) << ',' << format_level(s.baseline - s.psi0) << ','
               << (s.clamped ? "true" : "false") << '\n';
    }
    out.write("pose_alignment.csv", pose_csv.str());
  }
  if (cfg.plots) {
    for (const auto& p : emit_all_plots(result.curves, cfg.output_dir)) out.track(p);
  }
  out.commit();
  say("wrote " + std::to_string(result.curves.size()) + " curve rows to " + cfg.output_dir.string());
  return result;
}

std::string curves_to_csv(std::span<const CurvePoint> curves) {
  std::ostringstream os;
  os << kCurvesHeader << '\n';
  for (const auto& p : curves) {
    os << factor_name(p.kind) << ',' << format_level(p.raw_level) << ',' << format_level(p.normalized_level) << ','
       << p.subgroup.name() << ',' << opt(p.fpr) << ',' << opt(p.fpr_lo) << ',' << opt(p.fpr_hi) << ','
       << opt(p.fnr) << ',' << opt(p.fnr_lo) << ',' << opt(p.fnr_hi) << ',' << p.counts.tp << ',' << p.counts.fp
       << ',' << p.counts.tn << ',' << p.counts.fn << '\n';
  }
  return os.str();
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(std::string_view s, std::size_t line_no, const char* column) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw FormatError("curves.csv line " + std::to_string(line_no) + ": bad " + column + " '" + std::string(s) + "'");
  }
  return v;
}

std::optional<double> parse_optional(std::string_view s, std::size_t line_no, const char* column) {
  if (s == "NA") return std::nullopt;
  return parse_number<double>(s, line_no, column);
}

}  // namespace

std::vector<CurvePoint> parse_curves_csv(std::string_view text) {
  std::vector<CurvePoint> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1) {
      if (line != kCurvesHeader) throw FormatError("curves.csv: unexpected header '" + std::string(line) + "'");
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 14) {
      throw FormatError("curves.csv line " + std::to_string(line_no) + ": expected 14 fields, got " +
                        std::to_string(f.size()));
    }
    const auto kind = parse_factor_kind(f[0]);
    if (!kind) throw FormatError("curves.csv line " + std::to_string(line_no) + ": unknown factor '" + std::string(f[0]) + "'");
    const auto group = parse_subgroup(f[3]);
    if (!group) {
      throw FormatError("curves.csv line " + std::to_string(line_no) + ": unknown subgroup '" + std::string(f[3]) + "'");
    }
    CurvePoint p{};
    p.kind = *kind;
    p.raw_level = parse_number<double>(f[1], line_no, "raw_level");
    p.normalized_level = parse_number<double>(f[2], line_no, "normalized_level");
    p.subgroup = *group;
    p.fpr = parse_optional(f[4], line_no, "fpr");
    p.fpr_lo = parse_optional(f[5], line_no, "fpr_lo");
    p.fpr_hi = parse_optional(f[6], line_no, "fpr_hi");
    p.fnr = parse_optional(f[7], line_no, "fnr");
    p.fnr_lo = parse_optional(f[8], line_no, "fnr_lo");
    p.fnr_hi = parse_optional(f[9], line_no, "fnr_hi");
    p.counts = {parse_number<std::uint64_t>(f[10], line_no, "tp"), parse_number<std::uint64_t>(f[11], line_no, "fp"),
                parse_number<std::uint64_t>(f[12], line_no, "tn"), parse_number<std::uint64_t>(f[13], line_no, "fn")};
    out.push_back(std::move(p));
  }
  if (line_no == 0) throw FormatError("curves.csv is empty");
  return out;
}

}  // namespace dbench
