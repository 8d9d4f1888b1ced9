#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dbench/embedding.hpp"
#include "dbench/error.hpp"
#include "dbench/experiment.hpp"

namespace dbench {

using nlohmann::json;

namespace {

const std::set<std::string> kKnownKeys = {
    "manifest",      "output_dir",      "seed",           "threshold", "gallery_size", "probes_absent",
    "probes_present", "replications",   "stratify_probes", "freeze_gallery", "target",   "tally",
    "sweeps",        "provider",        "subgroups",      "plots",     "threads",      "confidence",
    "image_format"};

template <class T>
T get_as(const json& doc, const char* key) {
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("config key '") + key + "' has the wrong type");
  }
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

std::vector<FactorSweep> default_sweeps() {
  return {
      {FactorKind::Contrast, {0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0}},
      {FactorKind::Brightness, {0.0, 25.0, 50.0, 75.0, 100.0}},
      {FactorKind::MotionBlur, {0.0, 20.0, 40.0, 60.0, 80.0, 100.0}},
      {FactorKind::Resolution, {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 100.0}},
      {FactorKind::Pose, {-5.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0}},
  };
}

std::string format_level(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void ExperimentConfig::validate() const {
  if (manifest.empty()) throw UsageError("config: manifest path is required");
  if (output_dir.empty()) throw UsageError("config: output_dir is required");
  plan.validate();
  if (plan.replications < 2) throw UsageError("config: replications must be at least 2 for confidence intervals");
  target.validate();
  if (!std::isfinite(threshold)) throw UsageError("config: threshold must be finite");
  if (!(confidence > 0.0 && confidence < 1.0)) throw UsageError("config: confidence must lie in (0, 1)");
  if (!is_valid_provider_spec(provider)) {
    throw UsageError("config: provider must be 'builtin' or 'embeddings-file:PATH', got '" + provider + "'");
  }
  if (sweeps.empty()) throw UsageError("config: at least one factor sweep is required");
  if (subgroups.empty()) throw UsageError("config: at least one subgroup is required");
  std::set<FactorKind> kinds;
  for (const auto& s : sweeps) {
    const std::string name(factor_name(s.kind));
    if (!kinds.insert(s.kind).second) throw UsageError("config: duplicate sweep for " + name);
    std::set<double> seen;
    bool has_baseline = false;
    for (double level : s.levels) {
      DegradationFactor f(s.kind, level);  // range check
      if (!seen.insert(level).second) throw UsageError("config: duplicate " + name + " level " + format_level(level));
      if (s.kind == FactorKind::MotionBlur && level != std::floor(level)) {
        throw UsageError("config: motion_blur levels must be integers");
      }
      has_baseline = has_baseline || f.is_baseline();
    }
    if (!has_baseline) {
      throw UsageError("config: " + name + " sweep must include its baseline level " +
                       format_level(baseline_level(s.kind)));
    }
  }
  std::set<std::string> names;
  for (const auto& g : subgroups) {
    if (!names.insert(g.name()).second) throw UsageError("config: duplicate subgroup " + g.name());
  }
}

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (!kKnownKeys.contains(key)) throw UsageError("config: unknown key '" + key + "'");
  }

  ExperimentConfig cfg;
  if (doc.contains("manifest")) cfg.manifest = resolve(get_as<std::string>(doc, "manifest"), base_dir);
  if (doc.contains("output_dir")) cfg.output_dir = resolve(get_as<std::string>(doc, "output_dir"), base_dir);
  if (doc.contains("seed")) cfg.plan.seed = get_as<std::uint64_t>(doc, "seed");
  if (doc.contains("threshold")) cfg.threshold = get_as<double>(doc, "threshold");
  if (doc.contains("gallery_size")) cfg.plan.gallery_size = get_as<std::size_t>(doc, "gallery_size");
  if (doc.contains("probes_absent")) cfg.plan.probes_absent = get_as<std::size_t>(doc, "probes_absent");
  if (doc.contains("probes_present")) cfg.plan.probes_present = get_as<std::size_t>(doc, "probes_present");
  if (doc.contains("replications")) cfg.plan.replications = get_as<std::size_t>(doc, "replications");
  if (doc.contains("stratify_probes")) cfg.plan.stratify_probes = get_as<bool>(doc, "stratify_probes");
  if (doc.contains("freeze_gallery")) cfg.plan.freeze_gallery = get_as<bool>(doc, "freeze_gallery");
  if (doc.contains("plots")) cfg.plots = get_as<bool>(doc, "plots");
  if (doc.contains("threads")) cfg.threads = get_as<std::size_t>(doc, "threads");
  if (doc.contains("confidence")) cfg.confidence = get_as<double>(doc, "confidence");

  if (doc.contains("provider")) {
    auto spec = get_as<std::string>(doc, "provider");
    constexpr std::string_view prefix = "embeddings-file:";
    if (spec.starts_with(prefix)) {
      spec = std::string(prefix) + resolve(spec.substr(prefix.size()), base_dir).string();
    }
    cfg.provider = spec;
  }
  if (doc.contains("tally")) {
    const auto name = get_as<std::string>(doc, "tally");
    const auto mode = parse_tally_mode(name);
    if (!mode) throw UsageError("config: tally must be per-comparison or per-probe, got '" + name + "'");
    cfg.tally = *mode;
  }
  if (doc.contains("image_format")) {
    const auto name = get_as<std::string>(doc, "image_format");
    const auto fmt = parse_image_format(name);
    if (!fmt) throw UsageError("config: image_format must be png, pgm or ppm, got '" + name + "'");
    cfg.image_format = *fmt;
  }
  if (doc.contains("target")) {
    const auto& t = doc.at("target");
    if (!t.is_object()) throw UsageError("config: target must be an object");
    TargetDistribution dist;
    for (const auto& [key, value] : t.items()) {
      if (key != "race" && key != "gender") throw UsageError("config: unknown target key '" + key + "'");
      if (!value.is_object()) throw UsageError("config: target." + key + " must be an object");
    }
    if (t.contains("race")) {
      for (const auto& [name, p] : t.at("race").items()) {
        const auto race = parse_race(name);
        if (!race || !p.is_number()) throw UsageError("config: bad target race entry '" + name + "'");
        dist.race[*race] = p.get<double>();
      }
    }
    if (t.contains("gender")) {
      for (const auto& [name, p] : t.at("gender").items()) {
        const auto gender = parse_gender(name);
        if (!gender || !p.is_number()) throw UsageError("config: bad target gender entry '" + name + "'");
        dist.gender[*gender] = p.get<double>();
      }
    }
    cfg.target = dist;
  }
  if (doc.contains("sweeps")) {
    const auto& s = doc.at("sweeps");
    if (!s.is_object()) throw UsageError("config: sweeps must be an object of factor -> levels");
    cfg.sweeps.clear();
    for (auto kind : kAllFactorKinds) {
      const std::string name(factor_name(kind));
      if (!s.contains(name)) continue;
      const auto& levels = s.at(name);
      if (!levels.is_array()) throw UsageError("config: sweeps." + name + " must be an array");
      FactorSweep sweep{kind, {}};
      for (const auto& v : levels) {
        if (!v.is_number()) throw UsageError("config: sweeps." + name + " must contain numbers");
        sweep.levels.push_back(v.get<double>());
      }
      cfg.sweeps.push_back(std::move(sweep));
    }
    for (const auto& [name, _] : s.items()) {
      if (!parse_factor_kind(name)) throw UsageError("config: unknown factor '" + name + "' in sweeps");
    }
  }
  if (doc.contains("subgroups")) {
    const auto names = get_as<std::vector<std::string>>(doc, "subgroups");
    cfg.subgroups.clear();
    for (const auto& n : names) {
      const auto g = parse_subgroup(n);
      if (!g) throw UsageError("config: unknown subgroup '" + n + "'");
      cfg.subgroups.push_back(*g);
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json doc;
  doc["manifest"] = cfg.manifest.generic_string();
  doc["output_dir"] = cfg.output_dir.generic_string();
  doc["seed"] = cfg.plan.seed;
  doc["threshold"] = cfg.threshold;
  doc["gallery_size"] = cfg.plan.gallery_size;
  doc["probes_absent"] = cfg.plan.probes_absent;
  doc["probes_present"] = cfg.plan.probes_present;
  doc["replications"] = cfg.plan.replications;
  doc["stratify_probes"] = cfg.plan.stratify_probes;
  doc["freeze_gallery"] = cfg.plan.freeze_gallery;
  json race = json::object(), gender = json::object();
  for (const auto& [r, p] : cfg.target.race) race[std::string(race_name(r))] = p;
  for (const auto& [g, p] : cfg.target.gender) gender[std::string(gender_name(g))] = p;
  doc["target"] = {{"race", race}, {"gender", gender}};
  doc["tally"] = std::string(tally_mode_name(cfg.tally));
  json sweeps = json::object();
  for (const auto& s : cfg.sweeps) sweeps[std::string(factor_name(s.kind))] = s.levels;
  doc["sweeps"] = sweeps;
  doc["provider"] = cfg.provider;
  json groups = json::array();
  for (const auto& g : cfg.subgroups) groups.push_back(g.name());
  doc["subgroups"] = groups;
  doc["plots"] = cfg.plots;
  doc["threads"] = cfg.threads;
  doc["confidence"] = cfg.confidence;
  doc["image_format"] = std::string(image_format_extension(cfg.image_format).substr(1));
  return doc.dump(2) + "\n";
}

}  // namespace dbench
