#include "mvrad/config.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "mvrad/error.hpp"

namespace mvrad {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw Error(ErrorKind::SchemaViolation, "key '" + key + "': expected " + expected + ", got '" + value + "'");
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "a non-negative integer");
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) { return static_cast<std::size_t>(to_u64(key, v)); }

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  errno = 0;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE || !std::isfinite(out)) {
    bad_value(key, v, "a finite number");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::string> split_list(const std::string& key, const std::string& v) {
  std::vector<std::string> items;
  std::string rest = v;
  if (!rest.empty() && rest.front() == '[' && rest.back() == ']') rest = rest.substr(1, rest.size() - 2);
  std::stringstream ss(rest);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) bad_value(key, v, "a comma-separated list without empty items");
    items.push_back(item);
  }
  if (items.empty()) bad_value(key, v, "a non-empty comma-separated list");
  return items;
}

std::vector<std::size_t> to_size_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(key, v)) out.push_back(to_size(key, item));
  return out;
}

std::optional<std::size_t> to_depth(const std::string& key, const std::string& v) {
  if (v == "none" || v == "None" || v == "null") return std::nullopt;
  return to_size(key, v);
}

MaxFeatures to_max_features(const std::string& key, const std::string& v) {
  try {
    return MaxFeatures::parse(v);
  } catch (const Error&) {
    bad_value(key, v, "sqrt, log2 or a fraction in (0, 1]");
  }
}

Criterion to_criterion(const std::string& key, const std::string& v) {
  if (v == "gini") return Criterion::Gini;
  if (v == "entropy") return Criterion::Entropy;
  bad_value(key, v, "gini or entropy");
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::vector<std::pair<std::string, Setter>>& setters() {
  static const std::vector<std::pair<std::string, Setter>> table = [] {
    std::vector<std::pair<std::string, Setter>> t;
    auto add = [&t](std::string key, Setter s) { t.emplace_back(std::move(key), std::move(s)); };
    add("mode", [](RunConfig& c, const std::string& k, const std::string& v) {
      if (v == "synth" || v == "synthetic") {
        c.mode = DataMode::Synthetic;
      } else if (v == "real") {
        c.mode = DataMode::Real;
      } else {
        bad_value(k, v, "synth or real");
      }
    });
    add("seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); });
    add("out_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; });
    add("threads", [](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.threads = to_size(k, v); });
    add("data.t1gd", [](RunConfig& c, const std::string&, const std::string& v) { c.t1gd_csv = v; });
    add("data.flair", [](RunConfig& c, const std::string&, const std::string& v) { c.flair_csv = v; });
    add("data.clinical", [](RunConfig& c, const std::string&, const std::string& v) { c.clinical_csv = v; });
    add("synth.regime", [](RunConfig& c, const std::string& k, const std::string& v) {
      if (v != "default" && v != "shared-signal") bad_value(k, v, "default or shared-signal");
      c.synth_regime = v;
    });
    add("synth.n", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.n = to_size(k, v); });
    add("synth.d", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.d = to_size(k, v); });
    add("synth.latent_dim",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.latent_dim = to_size(k, v); });
    add("synth.signal_strength",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.signal_strength = to_double(k, v); });
    add("synth.noise_sigma",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.noise_sigma = to_double(k, v); });
    add("synth.private_dim",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.private_dim = to_size(k, v); });
    add("synth.private_scale",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.private_scale = to_double(k, v); });
    add("synth.distractor_fraction", [](RunConfig& c, const std::string& k, const std::string& v) {
      c.synth.distractor_fraction = to_double(k, v);
    });
    add("split.test_fraction",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.test_fraction = to_double(k, v); });
    add("split.cv_folds",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.cv_folds = to_size(k, v); });
    add("split.vae_val_fraction", [](RunConfig& c, const std::string& k, const std::string& v) {
      c.experiment.vae_val_fraction = to_double(k, v);
    });
    add("vae.encoder_hidden", [](RunConfig& c, const std::string& k, const std::string& v) {
      c.experiment.vae.encoder_hidden = to_size_list(k, v);
    });
    add("vae.latent_dim",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.vae.latent_dim = to_size(k, v); });
    add("vae.decoder_hidden", [](RunConfig& c, const std::string& k, const std::string& v) {
      c.experiment.vae.decoder_hidden = to_size_list(k, v);
    });
    add("vae.dropout_rate",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.vae.dropout_rate = to_double(k, v); });
    add("vae.l2_lambda",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.vae.l2_lambda = to_double(k, v); });
    add("vae.beta", [](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.vae.beta = to_double(k, v); });
    add("vae.lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.vae.lr = to_double(k, v); });
    add("vae.batch_size",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.vae.batch_size = to_size(k, v); });
    add("vae.max_epochs",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.vae.max_epochs = to_size(k, v); });
    add("vae.patience",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.vae.patience = to_size(k, v); });
    add("vae.min_delta",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.vae.min_delta = to_double(k, v); });
    add("vae.lr_factor",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.vae.lr_factor = to_double(k, v); });
    add("vae.lr_patience",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.vae.lr_patience = to_size(k, v); });
    add("vae.lr_floor",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.vae.lr_floor = to_double(k, v); });
    add("vae.logvar_clamp",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.vae.logvar_clamp = to_double(k, v); });
    add("grid.n_estimators", [](RunConfig& c, const std::string& k, const std::string& v) {
      c.experiment.grid.n_estimators = to_size_list(k, v);
    });
    add("grid.max_depth", [](RunConfig& c, const std::string& k, const std::string& v) {
      c.experiment.grid.max_depth.clear();
      for (const auto& item : split_list(k, v)) c.experiment.grid.max_depth.push_back(to_depth(k, item));
    });
    add("grid.max_features", [](RunConfig& c, const std::string& k, const std::string& v) {
      c.experiment.grid.max_features.clear();
      for (const auto& item : split_list(k, v)) c.experiment.grid.max_features.push_back(to_max_features(k, item));
    });
    add("grid.min_samples_split", [](RunConfig& c, const std::string& k, const std::string& v) {
      c.experiment.grid.min_samples_split = to_size_list(k, v);
    });
    add("grid.min_samples_leaf", [](RunConfig& c, const std::string& k, const std::string& v) {
      c.experiment.grid.min_samples_leaf = to_size_list(k, v);
    });
    add("grid.criterion", [](RunConfig& c, const std::string& k, const std::string& v) {
      c.experiment.grid.base.criterion = to_criterion(k, v);
    });
    add("grid.bootstrap",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.grid.base.bootstrap = to_bool(k, v); });
    add("baseline.n_estimators", [](RunConfig& c, const std::string& k, const std::string& v) {
      c.experiment.baseline.n_estimators = to_size(k, v);
    });
    add("baseline.max_depth",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.baseline.max_depth = to_depth(k, v); });
    add("baseline.max_features", [](RunConfig& c, const std::string& k, const std::string& v) {
      c.experiment.baseline.max_features = to_max_features(k, v);
    });
    add("baseline.min_samples_split", [](RunConfig& c, const std::string& k, const std::string& v) {
      c.experiment.baseline.min_samples_split = to_size(k, v);
    });
    add("baseline.min_samples_leaf", [](RunConfig& c, const std::string& k, const std::string& v) {
      c.experiment.baseline.min_samples_leaf = to_size(k, v);
    });
    add("baseline.criterion", [](RunConfig& c, const std::string& k, const std::string& v) {
      c.experiment.baseline.criterion = to_criterion(k, v);
    });
    add("baseline.bootstrap",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.experiment.baseline.bootstrap = to_bool(k, v); });
    return t;
  }();
  return table;
}

bool starts_with(const std::string& s, std::string_view prefix) { return s.rfind(prefix, 0) == 0; }

// Shortest text that parses back to the same double.
std::string g17(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T, class F>
std::string join(const std::vector<T>& items, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += fmt(items[i]);
  }
  return out;
}

std::string features_text(const MaxFeatures& f) {
  return f.rule == MaxFeatures::Rule::Fraction ? g17(f.fraction) : f.to_string();
}

}  // namespace

ConfigEntries parse_config_text(std::string_view text, std::string_view source) {
  ConfigEntries entries;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    std::string line(raw);
    if (line_no == 1 && starts_with(line, "\xEF\xBB\xBF")) line = line.substr(3);
    if (const auto hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto colon = line.find(':');
    const auto sep = std::min(eq, colon);
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    if (sep == std::string::npos) {
      throw Error(ErrorKind::SchemaViolation, where + ": expected 'key = value' or 'key: value'");
    }
    std::string key = trim(line.substr(0, sep));
    std::string value = trim(line.substr(sep + 1));
    if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty()) throw Error(ErrorKind::SchemaViolation, where + ": empty key");
    if (!entries.emplace(key, value).second) {
      throw Error(ErrorKind::SchemaViolation, where + ": duplicate key '" + key + "'");
    }
  }
  return entries;
}

ConfigEntries load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::ConfigNotFound, "cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string());
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, setter] : setters()) k.push_back(key);
    return k;
  }();
  return keys;
}

RunConfig resolve_config(const ConfigEntries& entries) {
  std::map<std::string, const Setter*> lookup;
  for (const auto& [key, setter] : setters()) lookup.emplace(key, &setter);
  for (const auto& [key, value] : entries) {
    if (!lookup.count(key)) throw Error(ErrorKind::SchemaViolation, "unknown key '" + key + "'");
  }
  if (!entries.count("seed")) throw Error(ErrorKind::SchemaViolation, "key 'seed' is required");

  bool has_data = false, has_synth = false;
  for (const auto& [key, value] : entries) {
    has_data |= starts_with(key, "data.");
    has_synth |= starts_with(key, "synth.");
  }

  RunConfig config;
  if (!entries.count("mode")) config.mode = has_data ? DataMode::Real : DataMode::Synthetic;

  // The regime sets a whole block of generator defaults, so it goes first and
  // individual synth.* keys refine it.
  if (auto it = entries.find("synth.regime"); it != entries.end()) (*lookup.at(it->first))(config, it->first, it->second);
  config.seed = to_u64("seed", entries.at("seed"));
  if (config.synth_regime == "shared-signal") config.synth = shared_signal_regime(config.seed);
  for (const auto& [key, value] : entries) {
    if (key == "synth.regime") continue;
    (*lookup.at(key))(config, key, value);
  }
  config.synth.seed = config.seed;
  config.experiment.seed = config.seed;

  if (config.mode == DataMode::Real) {
    if (has_synth) throw Error(ErrorKind::SchemaViolation, "synth.* keys are not allowed in real-data mode");
    for (const char* key : {"data.t1gd", "data.flair", "data.clinical"}) {
      if (!entries.count(key)) throw Error(ErrorKind::SchemaViolation, std::string("key '") + key + "' is required in real-data mode");
    }
  } else if (has_data) {
    throw Error(ErrorKind::SchemaViolation, "data.* keys are not allowed in synthetic mode");
  }

  const auto& e = config.experiment;
  if (!(e.test_fraction > 0.0 && e.test_fraction < 1.0)) {
    bad_value("split.test_fraction", g17(e.test_fraction), "a value in (0, 1)");
  }
  if (!(e.vae_val_fraction >= 0.0 && e.vae_val_fraction < 1.0)) {
    bad_value("split.vae_val_fraction", g17(e.vae_val_fraction), "a value in [0, 1)");
  }
  if (e.cv_folds < 2) bad_value("split.cv_folds", std::to_string(e.cv_folds), "at least 2");
  if (config.mode == DataMode::Synthetic) {
    if (config.synth.n < 4) bad_value("synth.n", std::to_string(config.synth.n), "at least 4");
    if (config.synth.d < 1) bad_value("synth.d", std::to_string(config.synth.d), "at least 1");
    if (config.synth.latent_dim < 1) bad_value("synth.latent_dim", std::to_string(config.synth.latent_dim), "at least 1");
    if (!(config.synth.distractor_fraction >= 0.0 && config.synth.distractor_fraction < 1.0)) {
      bad_value("synth.distractor_fraction", g17(config.synth.distractor_fraction), "a value in [0, 1)");
    }
    if (config.synth.noise_sigma < 0.0) bad_value("synth.noise_sigma", g17(config.synth.noise_sigma), "a value >= 0");
  }
  try {
    e.vae.validate();
    e.grid.validate();
    e.baseline.validate();
  } catch (const Error& err) {
    throw Error(ErrorKind::SchemaViolation, err.what());
  }
  return config;
}

std::string render_config(const RunConfig& c) {
  std::ostringstream out;
  const auto& e = c.experiment;
  auto kv = [&out](const std::string& key, const std::string& value) { out << key << " = " << value << '\n'; };
  auto size_text = [](std::size_t v) { return std::to_string(v); };
  kv("mode", c.mode == DataMode::Real ? "real" : "synth");
  kv("seed", std::to_string(c.seed));
  kv("out_dir", c.out_dir.string());
  kv("threads", std::to_string(e.threads));
  if (c.mode == DataMode::Real) {
    kv("data.t1gd", c.t1gd_csv.string());
    kv("data.flair", c.flair_csv.string());
    kv("data.clinical", c.clinical_csv.string());
  } else {
    kv("synth.regime", c.synth_regime);
    kv("synth.n", size_text(c.synth.n));
    kv("synth.d", size_text(c.synth.d));
    kv("synth.latent_dim", size_text(c.synth.latent_dim));
    kv("synth.signal_strength", g17(c.synth.signal_strength));
    kv("synth.noise_sigma", g17(c.synth.noise_sigma));
    kv("synth.private_dim", size_text(c.synth.private_dim));
    kv("synth.private_scale", g17(c.synth.private_scale));
    kv("synth.distractor_fraction", g17(c.synth.distractor_fraction));
  }
  kv("split.test_fraction", g17(e.test_fraction));
  kv("split.cv_folds", size_text(e.cv_folds));
  kv("split.vae_val_fraction", g17(e.vae_val_fraction));
  kv("vae.encoder_hidden", join(e.vae.encoder_hidden, size_text));
  kv("vae.latent_dim", size_text(e.vae.latent_dim));
  kv("vae.decoder_hidden", join(e.vae.decoder_hidden, size_text));
  kv("vae.dropout_rate", g17(e.vae.dropout_rate));
  kv("vae.l2_lambda", g17(e.vae.l2_lambda));
  kv("vae.beta", g17(e.vae.beta));
  kv("vae.lr", g17(e.vae.lr));
  kv("vae.batch_size", size_text(e.vae.batch_size));
  kv("vae.max_epochs", size_text(e.vae.max_epochs));
  kv("vae.patience", size_text(e.vae.patience));
  kv("vae.min_delta", g17(e.vae.min_delta));
  kv("vae.lr_factor", g17(e.vae.lr_factor));
  kv("vae.lr_patience", size_text(e.vae.lr_patience));
  kv("vae.lr_floor", g17(e.vae.lr_floor));
  kv("vae.logvar_clamp", g17(e.vae.logvar_clamp));
  kv("grid.n_estimators", join(e.grid.n_estimators, size_text));
  kv("grid.max_depth", join(e.grid.max_depth, format_max_depth));
  kv("grid.max_features", join(e.grid.max_features, features_text));
  kv("grid.min_samples_split", join(e.grid.min_samples_split, size_text));
  kv("grid.min_samples_leaf", join(e.grid.min_samples_leaf, size_text));
  kv("grid.criterion", std::string(criterion_name(e.grid.base.criterion)));
  kv("grid.bootstrap", e.grid.base.bootstrap ? "true" : "false");
  kv("baseline.n_estimators", size_text(e.baseline.n_estimators));
  kv("baseline.max_depth", format_max_depth(e.baseline.max_depth));
  kv("baseline.max_features", features_text(e.baseline.max_features));
  kv("baseline.min_samples_split", size_text(e.baseline.min_samples_split));
  kv("baseline.min_samples_leaf", size_text(e.baseline.min_samples_leaf));
  kv("baseline.criterion", std::string(criterion_name(e.baseline.criterion)));
  kv("baseline.bootstrap", e.baseline.bootstrap ? "true" : "false");
  return out.str();
}

}  // namespace mvrad
