#include "mvrad/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "mvrad/error.hpp"
#include "mvrad/log.hpp"
#include "mvrad/rng.hpp"

namespace mvrad {

std::string_view modality_name(Modality m) {
  return m == Modality::T1Gd ? "T1Gd" : "FLAIR";
}

bool Cohort::has_missing() const {
  return missing[0].any() || missing[1].any();
}

Cohort Cohort::subset(const RowIndex& rows) const {
  Cohort out;
  out.feature_names = feature_names;
  out.subject_ids.reserve(rows.size());
  out.y.reserve(rows.size());
  for (std::size_t v = 0; v < 2; ++v) {
    out.views[v].resize(static_cast<Eigen::Index>(rows.size()), views[v].cols());
    out.missing[v].resize(static_cast<Eigen::Index>(rows.size()), missing[v].cols());
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    out.subject_ids.push_back(subject_ids.at(rows[i]));
    out.y.push_back(y.at(rows[i]));
    for (std::size_t v = 0; v < 2; ++v) {
      out.views[v].row(static_cast<Eigen::Index>(i)) = views[v].row(r);
      out.missing[v].row(static_cast<Eigen::Index>(i)) = missing[v].row(r);
    }
  }
  return out;
}

// ---- CSV ---------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Splits RFC-4180-style text into rows of cells. Quoted cells may contain
// commas, doubled quotes and newlines. Blank lines are skipped.
std::vector<std::vector<std::string>> split_csv(std::string_view text) {
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
    text.remove_prefix(3);
  }
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool in_quotes = false;
  bool row_has_content = false;
  auto end_row = [&] {
    row.push_back(cell);
    cell.clear();
    if (row_has_content || row.size() > 1) rows.push_back(std::move(row));
    row.clear();
    row_has_content = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cell.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        row.push_back(cell);
        cell.clear();
        break;
      case '\n':
        end_row();
        break;
      case '\r':
        break;
      default:
        cell.push_back(c);
        if (c != ' ' && c != '\t') row_has_content = true;
    }
  }
  if (!cell.empty() || !row.empty() || row_has_content) end_row();
  return rows;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileUnreadable, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::FileUnreadable, "read failed for " + path.string());
  return buf.str();
}

// Parses a finite decimal number occupying the whole cell.
std::optional<double> parse_number(std::string_view cell) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return std::nullopt;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace

bool is_missing_marker(std::string_view cell) {
  cell = trim(cell);
  if (cell.empty()) return true;
  const std::string l = lower(cell);
  return l == "na" || l == "nan" || l == "null";
}

FeatureTable parse_feature_table(std::string_view csv_text, Modality modality, std::string_view source) {
  const auto rows = split_csv(csv_text);
  const std::string src(source);
  if (rows.empty()) throw Error(ErrorKind::MalformedCsv, src + ": empty file");
  const auto& header = rows.front();
  if (trim(header.front()) != "subject_id") {
    throw Error(ErrorKind::MalformedCsv, src + ": first header column must be subject_id");
  }
  if (header.size() < 2) throw Error(ErrorKind::NoFeatureColumns, src + ": no feature columns");

  const std::size_t n_cols = header.size() - 1;
  const std::size_t n_rows = rows.size() - 1;
  std::vector<std::string> names;
  std::unordered_set<std::string> seen_names;
  for (std::size_t c = 1; c < header.size(); ++c) {
    std::string name(trim(header[c]));
    if (!seen_names.insert(name).second) {
      throw Error(ErrorKind::MalformedCsv, src + ": duplicate feature column '" + name + "'");
    }
    names.push_back(std::move(name));
  }

  Matrix values = Matrix::Zero(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_cols));
  MissingMask missing = MissingMask::Constant(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(n_cols), false);
  std::vector<std::string> ids;
  std::unordered_set<std::string> seen_ids;
  std::vector<std::size_t> suspicious(n_cols, 0);

  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto& row = rows[r + 1];
    if (row.size() != header.size()) {
      throw Error(ErrorKind::MalformedCsv, src + ": row " + std::to_string(r + 2) + " has " +
                                               std::to_string(row.size()) + " cells, expected " +
                                               std::to_string(header.size()));
    }
    std::string id(trim(row.front()));
    if (id.empty()) throw Error(ErrorKind::MalformedCsv, src + ": empty subject_id on row " + std::to_string(r + 2));
    if (!seen_ids.insert(id).second) throw Error(ErrorKind::DuplicateSubjectId, src + ": " + id);
    ids.push_back(std::move(id));
    for (std::size_t c = 0; c < n_cols; ++c) {
      const std::string_view cell = trim(row[c + 1]);
      const auto ri = static_cast<Eigen::Index>(r);
      const auto ci = static_cast<Eigen::Index>(c);
      if (is_missing_marker(cell)) {
        missing(ri, ci) = true;
        continue;
      }
      if (auto v = parse_number(cell)) {
        values(ri, ci) = *v;
      } else {
        missing(ri, ci) = true;
        ++suspicious[c];
      }
    }
  }

  for (std::size_t c = 0; c < n_cols; ++c) {
    if (suspicious[c] > 0) {
      log_warn("load", {{"source", src}, {"column", names[c]},
                        {"non_numeric_cells", std::to_string(suspicious[c])}});
    }
  }

  std::vector<Eigen::Index> keep;
  for (std::size_t c = 0; c < n_cols; ++c) {
    const auto ci = static_cast<Eigen::Index>(c);
    if (n_rows > 0 && missing.col(ci).all()) {
      log_warn("load", {{"source", src}, {"dropped_empty_column", names[c]}});
    } else {
      keep.push_back(ci);
    }
  }
  if (keep.empty()) throw Error(ErrorKind::NoFeatureColumns, src + ": every feature column is empty");

  FeatureTable table;
  table.modality = modality;
  table.subject_ids = std::move(ids);
  table.values.resize(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(keep.size()));
  table.missing.resize(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto ki = static_cast<Eigen::Index>(k);
    table.values.col(ki) = values.col(keep[k]);
    table.missing.col(ki) = missing.col(keep[k]);
    table.feature_names.push_back(names[static_cast<std::size_t>(keep[k])]);
  }
  // Missing slots are unspecified; zero them so copies are deterministic.
  for (Eigen::Index r = 0; r < table.values.rows(); ++r)
    for (Eigen::Index c = 0; c < table.values.cols(); ++c)
      if (table.missing(r, c)) table.values(r, c) = 0.0;
  return table;
}

FeatureTable load_feature_table(const std::filesystem::path& path, Modality modality) {
  return parse_feature_table(read_file(path), modality, path.string());
}

ClinicalTable parse_clinical_table(std::string_view csv_text, std::string_view source) {
  const auto rows = split_csv(csv_text);
  const std::string src(source);
  if (rows.empty()) throw Error(ErrorKind::MalformedCsv, src + ": empty file");
  const auto& header = rows.front();
  if (header.size() < 2 || trim(header[0]) != "subject_id" || lower(trim(header[1])) != "mgmt") {
    throw Error(ErrorKind::MalformedCsv, src + ": header must be subject_id,mgmt");
  }
  ClinicalTable table;
  std::unordered_set<std::string> seen;
  std::size_t unrecognised = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw Error(ErrorKind::MalformedCsv, src + ": row " + std::to_string(r + 1) + " has wrong cell count");
    }
    std::string id(trim(row[0]));
    if (id.empty()) throw Error(ErrorKind::MalformedCsv, src + ": empty subject_id on row " + std::to_string(r + 1));
    if (!seen.insert(id).second) throw Error(ErrorKind::DuplicateSubjectId, src + ": " + id);
    const std::string status = lower(trim(row[1]));
    MgmtLabel label = MgmtLabel::Unknown;
    if (status == "methylated") {
      label = MgmtLabel::Methylated;
    } else if (status == "unmethylated") {
      label = MgmtLabel::Unmethylated;
    } else if (status != "unknown" && !is_missing_marker(status)) {
      ++unrecognised;
    }
    table.subject_ids.push_back(std::move(id));
    table.mgmt.push_back(label);
  }
  if (unrecognised > 0) {
    log_warn("load", {{"source", src}, {"unrecognised_mgmt_values_as_unknown", std::to_string(unrecognised)}});
  }
  return table;
}

ClinicalTable load_clinical_table(const std::filesystem::path& path) {
  return parse_clinical_table(read_file(path), path.string());
}

void write_feature_table(const std::filesystem::path& path, const Cohort& cohort, Modality modality) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  const std::size_t v = view_index(modality);
  out << "subject_id";
  for (const auto& name : cohort.feature_names[v]) out << ',' << name;
  out << '\n';
  char buf[40];
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    out << cohort.subject_ids[i];
    for (Eigen::Index c = 0; c < cohort.views[v].cols(); ++c) {
      const auto r = static_cast<Eigen::Index>(i);
      if (cohort.missing[v].size() > 0 && cohort.missing[v](r, c)) {
        out << ",NA";
      } else {
        std::snprintf(buf, sizeof buf, "%.17g", cohort.views[v](r, c));
        out << ',' << buf;
      }
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

void write_clinical_table(const std::filesystem::path& path, const Cohort& cohort) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << "subject_id,mgmt\n";
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    out << cohort.subject_ids[i] << ',' << (cohort.y[i] ? "methylated" : "unmethylated") << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

// ---- alignment and preprocessing ----------------------------------------------

Cohort align_cohort(const FeatureTable& t1gd, const FeatureTable& flair, const ClinicalTable& clinical) {
  std::map<std::string, std::size_t> t1_rows, fl_rows;
  for (std::size_t i = 0; i < t1gd.subject_ids.size(); ++i) t1_rows.emplace(t1gd.subject_ids[i], i);
  for (std::size_t i = 0; i < flair.subject_ids.size(); ++i) fl_rows.emplace(flair.subject_ids[i], i);

  // std::map keeps the ids sorted lexicographically.
  std::map<std::string, std::uint8_t> labelled;
  for (std::size_t i = 0; i < clinical.subject_ids.size(); ++i) {
    if (clinical.mgmt[i] == MgmtLabel::Unknown) continue;
    labelled.emplace(clinical.subject_ids[i], clinical.mgmt[i] == MgmtLabel::Methylated ? 1 : 0);
  }

  std::vector<std::string> ids;
  for (const auto& [id, label] : labelled) {
    if (t1_rows.count(id) && fl_rows.count(id)) ids.push_back(id);
  }
  if (ids.empty()) {
    throw Error(ErrorKind::EmptyCohort, "no subject has both modalities and a definitive MGMT label");
  }

  Cohort cohort;
  cohort.subject_ids = ids;
  cohort.feature_names = {t1gd.feature_names, flair.feature_names};
  const std::array<const FeatureTable*, 2> tables{&t1gd, &flair};
  const std::array<const std::map<std::string, std::size_t>*, 2> index{&t1_rows, &fl_rows};
  for (std::size_t v = 0; v < 2; ++v) {
    const auto cols = tables[v]->values.cols();
    cohort.views[v].resize(static_cast<Eigen::Index>(ids.size()), cols);
    cohort.missing[v].resize(static_cast<Eigen::Index>(ids.size()), cols);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto src = static_cast<Eigen::Index>(index[v]->at(ids[i]));
      cohort.views[v].row(static_cast<Eigen::Index>(i)) = tables[v]->values.row(src);
      cohort.missing[v].row(static_cast<Eigen::Index>(i)) = tables[v]->missing.row(src);
    }
  }
  for (const auto& id : ids) cohort.y.push_back(labelled.at(id));
  return cohort;
}

double median_of(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::InvalidArgument, "median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

Cohort impute_median(const Cohort& cohort, const RowIndex& train_rows) {
  Cohort out = cohort;
  for (std::size_t v = 0; v < 2; ++v) {
    auto& x = out.views[v];
    auto& mask = out.missing[v];
    if (mask.size() == 0) {
      mask = MissingMask::Constant(x.rows(), x.cols(), false);
      continue;
    }
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      std::vector<double> observed;
      observed.reserve(train_rows.size());
      for (std::size_t r : train_rows) {
        const auto ri = static_cast<Eigen::Index>(r);
        if (!mask(ri, c)) observed.push_back(x(ri, c));
      }
      if (observed.empty()) {
        throw Error(ErrorKind::AllMissingInTrain,
                    std::string(modality_name(kModalities[v])) + " feature '" +
                        cohort.feature_names[v][static_cast<std::size_t>(c)] + "' has no observed training value");
      }
      if (!mask.col(c).any()) continue;
      const double fill = median_of(std::move(observed));
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        if (mask(r, c)) {
          x(r, c) = fill;
          mask(r, c) = false;
        }
      }
    }
  }
  return out;
}

NormStats zscore_fit(const Cohort& cohort, const RowIndex& train_rows) {
  if (train_rows.empty()) throw Error(ErrorKind::EmptyTrainingSet, "z-score fit needs at least one training row");
  if (cohort.has_missing()) throw Error(ErrorKind::InvalidArgument, "z-score fit before imputation");
  NormStats stats;
  stats.fitted_rows = train_rows;
  const double n = static_cast<double>(train_rows.size());
  for (std::size_t v = 0; v < 2; ++v) {
    const auto& x = cohort.views[v];
    Vector mean = Vector::Zero(x.cols());
    for (std::size_t r : train_rows) mean += x.row(static_cast<Eigen::Index>(r)).transpose();
    mean /= n;
    Vector var = Vector::Zero(x.cols());
    for (std::size_t r : train_rows) {
      const Vector diff = x.row(static_cast<Eigen::Index>(r)).transpose() - mean;
      var += diff.cwiseProduct(diff);
    }
    var /= n;
    stats.mean[v] = mean;
    stats.stddev[v] = var.cwiseSqrt();
  }
  return stats;
}

Cohort zscore_apply(const Cohort& cohort, const NormStats& stats) {
  if (cohort.has_missing()) throw Error(ErrorKind::InvalidArgument, "z-score apply before imputation");
  Cohort out = cohort;
  for (std::size_t v = 0; v < 2; ++v) {
    auto& x = out.views[v];
    if (stats.mean[v].size() != x.cols() || stats.stddev[v].size() != x.cols()) {
      throw Error(ErrorKind::ShapeMismatch, "normalisation stats do not match view width");
    }
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double sd = stats.stddev[v](c);
      if (sd < kConstantColumnStd) {
        x.col(c).setZero();
      } else {
        x.col(c) = (x.col(c).array() - stats.mean[v](c)) / sd;
      }
    }
  }
  return out;
}

Matrix concat_views(const Cohort& cohort) {
  Matrix out(static_cast<Eigen::Index>(cohort.size()), cohort.views[0].cols() + cohort.views[1].cols());
  out << cohort.views[0], cohort.views[1];
  return out;
}

Matrix select_rows(const Matrix& m, const RowIndex& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= static_cast<std::size_t>(m.rows())) throw Error(ErrorKind::ShapeMismatch, "row index out of range");
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Labels select_labels(const Labels& y, const RowIndex& rows) {
  Labels out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(y.at(r));
  return out;
}

// ---- splitting -------------------------------------------------------------------

namespace {

std::array<RowIndex, 2> indices_by_class(const Labels& y) {
  std::array<RowIndex, 2> by_class;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] > 1) throw Error(ErrorKind::InvalidArgument, "labels must be 0 or 1");
    by_class[y[i]].push_back(i);
  }
  return by_class;
}

Error insufficient_class(int cls, std::size_t count, std::size_t needed) {
  return Error(ErrorKind::InsufficientClass, "class " + std::to_string(cls) + " has " + std::to_string(count) +
                                                 " members, need " + std::to_string(needed));
}

}  // namespace

std::vector<RowIndex> stratified_split(const Labels& y, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "fold count must be positive");
  auto by_class = indices_by_class(y);
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < k) throw insufficient_class(c, by_class[c].size(), k);
  }
  Rng rng(seed);
  std::vector<RowIndex> folds(k);
  std::size_t offset = 0;
  for (auto& members : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t p = 0; p < members.size(); ++p) folds[(offset + p) % k].push_back(members[p]);
    offset = (offset + members.size()) % k;
  }
  for (auto& fold : folds) std::sort(fold.begin(), fold.end());
  return folds;
}

HoldoutSplit holdout_split(const Labels& y, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "test fraction must lie in (0, 1)");
  }
  auto by_class = indices_by_class(y);
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].empty()) throw insufficient_class(c, 0, 1);
  }
  const std::size_t n = y.size();
  const auto n_test = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n))), 1, n - 1);

  // Largest-remainder apportionment of the test rows across classes.
  std::array<std::size_t, 2> take{};
  std::array<double, 2> remainder{};
  std::size_t assigned = 0;
  for (int c = 0; c < 2; ++c) {
    const double quota = static_cast<double>(n_test) * static_cast<double>(by_class[c].size()) / static_cast<double>(n);
    take[c] = static_cast<std::size_t>(std::floor(quota));
    remainder[c] = quota - std::floor(quota);
    assigned += take[c];
  }
  while (assigned < n_test) {
    const int c = remainder[1] > remainder[0] ? 1 : 0;
    ++take[c];
    remainder[c] = -1.0;
    ++assigned;
  }

  Rng rng(seed);
  HoldoutSplit split;
  for (int c = 0; c < 2; ++c) {
    auto members = by_class[c];
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t p = 0; p < members.size(); ++p) {
      (p < take[c] ? split.test : split.train).push_back(members[p]);
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

// ---- synthetic cohorts -----------------------------------------------------------

SynthConfig shared_signal_regime(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n = 600;
  cfg.d = 144;
  cfg.latent_dim = 4;
  cfg.signal_strength = 2.0;
  cfg.noise_sigma = 0.7;
  cfg.private_dim = 2;
  cfg.private_scale = 3.0;
  cfg.distractor_fraction = 0.5;
  cfg.seed = seed;
  return cfg;
}

std::vector<double> SyntheticCohort::oracle_scores() const {
  const Vector s = latent * label_weights;
  return {s.data(), s.data() + s.size()};
}

SyntheticCohort synth_cohort(const SynthConfig& config) {
  if (config.n == 0 || config.d == 0 || config.latent_dim == 0) {
    throw Error(ErrorKind::InvalidArgument, "synthetic cohort sizes must be positive");
  }
  if (config.noise_sigma < 0.0 || config.private_scale < 0.0 || config.distractor_fraction < 0.0 ||
      config.distractor_fraction > 1.0) {
    throw Error(ErrorKind::InvalidArgument, "invalid synthetic noise parameters");
  }
  const auto n = static_cast<Eigen::Index>(config.n);
  const auto d = static_cast<Eigen::Index>(config.d);
  const auto latent = static_cast<Eigen::Index>(config.latent_dim);
  const auto priv = static_cast<Eigen::Index>(config.private_dim);

  Rng structure(derive_seed(config.seed, 1));
  std::array<Matrix, 2> shared_loadings, private_loadings;
  for (std::size_t v = 0; v < 2; ++v) {
    shared_loadings[v].resize(d, latent);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < latent; ++j)
        shared_loadings[v](i, j) = structure.normal() / std::sqrt(static_cast<double>(latent));
    private_loadings[v].resize(d, priv);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < priv; ++j)
        private_loadings[v](i, j) = structure.normal() / std::sqrt(static_cast<double>(std::max<Eigen::Index>(priv, 1)));
    const auto n_distract = static_cast<std::size_t>(std::floor(config.distractor_fraction * static_cast<double>(d)));
    const auto order = structure.permutation(config.d);
    for (std::size_t k = 0; k < n_distract; ++k) shared_loadings[v].row(static_cast<Eigen::Index>(order[k])).setZero();
  }
  Vector w(latent);
  for (Eigen::Index j = 0; j < latent; ++j) w(j) = structure.normal();
  w *= std::sqrt(static_cast<double>(latent)) / w.norm();

  Rng draws(derive_seed(config.seed, 2));
  SyntheticCohort out;
  out.latent.resize(n, latent);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < latent; ++j) out.latent(i, j) = draws.normal();

  Cohort& cohort = out.cohort;
  for (std::size_t v = 0; v < 2; ++v) {
    Matrix nuisance(n, priv);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < priv; ++j) nuisance(i, j) = draws.normal();
    Matrix noise(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < d; ++j) noise(i, j) = draws.normal();
    cohort.views[v] = out.latent * shared_loadings[v].transpose() + noise * config.noise_sigma;
    if (priv > 0) cohort.views[v] += config.private_scale * (nuisance * private_loadings[v].transpose());
    cohort.missing[v] = MissingMask::Constant(n, d, false);
    const std::string prefix = kModalities[v] == Modality::T1Gd ? "t1gd_f" : "flair_f";
    char name[32];
    for (Eigen::Index j = 0; j < d; ++j) {
      std::snprintf(name, sizeof name, "%s%03ld", prefix.c_str(), static_cast<long>(j));
      cohort.feature_names[v].emplace_back(name);
    }
  }
  char id[32];
  for (Eigen::Index i = 0; i < n; ++i) {
    std::snprintf(id, sizeof id, "SYN-%05ld", static_cast<long>(i + 1));
    cohort.subject_ids.emplace_back(id);
  }

  const Vector score = out.latent * w;
  constexpr int kMaxLabelAttempts = 100;
  for (int attempt = 0; attempt < kMaxLabelAttempts; ++attempt) {
    Rng label_rng(derive_seed(config.seed, 100 + static_cast<std::uint64_t>(attempt)));
    Labels y(config.n);
    std::array<std::size_t, 2> counts{};
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-config.signal_strength * score(i)));
      y[static_cast<std::size_t>(i)] = label_rng.uniform() < p ? 1 : 0;
      ++counts[y[static_cast<std::size_t>(i)]];
    }
    if (counts[0] > 0 && counts[1] > 0) {
      cohort.y = std::move(y);
      out.label_weights = w;
      out.signal_strength = config.signal_strength;
      return out;
    }
  }
  throw Error(ErrorKind::DegenerateLabels, "a class never appeared after " + std::to_string(kMaxLabelAttempts) +
                                               " label draws");
}

}  // namespace mvrad
