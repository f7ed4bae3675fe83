#include "mvrad/artifacts.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "mvrad/error.hpp"

namespace mvrad {

using nlohmann::json;

namespace {

std::string number17(double v) {
  if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
  if (std::isnan(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  // Keep integral doubles recognisable as floats when read back.
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

bool is_flat(const json& j) {
  for (const auto& e : j) {
    if (e.is_structured()) return false;
  }
  return true;
}

void write(std::string& out, const json& j, int depth) {
  const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(depth + 1) * 2, ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      std::size_t i = 0;
      for (auto it = j.begin(); it != j.end(); ++it, ++i) {
        out += inner + json(it.key()).dump() + ": ";
        write(out, it.value(), depth + 1);
        out += i + 1 < j.size() ? ",\n" : "\n";
      }
      out += pad + "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      if (is_flat(j)) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          write(out, j[i], depth + 1);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        out += inner;
        write(out, j[i], depth + 1);
        out += i + 1 < j.size() ? ",\n" : "\n";
      }
      out += pad + "]";
      return;
    }
    case json::value_t::number_float:
      out += number17(j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

double read_number(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw Error(ErrorKind::MalformedCsv, "metrics: unexpected string number " + s);
  }
  return j.get<double>();
}

json roc_json(const RocResult& roc) {
  json points = json::array();
  for (const auto& p : roc.points) {
    json threshold = std::isinf(p.threshold) ? json(p.threshold > 0 ? "inf" : "-inf") : json(p.threshold);
    points.push_back(json::array({threshold, p.fpr, p.tpr}));
  }
  return json{{"auc", roc.auc}, {"points", points}};
}

RocResult roc_from_json(const json& j) {
  RocResult roc;
  roc.auc = j.at("auc").get<double>();
  for (const auto& p : j.at("points")) roc.points.push_back({p.at(1).get<double>(), p.at(2).get<double>(), read_number(p.at(0))});
  return roc;
}

}  // namespace

std::string dump_json(const json& value) {
  std::string out;
  write(out, value, 0);
  out += '\n';
  return out;
}

json report_to_json(const Report& report) {
  json models = json::array();
  for (const auto& m : report.models) {
    models.push_back(json{{"name", m.name},
                          {"test_auc", m.auc},
                          {"cv_mean_auc", m.cv_mean_auc ? json(*m.cv_mean_auc) : json(nullptr)},
                          {"feature_dim", m.feature_dim},
                          {"hyperparameters", m.hyperparameters},
                          {"roc", roc_json(m.roc)}});
  }
  json projections = json::array();
  for (const auto& p : report.projections) {
    json points = json::array();
    for (std::size_t i = 0; i < p.subject_ids.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      points.push_back(json{{"subject_id", p.subject_ids[i]},
                            {"x", p.coords(r, 0)},
                            {"y", p.coords(r, 1)},
                            {"probability", p.probability[i]},
                            {"label", p.labels[i]}});
    }
    projections.push_back(json{{"model", p.model},
                               {"method", p.method},
                               {"variance", json::array({p.variance[0], p.variance[1]})},
                               {"points", points}});
  }
  return json{{"models", models},
              {"seeds", report.seeds},
              {"split", report.split},
              {"config", report.config},
              {"versions", report.versions},
              {"oracle", report.oracle_auc ? json{{"bayes_test_auc", *report.oracle_auc}} : json(nullptr)},
              {"projections", projections},
              {"timing", report.timing}};
}

Report report_from_json(const json& doc) {
  try {
    Report report;
    for (const auto& m : doc.at("models")) {
      ModelResult r;
      r.name = m.at("name").get<std::string>();
      r.auc = m.at("test_auc").get<double>();
      if (!m.at("cv_mean_auc").is_null()) r.cv_mean_auc = m.at("cv_mean_auc").get<double>();
      r.feature_dim = m.at("feature_dim").get<std::size_t>();
      r.hyperparameters = m.at("hyperparameters");
      r.roc = roc_from_json(m.at("roc"));
      report.models.push_back(std::move(r));
    }
    report.seeds = doc.at("seeds");
    report.split = doc.at("split");
    report.config = doc.at("config");
    report.versions = doc.at("versions");
    report.timing = doc.value("timing", json::object());
    if (doc.contains("oracle") && !doc.at("oracle").is_null()) {
      report.oracle_auc = doc.at("oracle").at("bayes_test_auc").get<double>();
    }
    if (doc.contains("projections")) {
      for (const auto& p : doc.at("projections")) {
        LatentProjection lp;
        lp.model = p.at("model").get<std::string>();
        lp.method = p.at("method").get<std::string>();
        lp.variance = {p.at("variance").at(0).get<double>(), p.at("variance").at(1).get<double>()};
        const auto& points = p.at("points");
        lp.coords.resize(static_cast<Eigen::Index>(points.size()), 2);
        Eigen::Index r = 0;
        for (const auto& pt : points) {
          lp.subject_ids.push_back(pt.at("subject_id").get<std::string>());
          lp.coords(r, 0) = pt.at("x").get<double>();
          lp.coords(r, 1) = pt.at("y").get<double>();
          lp.probability.push_back(pt.at("probability").get<double>());
          lp.labels.push_back(pt.at("label").get<std::uint8_t>());
          ++r;
        }
        report.projections.push_back(std::move(lp));
      }
    }
    return report;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedCsv, std::string("metrics document: ") + e.what());
  }
}

std::string render_metrics_json(const Report& report) { return dump_json(report_to_json(report)); }

Report parse_metrics_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedCsv, std::string("metrics document: ") + e.what());
  }
  return report_from_json(doc);
}

Report load_metrics_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileUnreadable, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_metrics_json(buf.str());
}

std::string render_roc_csv(const RocResult& roc) {
  std::ostringstream out;
  out << "threshold,fpr,tpr\n";
  char buf[96];
  for (const auto& p : roc.points) {
    if (std::isinf(p.threshold)) {
      std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g", p.threshold > 0 ? "inf" : "-inf", p.fpr, p.tpr);
    } else {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", p.threshold, p.fpr, p.tpr);
    }
    out << buf << '\n';
  }
  return out.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

std::vector<std::filesystem::path> emit_artifacts(const Report& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& content) {
    const auto path = out_dir / name;
    write_text_file(path, content);
    written.push_back(path);
  };
  emit("metrics.json", render_metrics_json(report));
  for (const auto& m : report.models) emit("roc_" + m.name + ".csv", render_roc_csv(m.roc));
  for (const auto& p : report.projections) {
    std::optional<double> model_auc;
    for (const auto& m : report.models) {
      if (m.name == p.model) model_auc = m.auc;
    }
    emit("latent_scatter_" + p.model + ".svg", render_latent_scatter_svg(p, model_auc));
  }
  emit("auc_bar.svg", render_auc_bar_svg(report));
  return written;
}

}  // namespace mvrad
