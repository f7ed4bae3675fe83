#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mvrad/experiment.hpp"

namespace mvrad {

/// Pretty JSON with every floating-point number written as %.17g, which
/// round-trips doubles exactly.
std::string dump_json(const nlohmann::json& value);

nlohmann::json report_to_json(const Report& report);
Report report_from_json(const nlohmann::json& doc);

std::string render_metrics_json(const Report& report);
Report parse_metrics_json(std::string_view text);
Report load_metrics_json(const std::filesystem::path& path);

/// `threshold,fpr,tpr` with one row per ROC point.
std::string render_roc_csv(const RocResult& roc);

/// Bar chart of test AUC per model with a chance line.
std::string render_auc_bar_svg(const Report& report);

/// Scatter of the projected embeddings coloured by predicted probability
/// (purple low, yellow high) with smoothed 0.3/0.5/0.7 probability contours.
std::string render_latent_scatter_svg(const LatentProjection& projection, std::optional<double> test_auc);

/// Writes metrics.json, roc_<model>.csv per model, latent_scatter_<model>.svg
/// per projection and auc_bar.svg. Returns the written paths in that order.
std::vector<std::filesystem::path> emit_artifacts(const Report& report, const std::filesystem::path& out_dir);

void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace mvrad
