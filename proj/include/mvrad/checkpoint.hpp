#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "mvrad/mvvae.hpp"

namespace mvrad {

/// Model checkpoint: versioned header, the full VaeConfig, every parameter
/// tensor by name, and optional named side arrays (e.g. normalisation
/// statistics). Values are written as C99 hex floats so the file is exact
/// and byte-stable for identical models.
struct Checkpoint {
  MvVaeModel model;
  std::map<std::string, Matrix> extras;
};

inline constexpr std::string_view kCheckpointMagic = "MVVAE-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mvrad
