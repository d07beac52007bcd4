#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"

#include "notesplit/linalg.hpp"

namespace notesplit {

inline constexpr int kContainerVersion = 1;

/// Model file: magic "NSPLTMDL", u32 version, u64 header length, a JSON
/// header, then each matrix listed in header["matrices"] as little-endian
/// float64 in row-major order.
struct ModelContainer {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Matrix> matrices;

  const Matrix& matrix(const std::string& name) const;
};

void save_container(const ModelContainer& container, const std::filesystem::path& path);

/// Throws IoError on a bad magic, unsupported version or truncation.
ModelContainer load_container(const std::filesystem::path& path);

}  // namespace notesplit
