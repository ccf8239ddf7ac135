#pragma once

#include <cstdlib>
#include <filesystem>

namespace oef {

// Scratch directory: OEF_TMPDIR when set, else the system temp directory.
inline std::filesystem::path scratch_dir() {
  if (const char* env = std::getenv("OEF_TMPDIR"); env && *env) return env;
  return std::filesystem::temp_directory_path();
}

}  // namespace oef
