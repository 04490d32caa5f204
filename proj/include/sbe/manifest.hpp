#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sbe/config.hpp"
#include "sbe/io.hpp"
#include "sbe/version.hpp"

namespace sbe {

/* Run manifest.
 *
 * Every resolved parameter is written as a `key = value` assignment, so the
 * manifest itself is a valid config file: feeding it back through --config
 * reproduces the run exactly.  Anything that varies between identical runs
 * (wall clock, tool version, output checksums) lives in `#` comments, which
 * the parser ignores.
 */

struct ManifestExtra {
  double wall_clock_seconds = 0;
  // (relative path, FNV-1a checksum) per output file.
  std::vector<std::pair<std::string, std::string>> checksums;
};

inline void write_manifest(const std::filesystem::path& path, const Config& resolved,
                           const ManifestExtra& extra) {
  std::string out;
  out += "# sbe " + std::string(version) + "\n";
  out += "# wall_clock_seconds = " + format_g17(extra.wall_clock_seconds) + "\n";
  for (const auto& [file, sum] : extra.checksums)
    out += "# checksum " + file + " = " + sum + "\n";
  for (const ConfigEntry& e : resolved.entries()) out += e.key + " = " + e.value + "\n";
  write_file(path, out);
}

inline std::string checksum_file(const std::filesystem::path& path) {
  return to_hex(fnv1a64(read_file(path)));
}

}  // namespace sbe
