#pragma once

#include "hierts/sim.hpp"

#include <string>
#include <vector>

namespace hierts {

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

struct ExperimentConfig;  // defined in config.hpp

/// Serializes curves as `round,agent,mean_cum_regret,stderr` rows in
/// round-major order (round 1 for every agent, then round 2, ...), UTF-8 with
/// LF line endings. Returns the CSV text.
std::string curves_to_csv(const std::vector<AggregateCurve>& curves);

/// Parses CSV produced by curves_to_csv (used by tests and downstream checks).
std::vector<AggregateCurve> curves_from_csv(const std::string& text);

/// Static SVG line chart of the mean curves with shaded stderr bands.
std::string curves_to_svg(const std::vector<AggregateCurve>& curves);

/// FNV-1a 64-bit hash of the raw config text, printed in the manifest.
std::uint64_t config_hash(const std::string& raw_text);

inline constexpr const char* kCodeVersion = "hierts 1.0.0";

/// Writes <prefix>.csv, <prefix>_manifest.txt, and optionally <prefix>.svg.
/// Returns the list of written paths.
std::vector<std::string> emit_results(const std::vector<AggregateCurve>& curves,
                                      const ExperimentConfig& config,
                                      const std::string& path_prefix);

}  // namespace hierts
