#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "randmon/config.hpp"
#include "randmon/scenario.hpp"

namespace randmon {

/// Version of the CSV column contract and of the JSONL records.
inline constexpr int kOutputSchemaVersion = 1;

/// CSV: `#` header lines (schema_version, config_hash, seed), a column row,
/// then one row per step. Floats use 17 significant digits; alarm flags are
/// 0/1; an empty field means the test gave no verdict at that step.
void write_csv(const RunArtifacts& art, std::ostream& out);

/// JSONL: one {"record":"step"} object per step, then one {"record":"summary"}.
void write_jsonl(const RunArtifacts& art, std::ostream& out);

/// Summary document alone (the last JSONL record), pretty printed.
[[nodiscard]] std::string summary_json(const RunArtifacts& art, int indent = 2);

/// Writes the artifacts to `path` in the chosen format. Throws IoError.
void emit_outputs(const RunArtifacts& art, OutputFormat format, const std::filesystem::path& path);

/// Contents of a CSV written by write_csv, enough to recompute the summary.
struct IngestedRun {
    int schema_version = 0;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::size_t rows = 0;
    std::vector<std::vector<SensorStep>> monitors;
};

/// Throws IoError for unreadable or malformed input.
[[nodiscard]] IngestedRun read_csv(std::istream& in);
[[nodiscard]] IngestedRun read_csv(const std::filesystem::path& path);

}  // namespace randmon
