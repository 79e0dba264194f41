#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpfair/core.hpp"
#include "dpfair/mechanisms.hpp"

namespace dpfair {

/// Parses `entity,count[,weight]` CSV text. Row order is preserved and the
/// total is the sum of counts. Errors name the line (FormatError) or the
/// entity (ValidationError).
TrueDataset parse_dataset_csv(const std::string& text);

/// Reads and parses a dataset file. With `require_total`, the counts must
/// sum to it within 1e-9 relative.
TrueDataset load_dataset(const std::filesystem::path& path,
                         std::optional<double> require_total = std::nullopt);

enum class Command { Release, Alloc, Bounds };
enum class AllocChoice { Baseline, ProjectionOntoSimplex, Both };

inline constexpr std::uint64_t kDefaultSeed = 20220723;

struct RunConfig {
  Command command = Command::Release;
  std::filesystem::path input_path;
  NoiseKind kind = NoiseKind::Laplace;
  std::optional<double> scale;
  std::optional<double> epsilon;
  double delta = 0.0;
  double sensitivity = 1.0;
  std::uint64_t trials = 100000;
  std::uint64_t master_seed = kDefaultSeed;
  std::optional<double> total;
  std::optional<double> budget;
  std::filesystem::path output_path;
  std::optional<std::filesystem::path> plot_data_path;
  AllocChoice alloc_mechanism = AllocChoice::Both;
  /// Worker threads; 0 = hardware concurrency. Never affects results.
  unsigned threads = 0;
};

/// Validates the config and builds its noise specification. Throws
/// ArgumentError when neither or both of scale/epsilon are given, or when
/// trials < 100.
NoiseSpec noise_spec_from(const RunConfig& config);

/// Parses command-line arguments. Returns nullopt after printing help or
/// version; throws ArgumentError on bad input.
std::optional<RunConfig> parse_command_line(int argc, const char* const* argv);

/// Everything a run writes: the JSON report and zero or more plot files.
struct RunOutputs {
  std::string report_json;
  std::vector<std::pair<std::filesystem::path, std::string>> plot_files;
};

/// Computes a run without touching the output paths.
RunOutputs execute(const RunConfig& config);

/// Executes and writes outputs. Returns the process exit status; errors go
/// to `err` as one diagnostic line.
int run(const RunConfig& config, std::ostream& err);

/// Locale-independent formatting with 17 significant digits.
std::string format_double(double value);

}  // namespace dpfair
