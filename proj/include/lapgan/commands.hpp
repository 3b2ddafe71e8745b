#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "lapgan/cascade.hpp"
#include "lapgan/run_config.hpp"
#include "lapgan/synthetic.hpp"

namespace lapgan {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitDiverged = 3;

/// Cascade manifest: K, sizes, per-level checkpoint files (relative to the
/// manifest) and conditioning flags, plus the config that produced them.
struct Manifest {
  SizeSchedule schedule;
  std::size_t channels = 1;
  std::size_t classes = 0;
  std::vector<std::filesystem::path> checkpoints;  // index k; empty path if not trained
  std::vector<bool> trained;
  nlohmann::json config;
};

void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);
/// Throws InvalidArgument when a checkpoint is missing or malformed.
CascadeModel load_cascade(const std::filesystem::path& manifest_path);

/// Trains every configured level, writing level_<k>.lpg checkpoints,
/// manifest.json, config.json and telemetry.jsonl into config.output_dir.
/// Input is validated before anything is written. With `resume`, existing
/// checkpoints are continued rather than restarted.
int cmd_train(const RunConfig& config, std::ostream& log, bool resume = false);

struct SampleOptions {
  std::size_t count = 1;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> start;  // PNM at the coarsest size
  std::optional<int> label;
  bool trace = false;
  std::filesystem::path output_dir;
};

int cmd_sample(const std::filesystem::path& manifest, const SampleOptions& options, std::ostream& log);

struct EvalOptions {
  std::size_t n_model_samples = 10000;
  std::vector<double> sigma_grid;  // empty: default grid
  std::uint64_t seed = 0;
  std::optional<std::size_t> max_test;
  std::optional<std::size_t> max_validation;
  std::optional<std::filesystem::path> report;
};

/// Report of both estimators on the manifest's validation/test splits.
nlohmann::json eval_ll_report(const CascadeModel& cascade, const Dataset& validation, const Dataset& test,
                              const EvalOptions& options);
int cmd_eval_ll(const std::filesystem::path& manifest, const EvalOptions& options, std::ostream& log);

int cmd_pyramid_build(const std::filesystem::path& image, const std::filesystem::path& output,
                      std::size_t max_coarsest, std::ostream& log);
int cmd_pyramid_reconstruct(const std::filesystem::path& pyramid, const std::filesystem::path& output,
                            std::ostream& log);
int cmd_pyramid_check(const std::filesystem::path& image, std::size_t max_coarsest, std::ostream& log);

/// Writes the synthetic dataset as binary records (label byte + pixel bytes).
int cmd_data_synth(const SyntheticSpec& spec, const std::filesystem::path& output, std::ostream& log);

Container pyramid_to_container(const Pyramid& p);
Pyramid pyramid_from_container(const Container& c);

}  // namespace lapgan
