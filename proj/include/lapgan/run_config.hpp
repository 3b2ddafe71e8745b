#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lapgan/cascade.hpp"
#include "lapgan/dataset.hpp"
#include "lapgan/synthetic.hpp"

namespace lapgan {

/// Where training images come from.
struct DataSource {
  enum class Kind { synthetic, cifar, records };
  Kind kind = Kind::synthetic;
  std::filesystem::path path;  // cifar / records
  RecordLayout layout;         // records
  SyntheticSpec synthetic;     // synthetic
  std::optional<Extent> crop;  // four windows per image before the pyramid
  CropMode crop_mode = CropMode::four_corners;
  std::vector<double> split{0.8, 0.1, 0.1};  // train / validation / test
  std::uint64_t split_seed = 0;
};

/// Everything a training run depends on. Serialized next to the outputs so
/// that a run can be repeated from its config alone.
///
/// JSON schema (all keys optional except where noted):
///   data: {source: "synthetic"|"cifar"|"records", path, layout: {channels,height,width,classes},
///          synthetic: {kind, size: [h,w], channels, count, seed, band_rms},
///          crop: [h,w], crop_mode, split: [train,val,test], split_seed}
///   schedule: "auto" or [[h,w], ...]          max_coarsest: 8
///   class_conditional: false
///   architecture: {noise_dim, final_g_hidden, final_d_hidden, conv_channels, d_dense_hidden, dropout}
///   level_specs: {"<k>": {g: NetworkSpec, d: NetworkSpec}}
///   training: {iterations, batch_size, d_steps, g_steps, loss, checkpoint_every}
///   optimizer: {lr0, lr_decay, momentum0, momentum_step, momentum_max}
///   levels: [k, ...]    seed: 0    parallel_levels: false    output_dir (required)
struct RunConfig {
  DataSource data;
  std::optional<SizeSchedule> schedule;  // empty: automatic from the image size
  std::size_t max_coarsest = 8;
  bool class_conditional = false;
  ArchitectureConfig arch;
  std::map<std::size_t, std::pair<NetworkSpec, NetworkSpec>> level_specs;
  TrainConfig train;
  std::vector<std::size_t> levels;  // empty: all levels
  bool parallel_levels = false;
  std::filesystem::path output_dir;

  /// Checks contracts that do not need the dataset. Throws InvalidArgument.
  void validate() const;
  SizeSchedule resolve_schedule(Extent image) const;
  LevelSpec level_spec(const SizeSchedule& schedule, std::size_t k, std::size_t channels, std::size_t classes) const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_run_config(const std::filesystem::path& path);

/// Loads the configured source, applies crops and returns the splits.
Splits load_splits(const DataSource& source);

}  // namespace lapgan
