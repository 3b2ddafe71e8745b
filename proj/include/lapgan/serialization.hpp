#pragma once

// JSON forms of the declarative types and the "LPG1" binary container used
// for checkpoints and pyramid dumps.
//
// Container layout (all integers little-endian):
//   "LPG1" | u64 header length | UTF-8 JSON header | float32 blocks
// The header is {"metadata": {...}, "blocks": [{"name": str, "shape": [..]}, ...]}
// and the float32 payloads follow in header order.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "lapgan/image.hpp"
#include "lapgan/nn.hpp"
#include "lapgan/optim.hpp"
#include "lapgan/pyramid.hpp"

namespace lapgan {

void to_json(nlohmann::json& j, const LayerSpec& s);
void from_json(const nlohmann::json& j, LayerSpec& s);
void to_json(nlohmann::json& j, const NetworkSpec& s);
void from_json(const nlohmann::json& j, NetworkSpec& s);
void to_json(nlohmann::json& j, const SgdSchedule& s);
void from_json(const nlohmann::json& j, SgdSchedule& s);
void to_json(nlohmann::json& j, const Extent& e);
void from_json(const nlohmann::json& j, Extent& e);
void to_json(nlohmann::json& j, const SizeSchedule& s);
void from_json(const nlohmann::json& j, SizeSchedule& s);

inline constexpr char kContainerMagic[4] = {'L', 'P', 'G', '1'};

struct TensorBlock {
  std::string name;
  Tensor tensor;
};

struct Container {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<TensorBlock> blocks;

  const Tensor& block(const std::string& name) const;
};

/// Writes to a temporary sibling and renames, so readers never see a partial file.
void write_container(const std::filesystem::path& path, const Container& container);
/// Throws CorruptData (with the byte offset) on malformed input.
Container read_container(const std::filesystem::path& path);

std::vector<char> encode_container(const Container& container);
Container decode_container(std::span<const char> bytes);

/// Stores spec, mode and parameters under `prefix`.
void add_network(Container& c, const std::string& prefix, const Network<float>& net);
Network<float> extract_network(const Container& c, const std::string& prefix);

void add_tensors(Container& c, const std::string& prefix, const std::vector<std::vector<Tensor>>& tensors);
std::vector<std::vector<Tensor>> extract_tensors(const Container& c, const std::string& prefix);

}  // namespace lapgan
