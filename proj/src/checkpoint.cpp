#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "lapgan/errors.hpp"
#include "lapgan/serialization.hpp"

namespace lapgan {

using nlohmann::json;

void to_json(json& j, const LayerSpec& s) {
  j = json{{"kind", std::string(to_string(s.kind))}};
  switch (s.kind) {
    case LayerKind::dense:
      j["units"] = s.units;
      break;
    case LayerKind::conv2d:
      j["out_channels"] = s.out_channels;
      j["kernel"] = s.kernel;
      j["stride"] = s.stride;
      j["padding"] = s.padding;
      break;
    case LayerKind::dropout:
      j["drop_probability"] = s.drop_probability;
      break;
    case LayerKind::reshape:
      j["target_shape"] = s.target_shape;
      break;
    case LayerKind::class_embed:
      j["units"] = s.units;
      break;
    default:
      break;
  }
}

void from_json(const json& j, LayerSpec& s) {
  s = LayerSpec{};
  s.kind = parse_layer_kind(j.at("kind").get<std::string>());
  s.units = j.value("units", std::size_t{0});
  s.out_channels = j.value("out_channels", std::size_t{0});
  s.kernel = j.value("kernel", std::size_t{3});
  s.stride = j.value("stride", std::size_t{1});
  s.padding = j.value("padding", std::size_t{0});
  s.drop_probability = j.value("drop_probability", 0.5);
  s.target_shape = j.value("target_shape", Shape{});
}

void to_json(json& j, const NetworkSpec& s) {
  j = json{{"input_shape", s.input_shape}, {"condition_shape", s.condition_shape}, {"classes", s.classes},
           {"layers", s.layers}};
}

void from_json(const json& j, NetworkSpec& s) {
  s.input_shape = j.at("input_shape").get<Shape>();
  s.condition_shape = j.value("condition_shape", Shape{});
  s.classes = j.value("classes", std::size_t{0});
  s.layers = j.at("layers").get<std::vector<LayerSpec>>();
}

void to_json(json& j, const SgdSchedule& s) {
  j = json{{"lr0", s.lr0}, {"lr_decay", s.lr_decay}, {"momentum0", s.momentum0}, {"momentum_step", s.momentum_step},
           {"momentum_max", s.momentum_max}};
}

void from_json(const json& j, SgdSchedule& s) {
  const SgdSchedule d;
  s.lr0 = j.value("lr0", d.lr0);
  s.lr_decay = j.value("lr_decay", d.lr_decay);
  s.momentum0 = j.value("momentum0", d.momentum0);
  s.momentum_step = j.value("momentum_step", d.momentum_step);
  s.momentum_max = j.value("momentum_max", d.momentum_max);
}

void to_json(json& j, const Extent& e) { j = json::array({e.height, e.width}); }

void from_json(const json& j, Extent& e) {
  if (!j.is_array() || j.size() != 2) throw InvalidArgument("an extent is written as [height, width]");
  e = {j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

void to_json(json& j, const SizeSchedule& s) { j = s.levels; }
void from_json(const json& j, SizeSchedule& s) { s.levels = j.get<std::vector<Extent>>(); }

const Tensor& Container::block(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return b.tensor;
  throw InvalidArgument("container has no block named '" + name + "'");
}

namespace {

void put_u64(std::vector<char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::span<const char> bytes, std::size_t offset) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  return v;
}

}  // namespace

std::vector<char> encode_container(const Container& c) {
  json header{{"metadata", c.metadata}, {"blocks", json::array()}};
  for (const auto& b : c.blocks) header["blocks"].push_back({{"name", b.name}, {"shape", b.tensor.shape()}});
  const std::string text = header.dump();

  std::vector<char> out(std::begin(kContainerMagic), std::end(kContainerMagic));
  put_u64(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& b : c.blocks) {
    for (float v : b.tensor.values()) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
  }
  return out;
}

Container decode_container(std::span<const char> bytes) {
  if (bytes.size() < 12) throw CorruptData("container shorter than its fixed header", bytes.size());
  if (std::memcmp(bytes.data(), kContainerMagic, 4) != 0) throw CorruptData("missing LPG1 magic", 0);
  const std::uint64_t header_len = get_u64(bytes, 4);
  if (header_len > bytes.size() - 12) throw CorruptData("header length exceeds file size", 4);

  json header;
  try {
    header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const json::exception& e) {
    throw CorruptData(std::string("malformed container header: ") + e.what(), 12);
  }

  Container c;
  std::size_t offset = 12 + header_len;
  try {
    c.metadata = header.at("metadata");
    for (const auto& entry : header.at("blocks")) {
      TensorBlock block{entry.at("name").get<std::string>(), Tensor(entry.at("shape").get<Shape>())};
      const std::size_t need = block.tensor.size() * 4;
      if (need > bytes.size() - offset) throw CorruptData("truncated block '" + block.name + "'", offset);
      for (std::size_t i = 0; i < block.tensor.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b)
          bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + 4 * i + b])) << (8 * b);
        block.tensor[i] = std::bit_cast<float>(bits);
      }
      offset += need;
      c.blocks.push_back(std::move(block));
    }
  } catch (const json::exception& e) {
    throw CorruptData(std::string("malformed container header: ") + e.what(), 12);
  }
  if (offset != bytes.size()) throw CorruptData("trailing bytes after the last block", offset);
  return c;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  const auto bytes = encode_container(c);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InvalidArgument("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_container(bytes);
}

void add_network(Container& c, const std::string& prefix, const Network<float>& net) {
  c.metadata["networks"][prefix] = {{"spec", net.spec()}, {"mode", net.mode() == Mode::train ? "train" : "eval"}};
  for (std::size_t l = 0; l < net.layer_count(); ++l)
    for (std::size_t p = 0; p < net.parameters(l).size(); ++p)
      c.blocks.push_back({prefix + "/" + std::to_string(l) + "/" + std::to_string(p), net.parameters(l)[p]});
}

Network<float> extract_network(const Container& c, const std::string& prefix) {
  try {
    const json& entry = c.metadata.at("networks").at(prefix);
    Network<float> net(entry.at("spec").get<NetworkSpec>(), 0);
    net.set_mode(entry.value("mode", "train") == "eval" ? Mode::eval : Mode::train);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
      auto& params = net.mutable_parameters(l);
      for (std::size_t p = 0; p < params.size(); ++p) {
        const Tensor& stored = c.block(prefix + "/" + std::to_string(l) + "/" + std::to_string(p));
        if (stored.shape() != params[p].shape()) {
          throw InvalidArgument("stored parameter " + to_string(stored.shape()) + " does not match spec " +
                                to_string(params[p].shape()));
        }
        params[p] = stored;
      }
    }
    return net;
  } catch (const json::exception& e) {
    throw InvalidArgument("network '" + prefix + "' missing from container: " + e.what());
  }
}

void add_tensors(Container& c, const std::string& prefix, const std::vector<std::vector<Tensor>>& tensors) {
  c.metadata["tensor_groups"][prefix] = json::array();
  for (std::size_t l = 0; l < tensors.size(); ++l) {
    c.metadata["tensor_groups"][prefix].push_back(tensors[l].size());
    for (std::size_t p = 0; p < tensors[l].size(); ++p)
      c.blocks.push_back({prefix + "/" + std::to_string(l) + "/" + std::to_string(p), tensors[l][p]});
  }
}

std::vector<std::vector<Tensor>> extract_tensors(const Container& c, const std::string& prefix) {
  std::vector<std::vector<Tensor>> out;
  const auto counts = c.metadata.at("tensor_groups").at(prefix).get<std::vector<std::size_t>>();
  for (std::size_t l = 0; l < counts.size(); ++l) {
    out.emplace_back();
    for (std::size_t p = 0; p < counts[l]; ++p)
      out.back().push_back(c.block(prefix + "/" + std::to_string(l) + "/" + std::to_string(p)));
  }
  return out;
}

}  // namespace lapgan
