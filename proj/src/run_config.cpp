#include "lapgan/run_config.hpp"

#include <fstream>

#include "lapgan/errors.hpp"
#include "lapgan/serialization.hpp"

namespace lapgan {

using nlohmann::json;

namespace {

std::string_view to_string(DataSource::Kind k) {
  switch (k) {
    case DataSource::Kind::cifar:
      return "cifar";
    case DataSource::Kind::records:
      return "records";
    default:
      return "synthetic";
  }
}

DataSource::Kind parse_source(const std::string& s) {
  if (s == "synthetic") return DataSource::Kind::synthetic;
  if (s == "cifar") return DataSource::Kind::cifar;
  if (s == "records") return DataSource::Kind::records;
  throw InvalidArgument("unknown data source '" + s + "'");
}

json synthetic_json(const SyntheticSpec& s) {
  json j{{"kind", std::string(lapgan::to_string(s.kind))}, {"size", s.size},   {"channels", s.channels},
         {"count", s.count},                               {"seed", s.seed},   {"mode_std", s.mode_std},
         {"centers", s.centers}};
  if (!s.band_rms.empty()) j["band_rms"] = s.band_rms;
  return j;
}

SyntheticSpec synthetic_from(const json& j) {
  SyntheticSpec s;
  s.kind = parse_synthetic_kind(j.value("kind", std::string("multiscale-texture")));
  if (j.contains("size")) s.size = j.at("size").get<Extent>();
  s.channels = j.value("channels", s.channels);
  s.count = j.value("count", s.count);
  s.seed = j.value("seed", s.seed);
  s.band_rms = j.value("band_rms", s.band_rms);
  s.mode_std = j.value("mode_std", s.mode_std);
  if (j.contains("centers")) s.centers = j.at("centers").get<decltype(s.centers)>();
  return s;
}

json arch_json(const ArchitectureConfig& a) {
  return {{"noise_dim", a.noise_dim},         {"final_g_hidden", a.final_g_hidden},
          {"final_d_hidden", a.final_d_hidden}, {"conv_channels", a.conv_channels},
          {"d_dense_hidden", a.d_dense_hidden}, {"dropout", a.dropout}};
}

ArchitectureConfig arch_from(const json& j) {
  ArchitectureConfig a;
  a.noise_dim = j.value("noise_dim", a.noise_dim);
  a.final_g_hidden = j.value("final_g_hidden", a.final_g_hidden);
  a.final_d_hidden = j.value("final_d_hidden", a.final_d_hidden);
  a.conv_channels = j.value("conv_channels", a.conv_channels);
  a.d_dense_hidden = j.value("d_dense_hidden", a.d_dense_hidden);
  a.dropout = j.value("dropout", a.dropout);
  return a;
}

}  // namespace

void to_json(json& j, const RunConfig& c) {
  json data{{"source", std::string(to_string(c.data.kind))},
            {"split", c.data.split},
            {"split_seed", c.data.split_seed},
            {"crop_mode", std::string(to_string(c.data.crop_mode))}};
  if (c.data.kind == DataSource::Kind::synthetic) data["synthetic"] = synthetic_json(c.data.synthetic);
  if (c.data.kind != DataSource::Kind::synthetic) data["path"] = c.data.path.string();
  if (c.data.kind == DataSource::Kind::records)
    data["layout"] = {{"channels", c.data.layout.channels},
                      {"height", c.data.layout.height},
                      {"width", c.data.layout.width},
                      {"classes", c.data.layout.classes}};
  if (c.data.crop) data["crop"] = *c.data.crop;

  json specs = json::object();
  for (const auto& [k, gd] : c.level_specs) specs[std::to_string(k)] = {{"g", gd.first}, {"d", gd.second}};

  j = json{{"data", data},
           {"schedule", c.schedule ? json(*c.schedule) : json("auto")},
           {"max_coarsest", c.max_coarsest},
           {"class_conditional", c.class_conditional},
           {"architecture", arch_json(c.arch)},
           {"level_specs", specs},
           {"training",
            {{"iterations", c.train.iterations},
             {"batch_size", c.train.batch_size},
             {"d_steps", c.train.d_steps},
             {"g_steps", c.train.g_steps},
             {"loss", std::string(to_string(c.train.loss))},
             {"checkpoint_every", c.train.checkpoint_every}}},
           {"optimizer", c.train.schedule},
           {"seed", c.train.seed},
           {"levels", c.levels},
           {"parallel_levels", c.parallel_levels},
           {"output_dir", c.output_dir.string()}};
}

void from_json(const json& j, RunConfig& c) {
  c = RunConfig{};
  if (j.contains("data")) {
    const json& d = j.at("data");
    c.data.kind = parse_source(d.value("source", std::string("synthetic")));
    c.data.path = d.value("path", std::string());
    if (d.contains("layout")) {
      const json& l = d.at("layout");
      c.data.layout = {l.value("channels", std::size_t{3}), l.value("height", std::size_t{32}),
                       l.value("width", std::size_t{32}), l.value("classes", std::size_t{10})};
    }
    if (d.contains("synthetic")) c.data.synthetic = synthetic_from(d.at("synthetic"));
    if (d.contains("crop")) c.data.crop = d.at("crop").get<Extent>();
    c.data.crop_mode = parse_crop_mode(d.value("crop_mode", std::string("four-corners")));
    c.data.split = d.value("split", c.data.split);
    c.data.split_seed = d.value("split_seed", c.data.split_seed);
  }
  if (j.contains("schedule") && !j.at("schedule").is_string()) c.schedule = j.at("schedule").get<SizeSchedule>();
  if (j.contains("schedule") && j.at("schedule").is_string() && j.at("schedule") != "auto")
    throw InvalidArgument("schedule must be \"auto\" or a list of sizes");
  c.max_coarsest = j.value("max_coarsest", c.max_coarsest);
  c.class_conditional = j.value("class_conditional", false);
  if (j.contains("architecture")) c.arch = arch_from(j.at("architecture"));
  if (j.contains("level_specs"))
    for (const auto& [key, v] : j.at("level_specs").items())
      c.level_specs[std::stoul(key)] = {v.at("g").get<NetworkSpec>(), v.at("d").get<NetworkSpec>()};
  if (j.contains("training")) {
    const json& t = j.at("training");
    c.train.iterations = t.value("iterations", c.train.iterations);
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.d_steps = t.value("d_steps", c.train.d_steps);
    c.train.g_steps = t.value("g_steps", c.train.g_steps);
    c.train.loss = parse_generator_loss(t.value("loss", std::string("nonsaturating")));
    c.train.checkpoint_every = t.value("checkpoint_every", c.train.checkpoint_every);
  }
  if (j.contains("optimizer")) c.train.schedule = j.at("optimizer").get<SgdSchedule>();
  c.train.seed = j.value("seed", std::uint64_t{0});
  c.levels = j.value("levels", c.levels);
  c.parallel_levels = j.value("parallel_levels", false);
  c.output_dir = j.value("output_dir", std::string());
}

void RunConfig::validate() const {
  if (output_dir.empty()) throw InvalidArgument("output_dir is required");
  train.validate();
  if (train.iterations == 0) throw InvalidArgument("training.iterations must be positive");
  if (max_coarsest == 0) throw InvalidArgument("max_coarsest must be positive");
  if (schedule) schedule->validate();
  if (data.kind != DataSource::Kind::synthetic && data.path.empty())
    throw InvalidArgument("data.path is required for file sources");
  if (data.kind == DataSource::Kind::synthetic) data.synthetic.validate();
  if (data.split.empty() || data.split.size() > 3) throw InvalidArgument("data.split takes one to three fractions");
  double sum = 0;
  for (double f : data.split) {
    if (!(f > 0.0)) throw InvalidArgument("data.split fractions must be positive");
    sum += f;
  }
  if (sum > 1.0 + 1e-12) throw InvalidArgument("data.split fractions sum to more than 1");
  if (schedule)
    for (std::size_t k : levels)
      if (k >= schedule->levels.size()) throw InvalidArgument("levels lists a level outside the schedule");
}

SizeSchedule RunConfig::resolve_schedule(Extent image) const {
  SizeSchedule s = schedule ? *schedule : SizeSchedule::automatic(image, max_coarsest);
  s.validate();
  if (s.finest() != image)
    throw InvalidArgument("schedule starts at " + to_string(s.finest()) + " but images are " + to_string(image));
  for (std::size_t k : levels)
    if (k >= s.levels.size()) throw InvalidArgument("levels lists a level outside the schedule");
  return s;
}

LevelSpec RunConfig::level_spec(const SizeSchedule& s, std::size_t k, std::size_t channels,
                                std::size_t classes) const {
  LevelSpec spec = default_level_spec(s, k, channels, class_conditional ? classes : 0, arch);
  if (auto it = level_specs.find(k); it != level_specs.end()) {
    spec.g_spec = it->second.first;
    spec.d_spec = it->second.second;
    spec.validate();
  }
  return spec;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path.string());
  try {
    return json::parse(in).get<RunConfig>();
  } catch (const json::exception& e) {
    throw InvalidArgument("malformed config " + path.string() + ": " + e.what());
  }
}

Splits load_splits(const DataSource& source) {
  Dataset ds;
  switch (source.kind) {
    case DataSource::Kind::synthetic:
      ds = synthesize(source.synthetic);
      break;
    case DataSource::Kind::cifar:
      if (!std::filesystem::exists(source.path)) throw InvalidArgument("dataset not found: " + source.path.string());
      ds = load_cifar_binary(source.path);
      break;
    case DataSource::Kind::records:
      if (!std::filesystem::exists(source.path)) throw InvalidArgument("dataset not found: " + source.path.string());
      ds = load_records(source.path, source.layout);
      break;
  }
  if (ds.empty()) throw InvalidArgument("dataset is empty");
  Splits s = split(ds, source.split, source.split_seed);
  // Crops only boost the training set; evaluation uses centered full windows.
  if (source.crop) {
    s.train = crop_augment(s.train, *source.crop, source.crop_mode, source.split_seed);
    const Extent full = ds.extent();
    const std::size_t oy = (full.height - source.crop->height) / 2, ox = (full.width - source.crop->width) / 2;
    for (Dataset* part : {&s.validation, &s.test})
      for (auto& img : part->images) {
        Image c(img.channels(), source.crop->height, source.crop->width);
        for (std::size_t ch = 0; ch < img.channels(); ++ch)
          for (std::size_t y = 0; y < c.height(); ++y)
            for (std::size_t x = 0; x < c.width(); ++x) c.at(ch, y, x) = img.at(ch, oy + y, ox + x);
        img = std::move(c);
      }
  }
  return s;
}

}  // namespace lapgan
