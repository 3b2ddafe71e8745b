#include "lapgan/cascade.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "lapgan/kernels.hpp"

namespace lapgan {

using nlohmann::json;

Shape LevelSpec::noise_shape() const {
  if (noise_kind == NoiseKind::vector) return {noise_dim};
  return {1, size.height, size.width};
}

void LevelSpec::validate() const {
  const std::string where = "level " + std::to_string(k) + ": ";
  if (size.height == 0 || size.width == 0 || channels == 0) throw InvalidArgument(where + "empty level size");
  if (is_final != (noise_kind == NoiseKind::vector))
    throw InvalidArgument(where + "the final level takes vector noise and other levels take a noise plane");
  if (class_conditional != (classes > 0)) throw InvalidArgument(where + "class conditioning needs a class count");
  if (g_spec.input_shape != noise_shape())
    throw InvalidArgument(where + "generator input " + to_string(g_spec.input_shape) + " does not match noise " +
                          to_string(noise_shape()));
  const Shape cond = is_final ? Shape{} : coeff_shape();
  if (g_spec.condition_shape != cond || d_spec.condition_shape != cond)
    throw InvalidArgument(where + "conditioning shape must be " + to_string(cond));
  if (d_spec.input_shape != coeff_shape())
    throw InvalidArgument(where + "discriminator input must be " + to_string(coeff_shape()));
  const std::size_t want_classes = class_conditional ? classes : 0;
  if (g_spec.classes != want_classes || d_spec.classes != want_classes)
    throw InvalidArgument(where + "network class counts do not match the level");

  const Network<float> g(g_spec, 0);
  const Network<float> d(d_spec, 0);
  if (g.output_shape() != coeff_shape())
    throw InvalidArgument(where + "generator emits " + to_string(g.output_shape()) + ", expected " +
                          to_string(coeff_shape()));
  if (d.output_shape() != Shape{1}) throw InvalidArgument(where + "discriminator must emit one probability");

  if (!is_final) {
    // Noise plane + image channels (+ class plane) reach the first convolution.
    const std::size_t want = channels + 1 + (class_conditional ? 1 : 0);
    for (std::size_t l = 0; l < g.layer_count(); ++l) {
      if (g.spec().layers[l].kind != LayerKind::conv2d) continue;
      const Shape in = l == 0 ? g_spec.input_shape : g.layer_output_shape(l - 1);
      if (in[0] != want)
        throw InvalidArgument(where + "generator's first convolution sees " + std::to_string(in[0]) +
                              " channels, expected " + std::to_string(want));
      break;
    }
  }
}

LevelSpec default_level_spec(const SizeSchedule& schedule, std::size_t k, std::size_t channels, std::size_t classes,
                             const ArchitectureConfig& arch) {
  schedule.validate();
  if (k >= schedule.levels.size()) throw InvalidArgument("level index outside the schedule");
  LevelSpec s;
  s.k = k;
  s.size = schedule.levels[k];
  s.is_final = k == schedule.band_levels();
  s.channels = channels;
  s.class_conditional = classes > 0;
  s.classes = classes;
  s.noise_kind = s.is_final ? NoiseKind::vector : NoiseKind::plane;
  s.noise_dim = arch.noise_dim;
  const std::size_t h = s.size.height, w = s.size.width;
  const std::size_t pixels = channels * h * w;

  if (s.is_final) {
    s.g_spec = {{arch.noise_dim}, {}, classes, {LayerSpec::dense(arch.final_g_hidden), LayerSpec::relu()}};
    if (classes) s.g_spec.layers.push_back(LayerSpec::class_embed(arch.final_g_hidden / 4));
    for (auto l : {LayerSpec::dense(arch.final_g_hidden), LayerSpec::relu(), LayerSpec::dense(pixels),
                   LayerSpec::reshape({channels, h, w})})
      s.g_spec.layers.push_back(l);

    s.d_spec = {{channels, h, w}, {}, classes, {LayerSpec::reshape({pixels}), LayerSpec::dense(arch.final_d_hidden),
                                                LayerSpec::relu(), LayerSpec::dropout(arch.dropout)}};
    if (classes) s.d_spec.layers.push_back(LayerSpec::class_embed(arch.final_d_hidden / 4));
    for (auto l : {LayerSpec::dense(arch.final_d_hidden), LayerSpec::relu(), LayerSpec::dropout(arch.dropout),
                   LayerSpec::dense(1), LayerSpec::sigmoid()})
      s.d_spec.layers.push_back(l);
  } else {
    const Shape img{channels, h, w};
    s.g_spec = {{1, h, w}, img, classes, {LayerSpec::concat_condition()}};
    if (classes) s.g_spec.layers.push_back(LayerSpec::class_embed());
    for (auto l : {LayerSpec::conv(arch.conv_channels, 3, 1, 1), LayerSpec::relu(),
                   LayerSpec::conv(arch.conv_channels, 3, 1, 1), LayerSpec::relu(), LayerSpec::conv(channels, 3, 1, 1)})
      s.g_spec.layers.push_back(l);

    const std::size_t h2 = (h + 2 - 3) / 2 + 1, w2 = (w + 2 - 3) / 2 + 1;
    s.d_spec = {img, img, classes, {LayerSpec::concat_condition()}};
    if (classes) s.d_spec.layers.push_back(LayerSpec::class_embed());
    for (auto l : {LayerSpec::conv(arch.conv_channels, 3, 1, 1), LayerSpec::relu(),
                   LayerSpec::conv(arch.conv_channels, 3, 2, 1), LayerSpec::relu(),
                   LayerSpec::reshape({arch.conv_channels * h2 * w2}), LayerSpec::dense(1), LayerSpec::sigmoid()})
      s.d_spec.layers.push_back(l);
  }
  s.validate();
  return s;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
  if (d_steps == 0 && g_steps == 0) throw InvalidArgument("at least one of d_steps, g_steps must be positive");
  schedule.validate();
}

namespace {

std::string rng_to_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng rng_from_string(const std::string& s) {
  Rng rng;
  std::istringstream is(s);
  is >> rng;
  if (!is) throw InvalidArgument("malformed RNG state");
  return rng;
}

}  // namespace

LevelModel::LevelModel(LevelSpec s, std::uint64_t seed)
    : spec(std::move(s)),
      g(spec.g_spec, derive_seed(seed, 1)),
      d(spec.d_spec, derive_seed(seed, 2)),
      rng_state(rng_to_string(Rng(derive_seed(seed, 3)))) {}

LevelModel init_level(const LevelSpec& spec, std::uint64_t seed) {
  spec.validate();
  return LevelModel(spec, seed);
}

Tensor onehot(std::span<const int> labels, std::size_t classes) {
  Tensor out({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) throw InvalidArgument("label out of range");
    out[i * classes + static_cast<std::size_t>(labels[i])] = 1.0f;
  }
  return out;
}

LevelData prepare_level_data(const Dataset& ds, const SizeSchedule& schedule, std::size_t k, bool class_conditional) {
  schedule.validate();
  if (ds.empty()) throw InvalidArgument("training set is empty");
  if (ds.extent() != schedule.finest())
    throw InvalidArgument("dataset images are " + to_string(ds.extent()) + " but the schedule starts at " +
                          to_string(schedule.finest()));
  if (k > schedule.band_levels()) throw InvalidArgument("level index outside the schedule");
  if (class_conditional && !ds.labeled()) throw InvalidArgument("class-conditional training needs labels");

  const bool final = k == schedule.band_levels();
  const Extent e = schedule.levels[k];
  const std::size_t c = ds.channels();
  LevelData out;
  out.h = Tensor({ds.size(), c, e.height, e.width});
  if (!final) out.l = Tensor({ds.size(), c, e.height, e.width});
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto g = gaussian_pyramid(ds.images[i], schedule);
    Image h = g[k];
    if (!final) {
      const Image l = upsample(g[k + 1], e);
      h -= l;
      std::ranges::copy(l.values(), out.l.row(i).begin());
    }
    std::ranges::copy(h.values(), out.h.row(i).begin());
  }
  if (class_conditional) out.onehot = onehot(ds.labels, ds.classes);
  return out;
}

namespace {

GanBatch<float> draw_batch(const LevelModel& m, const LevelData& data, std::size_t batch, Rng& rng) {
  const std::size_t n = data.h.dim(0);
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));

  auto gather = [&](const Tensor& t) {
    if (t.empty()) return Tensor{};
    Shape shape = t.shape();
    shape[0] = batch;
    Tensor out(shape);
    for (std::size_t b = 0; b < batch; ++b) std::ranges::copy(t.row(idx[b]), out.row(b).begin());
    return out;
  };

  GanBatch<float> out;
  out.real = gather(data.h);
  out.condition = gather(data.l);
  out.class_onehot = gather(data.onehot);
  Shape noise{batch};
  for (auto d : m.spec.noise_shape()) noise.push_back(d);
  out.noise = sample_noise(noise, rng);
  out.present_real = choose_presentations(batch, rng);
  return out;
}

}  // namespace

void train_level(LevelModel& model, const LevelData& data, const TrainConfig& config, const TrainCallbacks& callbacks) {
  config.validate();
  model.spec.validate();
  if (data.h.empty() || data.h.shape().size() != 4 ||
      Shape(data.h.shape().begin() + 1, data.h.shape().end()) != model.spec.coeff_shape())
    throw InvalidArgument("level data does not match level " + std::to_string(model.spec.k));
  if (model.spec.is_final != data.l.empty()) throw InvalidArgument("level data conditioning does not match spec");
  if (model.spec.class_conditional && data.onehot.empty()) throw InvalidArgument("level data has no labels");

  Rng rng = rng_from_string(model.rng_state);
  SgdOptimizer<float> g_opt(config.schedule), d_opt(config.schedule);
  if (!model.g_velocity.empty()) g_opt.set_velocity(model.g_velocity);
  if (!model.d_velocity.empty()) d_opt.set_velocity(model.d_velocity);

  auto sync = [&] {
    model.g_velocity = g_opt.velocity();
    model.d_velocity = d_opt.velocity();
    model.rng_state = rng_to_string(rng);
  };

  const std::size_t n = data.h.dim(0);
  LevelModel last_good = model;
  try {
    for (std::size_t it = model.iteration; it < config.iterations; ++it) {
      const std::size_t epoch = it * config.batch_size / n;
      TrainStepReport report;
      for (std::size_t s = 0; s < config.d_steps; ++s) {
        const auto batch = draw_batch(model, data, config.batch_size, rng);
        const auto r = d_step(model.d, d_opt, model.g, batch, epoch, rng());
        report.d_loss = r.d_loss;
        report.d_acc_real = r.d_acc_real;
        report.d_acc_fake = r.d_acc_fake;
      }
      for (std::size_t s = 0; s < config.g_steps; ++s) {
        const auto batch = draw_batch(model, data, config.batch_size, rng);
        report.g_loss = g_step(model.g, g_opt, model.d, batch, config.loss, epoch, rng()).g_loss;
      }
      model.iteration = it + 1;
      if (callbacks.on_step) callbacks.on_step(it, epoch, report);
      if (config.checkpoint_every && model.iteration % config.checkpoint_every == 0 &&
          model.iteration < config.iterations) {
        sync();
        last_good = model;
        if (callbacks.on_checkpoint) callbacks.on_checkpoint(model);
      }
    }
  } catch (const NumericOverflow& e) {
    throw TrainingDiverged("level " + std::to_string(model.spec.k) + " diverged at iteration " +
                               std::to_string(model.iteration) + ": " + e.what(),
                           std::move(last_good));
  }
  sync();
  model.trained = true;
  if (callbacks.on_checkpoint) callbacks.on_checkpoint(model);
}

LevelModel train_level(std::size_t k, const Dataset& ds, const LevelSpec& spec, const SizeSchedule& schedule,
                       const TrainConfig& config, const TrainCallbacks& callbacks) {
  if (spec.k != k || k >= schedule.levels.size() || spec.size != schedule.levels[k] ||
      spec.is_final != (k == schedule.band_levels()))
    throw InvalidArgument("level spec does not match the size schedule");
  LevelModel model = init_level(spec, derive_seed(config.seed, k));
  train_level(model, prepare_level_data(ds, schedule, k, spec.class_conditional), config, callbacks);
  return model;
}

namespace {

json level_spec_json(const LevelSpec& s) {
  return {{"k", s.k},
          {"size", s.size},
          {"is_final", s.is_final},
          {"channels", s.channels},
          {"noise_kind", s.noise_kind == NoiseKind::vector ? "vector" : "plane"},
          {"noise_dim", s.noise_dim},
          {"class_conditional", s.class_conditional},
          {"classes", s.classes}};
}

LevelSpec level_spec_from(const json& j, NetworkSpec g, NetworkSpec d) {
  LevelSpec s;
  s.k = j.at("k").get<std::size_t>();
  s.size = j.at("size").get<Extent>();
  s.is_final = j.at("is_final").get<bool>();
  s.channels = j.at("channels").get<std::size_t>();
  s.noise_kind = j.at("noise_kind").get<std::string>() == "vector" ? NoiseKind::vector : NoiseKind::plane;
  s.noise_dim = j.at("noise_dim").get<std::size_t>();
  s.class_conditional = j.at("class_conditional").get<bool>();
  s.classes = j.at("classes").get<std::size_t>();
  s.g_spec = std::move(g);
  s.d_spec = std::move(d);
  return s;
}

}  // namespace

Container level_to_container(const LevelModel& m) {
  Container c;
  c.metadata["kind"] = "lapgan-level";
  c.metadata["level"] = level_spec_json(m.spec);
  c.metadata["iteration"] = m.iteration;
  c.metadata["trained"] = m.trained;
  c.metadata["rng_state"] = m.rng_state;
  add_network(c, "generator", m.g);
  add_network(c, "discriminator", m.d);
  add_tensors(c, "generator_velocity", m.g_velocity);
  add_tensors(c, "discriminator_velocity", m.d_velocity);
  return c;
}

LevelModel level_from_container(const Container& c) {
  try {
    if (c.metadata.at("kind") != "lapgan-level") throw InvalidArgument("container does not hold a LAPGAN level");
    Network<float> g = extract_network(c, "generator");
    Network<float> d = extract_network(c, "discriminator");
    LevelSpec spec = level_spec_from(c.metadata.at("level"), g.spec(), d.spec());
    spec.validate();
    LevelModel m(spec, 0);
    m.g = std::move(g);
    m.d = std::move(d);
    m.g_velocity = extract_tensors(c, "generator_velocity");
    m.d_velocity = extract_tensors(c, "discriminator_velocity");
    m.rng_state = c.metadata.at("rng_state").get<std::string>();
    m.iteration = c.metadata.at("iteration").get<std::size_t>();
    m.trained = c.metadata.at("trained").get<bool>();
    return m;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed level checkpoint: ") + e.what());
  }
}

bool CascadeModel::complete() const {
  if (levels.size() != schedule.levels.size()) return false;
  return std::ranges::all_of(levels, [](const auto& l) { return l.has_value(); });
}

bool CascadeModel::trained() const {
  return complete() && std::ranges::all_of(levels, [](const auto& l) { return l->trained; });
}

const LevelModel& CascadeModel::level(std::size_t k) const {
  if (k >= levels.size() || !levels[k]) throw InvalidState("cascade has no model for level " + std::to_string(k));
  return *levels[k];
}

CascadeModel make_cascade(const SizeSchedule& schedule, std::size_t channels, std::size_t classes,
                          const ArchitectureConfig& arch, std::uint64_t seed) {
  CascadeModel c{schedule, channels, classes, {}};
  for (std::size_t k = 0; k < schedule.levels.size(); ++k)
    c.levels.emplace_back(init_level(default_level_spec(schedule, k, channels, classes, arch), derive_seed(seed, k)));
  return c;
}

namespace {

Tensor run_generator(const LevelModel& level, const Tensor& z, const Tensor& condition, std::span<const int> labels) {
  NetInputs<float> in{z, condition, {}};
  if (level.spec.class_conditional) in.class_onehot = onehot(labels, level.spec.classes);
  return level.g.forward(in, 0).output;
}

Shape batched(std::size_t n, const Shape& s) {
  Shape out{n};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

}  // namespace

Tensor generate_level(const LevelModel& level, const Tensor& condition, std::span<const int> labels, std::size_t n,
                      Rng& rng) {
  const Tensor z = sample_noise(batched(n, level.spec.noise_shape()), rng);
  return run_generator(level, z, condition, labels);
}

Sample sample(const CascadeModel& cascade, Rng& rng, const std::optional<Image>& start, std::optional<int> label) {
  if (cascade.levels.size() != cascade.schedule.levels.size())
    throw InvalidState("cascade does not cover its size schedule");
  for (std::size_t k = 0; k < cascade.levels.size(); ++k) cascade.level(k);

  Sample out;
  if (cascade.class_conditional()) {
    if (!label) label = static_cast<int>(uniform01(rng) * static_cast<double>(cascade.classes));
    if (*label < 0 || static_cast<std::size_t>(*label) >= cascade.classes) throw InvalidArgument("label out of range");
    out.label = *label;
  } else if (label) {
    throw InvalidArgument("unconditional cascade takes no label");
  }
  const std::vector<int> labels = label ? std::vector<int>{*label} : std::vector<int>{};

  const std::size_t K = cascade.schedule.band_levels();
  const Extent coarse = cascade.schedule.coarsest();
  Image current;
  if (start) {
    if (start->extent() != coarse || start->channels() != cascade.channels)
      throw InvalidArgument("start image must be " + to_string(coarse) + " with " +
                            std::to_string(cascade.channels) + " channels");
    current = *start;
    out.trace.steps.push_back({K, Tensor{}, current, current});
  } else {
    const LevelModel& top = cascade.level(K);
    Tensor z = sample_noise(batched(1, top.spec.noise_shape()), rng);
    const Tensor h = run_generator(top, z, {}, labels);
    current = unstack(h, 0);
    out.trace.steps.push_back({K, std::move(z), current, current});
  }

  for (std::size_t k = K; k-- > 0;) {
    const LevelModel& lvl = cascade.level(k);
    const Image l = upsample(current, cascade.schedule.levels[k]);
    Tensor z = sample_noise(batched(1, lvl.spec.noise_shape()), rng);
    const Image h = unstack(run_generator(lvl, z, stack(std::span(&l, 1)), labels), 0);
    current = l + h;
    out.trace.steps.push_back({k, std::move(z), h, current});
  }
  out.image = current;
  return out;
}

std::vector<Sample> sample_grid(const CascadeModel& cascade, std::size_t n, Rng& rng, bool per_class) {
  if (n == 0) throw InvalidArgument("sample_grid needs n >= 1");
  std::vector<Sample> out;
  if (per_class) {
    if (!cascade.class_conditional()) throw InvalidArgument("per-class sampling needs a class-conditional cascade");
    for (std::size_t c = 0; c < cascade.classes; ++c)
      for (std::size_t i = 0; i < n; ++i) out.push_back(sample(cascade, rng, std::nullopt, static_cast<int>(c)));
  } else {
    for (std::size_t i = 0; i < n; ++i) out.push_back(sample(cascade, rng));
  }
  return out;
}

Neighbor nearest_neighbor(const Image& query, const Dataset& trainset) {
  if (trainset.empty()) throw InvalidArgument("nearest_neighbor needs a non-empty training set");
  if (trainset.extent() != query.extent() || trainset.channels() != query.channels())
    throw InvalidArgument("query size does not match the training set");
  const std::size_t dim = query.size();
  std::vector<double> samples;
  samples.reserve(dim * trainset.size());
  for (const auto& img : trainset.images) samples.insert(samples.end(), img.values().begin(), img.values().end());
  const std::vector<double> q(query.values().begin(), query.values().end());
  std::vector<double> dist(trainset.size());
  kernels::omp::squared_distances(samples, q, dim, dist);

  Neighbor best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < dist.size(); ++i)
    if (dist[i] < best.distance) best = {i, dist[i]};
  return best;
}

}  // namespace lapgan
