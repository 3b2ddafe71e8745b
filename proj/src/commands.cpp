#include "lapgan/commands.hpp"

#include <fstream>
#include <future>
#include <mutex>

#include "lapgan/errors.hpp"
#include "lapgan/likelihood.hpp"
#include "lapgan/pnm.hpp"
#include "lapgan/serialization.hpp"

namespace lapgan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text_atomic(const fs::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw InvalidArgument("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

fs::path checkpoint_name(std::size_t k) { return "level_" + std::to_string(k) + ".lpg"; }

}  // namespace

void write_manifest(const fs::path& path, const Manifest& m) {
  json levels = json::array();
  for (std::size_t k = 0; k < m.schedule.levels.size(); ++k) {
    levels.push_back({{"k", k},
                      {"size", m.schedule.levels[k]},
                      {"checkpoint", k < m.checkpoints.size() ? m.checkpoints[k].string() : ""},
                      {"trained", k < m.trained.size() && m.trained[k]},
                      {"conditional", k != m.schedule.band_levels()}});
  }
  const json j{{"format", "lapgan-manifest"}, {"version", 1},         {"K", m.schedule.band_levels()},
               {"schedule", m.schedule},      {"channels", m.channels}, {"classes", m.classes},
               {"class_conditional", m.classes > 0}, {"levels", levels}, {"config", m.config}};
  write_text_atomic(path, j.dump(2) + "\n");
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open manifest " + path.string());
  try {
    const json j = json::parse(in);
    if (j.value("format", "") != "lapgan-manifest") throw InvalidArgument(path.string() + " is not a manifest");
    Manifest m;
    m.schedule = j.at("schedule").get<SizeSchedule>();
    m.schedule.validate();
    m.channels = j.at("channels").get<std::size_t>();
    m.classes = j.at("classes").get<std::size_t>();
    for (const auto& l : j.at("levels")) {
      m.checkpoints.emplace_back(l.at("checkpoint").get<std::string>());
      m.trained.push_back(l.at("trained").get<bool>());
    }
    if (m.checkpoints.size() != m.schedule.levels.size())
      throw InvalidArgument("manifest level list does not match its schedule");
    m.config = j.value("config", json::object());
    return m;
  } catch (const json::exception& e) {
    throw InvalidArgument("malformed manifest " + path.string() + ": " + e.what());
  }
}

CascadeModel load_cascade(const fs::path& manifest_path) {
  const Manifest m = read_manifest(manifest_path);
  CascadeModel c{m.schedule, m.channels, m.classes, {}};
  for (std::size_t k = 0; k < m.checkpoints.size(); ++k) {
    if (m.checkpoints[k].empty()) throw InvalidArgument("manifest has no checkpoint for level " + std::to_string(k));
    const fs::path p = manifest_path.parent_path() / m.checkpoints[k];
    if (!fs::exists(p)) throw InvalidArgument("missing checkpoint " + p.string());
    LevelModel level = level_from_container(read_container(p));
    if (level.spec.k != k || level.spec.size != m.schedule.levels[k])
      throw InvalidArgument("checkpoint " + p.string() + " does not match level " + std::to_string(k));
    c.levels.emplace_back(std::move(level));
  }
  return c;
}

int cmd_train(const RunConfig& config, std::ostream& log, bool resume) {
  // Everything that can be checked is checked before the first write.
  Splits splits;
  SizeSchedule schedule;
  std::vector<LevelSpec> specs;
  std::vector<std::size_t> levels;
  try {
    config.validate();
    splits = load_splits(config.data);
    splits.train.validate();
    if (splits.train.empty()) throw InvalidArgument("training split is empty");
    if (config.class_conditional && !splits.train.labeled())
      throw InvalidArgument("class_conditional needs a labeled dataset");
    schedule = config.resolve_schedule(splits.train.extent());
    const std::size_t classes = config.class_conditional ? splits.train.classes : 0;
    for (std::size_t k = 0; k < schedule.levels.size(); ++k)
      specs.push_back(config.level_spec(schedule, k, splits.train.channels(), classes));
    levels = config.levels;
    if (levels.empty())
      for (std::size_t k = 0; k < schedule.levels.size(); ++k) levels.push_back(k);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  const fs::path out = config.output_dir;
  fs::create_directories(out);
  write_text_atomic(out / "config.json", json(config).dump(2) + "\n");

  Manifest manifest{schedule, splits.train.channels(), config.class_conditional ? splits.train.classes : 0, {}, {},
                    json(config)};
  manifest.checkpoints.assign(schedule.levels.size(), fs::path{});
  manifest.trained.assign(schedule.levels.size(), false);
  for (std::size_t k = 0; k < schedule.levels.size(); ++k) {
    const fs::path p = out / checkpoint_name(k);
    if (fs::exists(p)) {
      try {
        manifest.trained[k] = level_from_container(read_container(p)).trained;
        manifest.checkpoints[k] = checkpoint_name(k);
      } catch (const Error&) {
      }
    }
  }

  std::mutex io;
  TelemetryLog telemetry(out / "telemetry.jsonl", resume);

  auto run_level = [&](std::size_t k) -> int {
    const fs::path ckpt = out / checkpoint_name(k);
    std::optional<LevelModel> model;
    if (resume && fs::exists(ckpt)) {
      model.emplace(level_from_container(read_container(ckpt)));
      if (!(model->spec == specs[k])) throw InvalidArgument("checkpoint for level " + std::to_string(k) +
                                                            " was trained with a different spec");
    } else {
      model.emplace(init_level(specs[k], derive_seed(config.train.seed, k)));
    }
    {
      std::lock_guard lock(io);
      log << "level " << k << ": " << to_string(specs[k].size) << ", starting at iteration " << model->iteration
          << " of " << config.train.iterations << "\n";
    }
    TrainCallbacks cb;
    cb.on_step = [&, k](std::size_t it, std::size_t epoch, const TrainStepReport& r) {
      std::lock_guard lock(io);
      telemetry.record(static_cast<int>(k), it, epoch, r);
    };
    cb.on_checkpoint = [&, k](const LevelModel& m) {
      write_container(out / checkpoint_name(k), level_to_container(m));
      std::lock_guard lock(io);
      manifest.checkpoints[k] = checkpoint_name(k);
      manifest.trained[k] = m.trained;
    };
    const LevelData data = prepare_level_data(splits.train, schedule, k, specs[k].class_conditional);
    try {
      train_level(*model, data, config.train, cb);
    } catch (const TrainingDiverged& e) {
      write_container(ckpt, level_to_container(e.last_good()));
      std::lock_guard lock(io);
      manifest.checkpoints[k] = checkpoint_name(k);
      manifest.trained[k] = false;
      log << "error: " << e.what() << "; kept the last good checkpoint\n";
      return kExitDiverged;
    }
    return kExitOk;
  };

  int status = kExitOk;
  try {
    if (config.parallel_levels) {
      std::vector<std::future<int>> jobs;
      for (std::size_t k : levels) jobs.push_back(std::async(std::launch::async, run_level, k));
      for (auto& j : jobs) status = std::max(status, j.get());
    } else {
      for (std::size_t k : levels) {
        status = run_level(k);
        if (status != kExitOk) break;
      }
    }
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    status = kExitInvalid;
  }
  write_manifest(out / "manifest.json", manifest);
  if (status == kExitOk) log << "wrote " << (out / "manifest.json").string() << "\n";
  return status;
}

int cmd_sample(const fs::path& manifest, const SampleOptions& o, std::ostream& log) {
  try {
    if (o.count == 0) throw InvalidArgument("count must be at least 1");
    const CascadeModel cascade = load_cascade(manifest);
    std::optional<Image> start;
    if (o.start) start = read_pnm(*o.start);
    if (start && start->channels() != cascade.channels) throw InvalidArgument("start image has the wrong channel count");
    fs::create_directories(o.output_dir);
    Rng rng(o.seed);
    for (std::size_t i = 0; i < o.count; ++i) {
      const Sample s = sample(cascade, rng, start, o.label);
      write_pnm(o.output_dir / ("sample_" + std::to_string(i) + ".pnm"), s.image);
      if (o.trace)
        for (const auto& step : s.trace.steps)
          write_pnm(o.output_dir / ("sample_" + std::to_string(i) + "_level_" + std::to_string(step.k) + ".pnm"),
                    step.image);
    }
    log << "wrote " << o.count << " samples to " << o.output_dir.string() << "\n";
    return kExitOk;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
}

json eval_ll_report(const CascadeModel& cascade, const Dataset& validation, const Dataset& test,
                    const EvalOptions& o) {
  LikelihoodConfig cfg;
  cfg.n_model_samples = o.n_model_samples;
  if (!o.sigma_grid.empty()) cfg.sigma_grid = o.sigma_grid;
  cfg.seed = o.seed;

  const CascadeSampler sampler(cascade);
  json report{{"n_test", test.size()}, {"n_validation", validation.size()},
              {"sigma_grid", cfg.sigma_grid}, {"std_definition", "sample standard deviation over test images"}};

  Rng rng(derive_seed(o.seed, 0xf1a7));
  const auto samples = sample_images(cascade, o.n_model_samples, rng);
  const FlatReport flat = evaluate_flat(samples, validation, test, cfg.sigma_grid);
  report["flat"] = {{"sigma", flat.sigma}, {"mean", flat.mean}, {"std", flat.std},
                    {"n_model_samples", flat.n_model_samples}};

  if (cascade.schedule.is_dyadic()) {
    const MultiscaleReport ms = evaluate_multiscale(sampler, validation, test, cfg);
    report["multiscale"] = {{"sigmas", ms.sigmas}, {"level_means", ms.level_means}, {"mean", ms.mean},
                            {"std", ms.std}, {"n_model_samples", ms.n_model_samples}};
  } else {
    report["multiscale"] = nullptr;
    report["multiscale_skipped"] = "size schedule is not dyadic";
  }
  return report;
}

int cmd_eval_ll(const fs::path& manifest_path, const EvalOptions& o, std::ostream& log) {
  try {
    const Manifest manifest = read_manifest(manifest_path);
    for (std::size_t k = 0; k < manifest.trained.size(); ++k)
      if (!manifest.trained[k]) throw InvalidState("level " + std::to_string(k) + " is not trained");
    const CascadeModel cascade = load_cascade(manifest_path);
    const RunConfig config = manifest.config.get<RunConfig>();
    Splits splits = load_splits(config.data);
    auto trim = [](Dataset& ds, std::optional<std::size_t> max) {
      if (max && ds.size() > *max) {
        ds.images.resize(*max);
        if (ds.labeled()) ds.labels.resize(*max);
      }
    };
    trim(splits.validation, o.max_validation);
    trim(splits.test, o.max_test);
    if (splits.validation.empty() || splits.test.empty())
      throw InvalidArgument("the configured split leaves no validation or test images");
    const json report = eval_ll_report(cascade, splits.validation, splits.test, o);
    log << report.dump(2) << "\n";
    if (o.report) write_text_atomic(*o.report, report.dump(2) + "\n");
    return kExitOk;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const nlohmann::json::exception& e) {
    log << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
}

Container pyramid_to_container(const Pyramid& p) {
  Container c;
  c.metadata["kind"] = "laplacian-pyramid";
  c.metadata["schedule"] = p.schedule;
  for (std::size_t k = 0; k < p.coeffs.size(); ++k) {
    const Image& h = p.coeffs[k];
    c.blocks.push_back({"h/" + std::to_string(k), Tensor({h.channels(), h.height(), h.width()}, h.values())});
  }
  return c;
}

Pyramid pyramid_from_container(const Container& c) {
  if (c.metadata.value("kind", "") != "laplacian-pyramid") throw InvalidArgument("container is not a pyramid");
  Pyramid p;
  p.schedule = c.metadata.at("schedule").get<SizeSchedule>();
  for (std::size_t k = 0; k < p.schedule.levels.size(); ++k) {
    const Tensor& t = c.block("h/" + std::to_string(k));
    if (t.rank() != 3) throw InvalidArgument("pyramid block has the wrong rank");
    p.coeffs.emplace_back(t.dim(0), t.dim(1), t.dim(2), t.values());
  }
  return p;
}

int cmd_pyramid_build(const fs::path& image, const fs::path& output, std::size_t max_coarsest, std::ostream& log) {
  try {
    const Image img = read_pnm(image);
    const Pyramid p = build_pyramid(img, SizeSchedule::automatic(img.extent(), max_coarsest));
    write_container(output, pyramid_to_container(p));
    log << "K=" << p.schedule.band_levels() << ":";
    for (const auto& e : p.schedule.levels) log << " " << to_string(e);
    log << "\n";
    return kExitOk;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
}

int cmd_pyramid_reconstruct(const fs::path& pyramid, const fs::path& output, std::ostream& log) {
  try {
    write_pnm(output, reconstruct(pyramid_from_container(read_container(pyramid))));
    return kExitOk;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
}

int cmd_pyramid_check(const fs::path& image, std::size_t max_coarsest, std::ostream& log) {
  try {
    const Image img = read_pnm(image);
    const Pyramid p = build_pyramid(img, SizeSchedule::automatic(img.extent(), max_coarsest));
    const double err = max_abs_difference(reconstruct(p), img);
    log << "K=" << p.schedule.band_levels() << " max_abs_error=" << err << "\n";
    return err < 1e-6 ? kExitOk : kExitDiverged;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
}

int cmd_data_synth(const SyntheticSpec& spec, const fs::path& output, std::ostream& log) {
  try {
    Dataset ds = synthesize(spec);
    if (ds.classes == 0) ds.classes = 1;
    write_records(output, ds);
    const Image& first = ds.images.front();
    log << "wrote " << ds.size() << " records of " << first.channels() << "x" << first.height() << "x"
        << first.width() << " to " << output.string() << "\n";
    return kExitOk;
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
}

}  // namespace lapgan
