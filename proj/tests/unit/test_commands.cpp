#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "lapgan/commands.hpp"
#include "lapgan/pnm.hpp"
#include "lapgan/serialization.hpp"

using namespace lapgan;
using namespace std::string_literals;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("lapgan_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

RunConfig smoke_config(const fs::path& out) {
  RunConfig c;
  c.data.kind = DataSource::Kind::synthetic;
  c.data.synthetic.kind = SyntheticKind::multiscale_texture;
  c.data.synthetic.size = {16, 16};
  c.data.synthetic.count = 120;
  c.data.synthetic.seed = 11;
  c.max_coarsest = 4;
  c.arch.noise_dim = 8;
  c.arch.final_g_hidden = 32;
  c.arch.final_d_hidden = 16;
  c.arch.conv_channels = 4;
  c.train.iterations = 200;
  c.train.batch_size = 8;
  c.train.checkpoint_every = 100;
  c.train.seed = 21;
  c.output_dir = out;
  return c;
}

}  // namespace

TEST_CASE("pnm round trip is exact at byte precision") {
  Rng rng(3);
  for (std::size_t channels : {1u, 3u}) {
    Image img(channels, 5, 7);
    for (auto& v : img.values()) v = byte_to_unit(static_cast<std::uint8_t>(rng() % 256));
    const auto bytes = encode_pnm(img);
    CHECK(bytes[0] == 'P');
    CHECK(bytes[1] == (channels == 1 ? '5' : '6'));
    const Image back = decode_pnm(bytes);
    CHECK(back.channels() == channels);
    CHECK(max_abs_difference(back, img) == 0.0);
  }
}

TEST_CASE("pnm decoder skips comments and rejects bad input") {
  const std::string ok = "P5\n# comment\n2 1\n255\n\x00\xff"s;
  const Image img = decode_pnm(std::span(ok.data(), ok.size()));
  CHECK(img.at(0, 0, 0) == doctest::Approx(-1.0));
  CHECK(img.at(0, 0, 1) == doctest::Approx(1.0));
  const std::string truncated = "P5\n2 2\n255\n\x00"s;
  CHECK_THROWS_AS(decode_pnm(std::span(truncated.data(), truncated.size())), CorruptData);
  const std::string wide = "P5\n1 1\n65535\n\x00\x00"s;
  CHECK_THROWS_AS(decode_pnm(std::span(wide.data(), wide.size())), CorruptData);
  const std::string magic = "P3\n1 1\n255\n0";
  CHECK_THROWS_AS(decode_pnm(std::span(magic.data(), magic.size())), CorruptData);
}

TEST_CASE("run config survives a JSON round trip") {
  RunConfig c = smoke_config("out");
  c.class_conditional = true;
  c.data.crop = Extent{12, 12};
  c.schedule = SizeSchedule{{{16, 16}, {8, 8}}};
  c.levels = {1};
  c.train.loss = GeneratorLoss::minimax;
  const nlohmann::json j = c;
  const RunConfig back = j.get<RunConfig>();
  CHECK(nlohmann::json(back) == j);
  CHECK(back.train.loss == GeneratorLoss::minimax);
  CHECK(back.schedule->levels.size() == 2);
}

TEST_CASE("run config rejects contract violations before training") {
  RunConfig c = smoke_config("");
  CHECK_THROWS_AS(c.validate(), InvalidArgument);  // no output dir
  c = smoke_config("out");
  c.train.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = smoke_config("out");
  c.data.split = {0.5, 0.6, 0.1};
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("smoke training writes a manifest and K+1 checkpoints, bit-identical on rerun") {
  TempDir tmp("train");
  std::ostringstream log;
  REQUIRE(cmd_train(smoke_config(tmp.path / "a"), log) == kExitOk);
  REQUIRE(cmd_train(smoke_config(tmp.path / "b"), log) == kExitOk);
  const Manifest m = read_manifest(tmp.path / "a" / "manifest.json");
  const std::size_t K = m.schedule.band_levels();
  CHECK(K == 2);
  CHECK(m.checkpoints.size() == K + 1);
  for (std::size_t k = 0; k <= K; ++k) {
    CHECK(m.trained[k]);
    const auto a = slurp(tmp.path / "a" / m.checkpoints[k]);
    const auto b = slurp(tmp.path / "b" / m.checkpoints[k]);
    CHECK(!a.empty());
    CHECK(a == b);
  }
  CHECK(fs::exists(tmp.path / "a" / "telemetry.jsonl"));
  CHECK(fs::exists(tmp.path / "a" / "config.json"));
  CHECK(load_run_config(tmp.path / "a" / "config.json").train.seed == 21);
}

TEST_CASE("resumed training matches an uninterrupted run") {
  TempDir tmp("resume");
  std::ostringstream log;
  RunConfig full = smoke_config(tmp.path / "full");
  REQUIRE(cmd_train(full, log) == kExitOk);
  RunConfig half = smoke_config(tmp.path / "half");
  half.train.iterations = 100;
  REQUIRE(cmd_train(half, log) == kExitOk);
  half.train.iterations = 200;
  REQUIRE(cmd_train(half, log, true) == kExitOk);
  for (std::size_t k = 0; k < 3; ++k) {
    const std::string name = "level_" + std::to_string(k) + ".lpg";
    CHECK(slurp(tmp.path / "full" / name) == slurp(tmp.path / "half" / name));
  }
}

TEST_CASE("parallel level training equals sequential training") {
  TempDir tmp("parallel");
  std::ostringstream log;
  RunConfig seq = smoke_config(tmp.path / "seq");
  seq.train.iterations = 40;
  RunConfig par = seq;
  par.output_dir = tmp.path / "par";
  par.parallel_levels = true;
  REQUIRE(cmd_train(seq, log) == kExitOk);
  REQUIRE(cmd_train(par, log) == kExitOk);
  for (std::size_t k = 0; k < 3; ++k) {
    const std::string name = "level_" + std::to_string(k) + ".lpg";
    CHECK(slurp(tmp.path / "seq" / name) == slurp(tmp.path / "par" / name));
  }
}

TEST_CASE("invalid input exits with 2 and writes nothing") {
  TempDir tmp("invalid");
  std::ostringstream log;
  RunConfig c = smoke_config(tmp.path / "missing");
  c.data.kind = DataSource::Kind::records;
  c.data.path = tmp.path / "does_not_exist.bin";
  CHECK(cmd_train(c, log) == kExitInvalid);
  CHECK_FALSE(fs::exists(tmp.path / "missing"));
  CHECK(log.str().find("error") != std::string::npos);

  c = smoke_config(tmp.path / "bad");
  c.train.iterations = 0;
  CHECK(cmd_train(c, log) == kExitInvalid);
  CHECK_FALSE(fs::exists(tmp.path / "bad"));
}

TEST_CASE("divergence exits with 3 and keeps a checkpoint") {
  TempDir tmp("diverge");
  std::ostringstream log;
  RunConfig c = smoke_config(tmp.path / "run");
  c.train.schedule.lr0 = 1e30;
  CHECK(cmd_train(c, log) == kExitDiverged);
  CHECK(fs::exists(tmp.path / "run" / "level_0.lpg"));
  const Manifest m = read_manifest(tmp.path / "run" / "manifest.json");
  CHECK_FALSE(m.trained[0]);
}

TEST_CASE("sampling writes images, traces and reproduces byte for byte") {
  TempDir tmp("sample");
  std::ostringstream log;
  RunConfig c = smoke_config(tmp.path / "run");
  c.train.iterations = 20;
  REQUIRE(cmd_train(c, log) == kExitOk);
  const fs::path manifest = tmp.path / "run" / "manifest.json";

  SampleOptions o;
  o.count = 4;
  o.trace = true;
  o.seed = 5;
  o.output_dir = tmp.path / "s1";
  REQUIRE(cmd_sample(manifest, o, log) == kExitOk);
  std::size_t finals = 0, traces = 0;
  for (const auto& e : fs::directory_iterator(o.output_dir))
    (e.path().filename().string().find("_level_") != std::string::npos ? traces : finals)++;
  CHECK(finals == 4);
  CHECK(traces == 12);

  o.output_dir = tmp.path / "s2";
  REQUIRE(cmd_sample(manifest, o, log) == kExitOk);
  for (const auto& e : fs::directory_iterator(tmp.path / "s1"))
    CHECK(slurp(e.path()) == slurp(tmp.path / "s2" / e.path().filename()));

  // ten draws from one 4x4 start image are distinct
  Image start(1, 4, 4);
  for (std::size_t i = 0; i < start.size(); ++i) start.values()[i] = byte_to_unit(static_cast<std::uint8_t>(i * 16));
  write_pnm(tmp.path / "start.pnm", start);
  SampleOptions so;
  so.count = 10;
  so.start = tmp.path / "start.pnm";
  so.output_dir = tmp.path / "s3";
  REQUIRE(cmd_sample(manifest, so, log) == kExitOk);
  std::set<std::string> distinct;
  for (int i = 0; i < 10; ++i) distinct.insert(slurp(so.output_dir / ("sample_" + std::to_string(i) + ".pnm")));
  CHECK(distinct.size() == 10);

  fs::remove(tmp.path / "run" / "level_1.lpg");
  o.output_dir = tmp.path / "s4";
  CHECK(cmd_sample(manifest, o, log) == kExitInvalid);
}

TEST_CASE("eval-ll report: totals are sums of level terms and sigmas come from the grid") {
  TempDir tmp("eval");
  std::ostringstream log;
  RunConfig c = smoke_config(tmp.path / "run");
  c.train.iterations = 20;
  REQUIRE(cmd_train(c, log) == kExitOk);
  const fs::path manifest = tmp.path / "run" / "manifest.json";

  EvalOptions o;
  o.n_model_samples = 200;
  o.sigma_grid = {0.05, 0.1, 0.2, 0.4};
  o.max_test = 6;
  o.max_validation = 6;
  o.report = tmp.path / "report.json";
  std::ostringstream out;
  REQUIRE(cmd_eval_ll(manifest, o, out) == kExitOk);
  const auto report = nlohmann::json::parse(slurp(tmp.path / "report.json"));
  double total = 0.0;
  for (double t : report["multiscale"]["level_means"]) total += t;
  CHECK(report["multiscale"]["mean"].get<double>() == doctest::Approx(total).epsilon(1e-12));
  for (double s : report["multiscale"]["sigmas"])
    CHECK(std::find(o.sigma_grid.begin(), o.sigma_grid.end(), s) != o.sigma_grid.end());
  const double flat_sigma = report["flat"]["sigma"];
  CHECK(std::find(o.sigma_grid.begin(), o.sigma_grid.end(), flat_sigma) != o.sigma_grid.end());
  CHECK(report["n_test"] == 6);

  // an untrained level is refused
  Manifest m = read_manifest(manifest);
  m.trained[1] = false;
  write_manifest(manifest, m);
  CHECK(cmd_eval_ll(manifest, o, out) == kExitInvalid);
}

TEST_CASE("pyramid commands round trip through a container") {
  TempDir tmp("pyr");
  std::ostringstream log;
  Rng rng(8);
  Image img(3, 20, 12);
  for (auto& v : img.values()) v = byte_to_unit(static_cast<std::uint8_t>(rng() % 256));
  write_pnm(tmp.path / "in.pnm", img);
  CHECK(cmd_pyramid_check(tmp.path / "in.pnm", 4, log) == kExitOk);
  REQUIRE(cmd_pyramid_build(tmp.path / "in.pnm", tmp.path / "p.lpg", 4, log) == kExitOk);
  REQUIRE(cmd_pyramid_reconstruct(tmp.path / "p.lpg", tmp.path / "out.pnm", log) == kExitOk);
  CHECK(slurp(tmp.path / "in.pnm") == slurp(tmp.path / "out.pnm"));
  CHECK(cmd_pyramid_check(tmp.path / "nope.pnm", 4, log) == kExitInvalid);
}

TEST_CASE("data synth writes loadable records") {
  TempDir tmp("synth");
  std::ostringstream log;
  SyntheticSpec spec;
  spec.size = {8, 8};
  spec.count = 10;
  REQUIRE(cmd_data_synth(spec, tmp.path / "d.bin", log) == kExitOk);
  const Dataset ds = load_records(tmp.path / "d.bin", RecordLayout{1, 8, 8, 1});
  CHECK(ds.size() == 10);
}
