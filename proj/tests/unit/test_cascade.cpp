#include <doctest.h>

#include <limits>

#include "lapgan/cascade.hpp"
#include "lapgan/synthetic.hpp"

using namespace lapgan;

namespace {

ArchitectureConfig tiny_arch() {
  ArchitectureConfig a;
  a.noise_dim = 8;
  a.final_g_hidden = 16;
  a.final_d_hidden = 16;
  a.conv_channels = 4;
  return a;
}

void zero_generators(CascadeModel& c) {
  for (auto& lvl : c.levels)
    for (std::size_t l = 0; l < lvl->g.layer_count(); ++l)
      for (auto& p : lvl->g.mutable_parameters(l)) p.fill(0.0f);
}

bool same_parameters(const Network<float>& a, const Network<float>& b) {
  for (std::size_t l = 0; l < a.layer_count(); ++l)
    if (a.parameters(l) != b.parameters(l)) return false;
  return true;
}

TrainConfig quick_config(std::size_t iterations) {
  TrainConfig cfg;
  cfg.iterations = iterations;
  cfg.batch_size = 8;
  cfg.seed = 42;
  return cfg;
}

}  // namespace

TEST_CASE("default level specs satisfy the conditioning plumbing") {
  const SizeSchedule cifar{{{28, 28}, {14, 14}, {8, 8}}};
  for (std::size_t classes : {0u, 10u}) {
    for (std::size_t k = 0; k < 3; ++k) {
      const LevelSpec s = default_level_spec(cifar, k, 3, classes, tiny_arch());
      CHECK(s.is_final == (k == 2));
      CHECK(s.noise_kind == (k == 2 ? NoiseKind::vector : NoiseKind::plane));
      CHECK(s.size == cifar.levels[k]);
    }
  }
  LevelSpec bad = default_level_spec(cifar, 0, 3, 0, tiny_arch());
  bad.g_spec.layers.erase(bad.g_spec.layers.begin());  // drop the condition concat
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  LevelSpec bad_noise = default_level_spec(cifar, 2, 3, 0, tiny_arch());
  bad_noise.noise_kind = NoiseKind::plane;
  CHECK_THROWS_AS(bad_noise.validate(), InvalidArgument);
}

TEST_CASE("a K=3 cascade samples 64x64 from an 8x8 root through four generators") {
  const SizeSchedule s = SizeSchedule::automatic({64, 64});
  REQUIRE(s.band_levels() == 3);
  CascadeModel c = make_cascade(s, 1, 0, tiny_arch(), 1);
  Rng rng(3);
  const Sample out = sample(c, rng);
  CHECK(out.image.extent() == Extent{64, 64});
  REQUIRE(out.trace.steps.size() == 4);
  CHECK(out.trace.steps.front().image.extent() == Extent{8, 8});
  for (std::size_t i = 1; i < out.trace.steps.size(); ++i) {
    const auto& step = out.trace.steps[i];
    const Image rebuilt = upsample(out.trace.steps[i - 1].image, step.image.extent()) + step.h;
    CHECK(rebuilt == step.image);
  }

  zero_generators(c);
  const Sample zero = sample(c, rng);
  for (float v : zero.image.values()) CHECK(v == 0.0f);
}

TEST_CASE("start image with zero generators upsamples the start") {
  const SizeSchedule s{{{16, 16}, {8, 8}, {4, 4}}};
  CascadeModel c = make_cascade(s, 1, 0, tiny_arch(), 2);
  zero_generators(c);
  Rng data_rng(8);
  Image start(1, 4, 4);
  for (auto& v : start.values()) v = static_cast<float>(uniform_pm1(data_rng));
  Rng rng(1);
  const Sample out = sample(c, rng, start);
  CHECK(out.image == upsample(upsample(start, {8, 8}), {16, 16}));
  CHECK_THROWS_AS(sample(c, rng, Image(1, 8, 8)), InvalidArgument);
}

TEST_CASE("sampling is deterministic in the rng state and depends on it") {
  const SizeSchedule s{{{16, 16}, {8, 8}}};
  const CascadeModel c = make_cascade(s, 1, 0, tiny_arch(), 4);
  Rng a(10), b(10), other(11);
  const auto grid = sample_grid(c, 1, a);
  CHECK(grid.at(0).image == sample(c, b).image);
  CHECK(max_abs_difference(sample(c, a).image, sample(c, other).image) > 0.0);
  CHECK_THROWS_AS(sample_grid(c, 2, a, true), InvalidArgument);
}

TEST_CASE("class-conditional grid groups 10 classes x 10 samples") {
  const SizeSchedule s{{{8, 8}, {4, 4}}};
  const CascadeModel c = make_cascade(s, 1, 10, tiny_arch(), 5);
  Rng rng(2);
  const auto grid = sample_grid(c, 10, rng, true);
  REQUIRE(grid.size() == 100);
  for (std::size_t i = 0; i < grid.size(); ++i) CHECK(grid[i].label == static_cast<int>(i / 10));
}

TEST_CASE("missing levels are an invalid state") {
  const SizeSchedule s{{{8, 8}, {4, 4}}};
  CascadeModel c = make_cascade(s, 1, 0, tiny_arch(), 5);
  c.levels[0].reset();
  Rng rng(0);
  CHECK_THROWS_AS(sample(c, rng), InvalidState);
}

TEST_CASE("nearest neighbor") {
  Dataset two;
  two.images = {Image(1, 2, 2, 0.0f), Image(1, 2, 2, 1.0f)};
  CHECK(nearest_neighbor(Image(1, 2, 2, 0.1f), two).index == 0);

  const Dataset ds = synthesize({SyntheticKind::gaussian_blobs, {6, 6}, 1, 100, 3});
  CHECK(nearest_neighbor(ds.images[37], ds).index == 37);
  CHECK(nearest_neighbor(ds.images[37], ds).distance == 0.0);

  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    Image q(1, 6, 6);
    for (auto& v : q.values()) v = static_cast<float>(uniform_pm1(rng));
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ds.size(); ++i) {
      double d = 0;
      for (std::size_t j = 0; j < q.size(); ++j) {
        const double diff = double(q.values()[j]) - ds.images[i].values()[j];
        d += diff * diff;
      }
      if (d < best_d) best_d = d, best = i;
    }
    CHECK(nearest_neighbor(q, ds).index == best);
  }
  CHECK_THROWS_AS(nearest_neighbor(Image(1, 5, 5), ds), InvalidArgument);

  Dataset dup;
  dup.images = {Image(1, 1, 1, 1.0f), Image(1, 1, 1, -1.0f)};
  CHECK(nearest_neighbor(Image(1, 1, 1, 0.0f), dup).index == 0);
}

TEST_CASE("level data is the Laplacian coefficient and its conditioning image") {
  const Dataset ds = synthesize({SyntheticKind::multiscale_texture, {16, 16}, 1, 3, 1});
  const SizeSchedule s = SizeSchedule::automatic({16, 16});
  const LevelData d0 = prepare_level_data(ds, s, 0, false);
  const LevelData d1 = prepare_level_data(ds, s, 1, false);
  CHECK(d1.l.empty());
  const auto pyr = build_pyramid(ds.images[2], s);
  CHECK(unstack(d0.h, 2) == pyr.coeffs[0]);
  CHECK(unstack(d1.h, 2) == pyr.coeffs[1]);
  CHECK(unstack(d0.l, 2) == upsample(pyr.coeffs[1], {16, 16}));
  CHECK_THROWS_AS(prepare_level_data(ds, SizeSchedule::automatic({32, 32}), 0, false), InvalidArgument);
  CHECK_THROWS_AS(prepare_level_data(ds, s, 0, true), InvalidArgument);
}

TEST_CASE("levels train independently and deterministically") {
  const Dataset ds = synthesize({SyntheticKind::multiscale_texture, {16, 16}, 1, 32, 1});
  const SizeSchedule s = SizeSchedule::automatic({16, 16});
  const auto spec0 = default_level_spec(s, 0, 1, 0, tiny_arch());
  const auto spec1 = default_level_spec(s, 1, 1, 0, tiny_arch());

  const LevelModel a1 = train_level(1, ds, spec1, s, quick_config(15));
  const LevelModel a0 = train_level(0, ds, spec0, s, quick_config(15));
  const LevelModel b0 = train_level(0, ds, spec0, s, quick_config(15));
  const LevelModel b1 = train_level(1, ds, spec1, s, quick_config(15));
  CHECK(a0.trained);
  CHECK(a0.iteration == 15);
  CHECK(same_parameters(a0.g, b0.g));
  CHECK(same_parameters(a0.d, b0.d));
  CHECK(same_parameters(a1.g, b1.g));
  CHECK_FALSE(same_parameters(a0.g, init_level(spec0, derive_seed(42, 0)).g));

  CHECK_THROWS_AS(train_level(1, ds, spec0, s, quick_config(1)), InvalidArgument);
}

TEST_CASE("training resumes bit-exactly from a checkpoint container") {
  const Dataset ds = synthesize({SyntheticKind::multiscale_texture, {8, 8}, 1, 16, 4});
  const SizeSchedule s{{{8, 8}, {4, 4}}};
  const auto spec = default_level_spec(s, 0, 1, 0, tiny_arch());
  TrainConfig cfg = quick_config(12);
  cfg.checkpoint_every = 5;

  std::vector<char> saved;
  TrainCallbacks cb;
  cb.on_checkpoint = [&](const LevelModel& m) {
    if (m.iteration == 5) saved = encode_container(level_to_container(m));
  };
  const LevelModel full = train_level(0, ds, spec, s, cfg, cb);
  REQUIRE_FALSE(saved.empty());

  LevelModel resumed = level_from_container(decode_container(saved));
  CHECK(resumed.iteration == 5);
  CHECK_FALSE(resumed.trained);
  train_level(resumed, prepare_level_data(ds, s, 0, false), cfg);
  CHECK(same_parameters(resumed.g, full.g));
  CHECK(same_parameters(resumed.d, full.d));
  CHECK(encode_container(level_to_container(resumed)) == encode_container(level_to_container(full)));
}

TEST_CASE("divergence keeps the last good model") {
  const Dataset ds = synthesize({SyntheticKind::multiscale_texture, {8, 8}, 1, 16, 4});
  const SizeSchedule s{{{8, 8}, {4, 4}}};
  const auto spec = default_level_spec(s, 1, 1, 0, tiny_arch());
  TrainConfig cfg = quick_config(50);
  cfg.checkpoint_every = 1;
  cfg.schedule.lr0 = 1e30;
  try {
    train_level(1, ds, spec, s, cfg);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    const LevelModel& good = e.last_good();
    for (std::size_t l = 0; l < good.g.layer_count(); ++l)
      for (const auto& p : good.g.parameters(l)) CHECK(p.all_finite());
  }
}
