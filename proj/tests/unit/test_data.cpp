#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "lapgan/dataset.hpp"
#include "lapgan/errors.hpp"
#include "lapgan/random.hpp"
#include "lapgan/synthetic.hpp"

using namespace lapgan;

namespace {

std::vector<std::uint8_t> cifar_record(std::uint8_t label, std::uint8_t fill) {
  std::vector<std::uint8_t> rec(kCifarLayout.record_bytes(), fill);
  rec[0] = label;
  return rec;
}

Dataset numbered(std::size_t n) {
  Dataset ds;
  ds.classes = 1000;
  for (std::size_t i = 0; i < n; ++i) {
    ds.images.emplace_back(1, 1, 1, static_cast<float>(i));
    ds.labels.push_back(static_cast<int>(i));
  }
  return ds;
}

}  // namespace

TEST_CASE("cifar records decode to [-1, 1] with labels") {
  auto bytes = cifar_record(3, 255);
  const auto zeros = cifar_record(0, 0);
  bytes.insert(bytes.end(), zeros.begin(), zeros.end());
  const Dataset ds = decode_records(bytes, kCifarLayout);
  REQUIRE(ds.size() == 2);
  CHECK(ds.labels == std::vector<int>{3, 0});
  CHECK(ds.images[0].channels() == 3);
  CHECK(ds.images[0].extent() == Extent{32, 32});
  for (float v : ds.images[0].values()) CHECK(v == 1.0f);
  for (float v : ds.images[1].values()) CHECK(v == -1.0f);
}

TEST_CASE("hand-built fixture file decodes to exact tensors") {
  const RecordLayout tiny{1, 2, 2, 10};
  const std::vector<std::uint8_t> bytes{7, 0, 51, 204, 255, 1, 255, 0, 127, 128};
  const auto path = std::filesystem::temp_directory_path() / "lapgan_fixture.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  const Dataset ds = load_records(path, tiny);
  std::filesystem::remove(path);
  REQUIRE(ds.size() == 2);
  CHECK(ds.labels == std::vector<int>{7, 1});
  CHECK(ds.images[0].values() == std::vector<float>{-1.0f, static_cast<float>(51 / 127.5 - 1),
                                                    static_cast<float>(204 / 127.5 - 1), 1.0f});
  CHECK(ds.images[1].values() == std::vector<float>{1.0f, -1.0f, static_cast<float>(127 / 127.5 - 1),
                                                    static_cast<float>(128 / 127.5 - 1)});
}

TEST_CASE("normalization round trips every byte") {
  for (int b = 0; b < 256; ++b) CHECK(unit_to_byte(byte_to_unit(static_cast<std::uint8_t>(b))) == b);
}

TEST_CASE("malformed record files are rejected with offsets") {
  auto bytes = cifar_record(1, 9);
  bytes.resize(bytes.size() + 100, 0);
  try {
    decode_records(bytes, kCifarLayout);
    FAIL("expected CorruptData");
  } catch (const CorruptData& e) {
    CHECK(e.offset() == kCifarLayout.record_bytes());
  }

  auto bad_label = cifar_record(1, 0);
  const auto second = cifar_record(10, 0);
  bad_label.insert(bad_label.end(), second.begin(), second.end());
  try {
    decode_records(bad_label, kCifarLayout);
    FAIL("expected CorruptData");
  } catch (const CorruptData& e) {
    CHECK(e.offset() == kCifarLayout.record_bytes());
  }

  Rng rng(4);
  const RecordLayout tiny{1, 2, 2, 10};
  for (int t = 0; t < 200; ++t) {
    std::vector<std::uint8_t> junk(rng() % 40);
    for (auto& b : junk) b = static_cast<std::uint8_t>(rng());
    try {
      decode_records(junk, tiny);
    } catch (const CorruptData&) {
    }
  }
}

TEST_CASE("records written from a dataset load back identically") {
  Dataset ds = synthesize({SyntheticKind::gaussian_blobs, {8, 8}, 3, 5, 9});
  ds.classes = 10;
  ds.labels = {0, 1, 2, 3, 9};
  for (auto& img : ds.images)
    for (auto& v : img.values()) v = byte_to_unit(unit_to_byte(v));
  const Dataset back = decode_records(encode_records(ds), {3, 8, 8, 10});
  CHECK(back.labels == ds.labels);
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(back.images[i] == ds.images[i]);
}

TEST_CASE("four-corner crops") {
  Dataset ds;
  ds.classes = 3;
  std::vector<float> v(16);
  for (int i = 0; i < 16; ++i) v[i] = static_cast<float>(i);
  ds.images.emplace_back(1, 4, 4, v);
  ds.labels = {2};
  const Dataset out = crop_augment(ds, {3, 3});
  REQUIRE(out.size() == 4);
  CHECK(out.labels == std::vector<int>{2, 2, 2, 2});
  CHECK(out.images[0].values() == std::vector<float>{0, 1, 2, 4, 5, 6, 8, 9, 10});
  CHECK(out.images[1].values() == std::vector<float>{1, 2, 3, 5, 6, 7, 9, 10, 11});
  CHECK(out.images[2].values() == std::vector<float>{4, 5, 6, 8, 9, 10, 12, 13, 14});
  CHECK(out.images[3].values() == std::vector<float>{5, 6, 7, 9, 10, 11, 13, 14, 15});

  const Dataset full = crop_augment(ds, {4, 4});
  for (const auto& img : full.images) CHECK(img == ds.images[0]);

  Dataset hundred = synthesize({SyntheticKind::gaussian_blobs, {32, 32}, 3, 100, 1});
  const Dataset cropped = crop_augment(hundred, {28, 28});
  CHECK(cropped.size() == 400);
  CHECK(cropped.extent() == Extent{28, 28});
  for (const auto& img : cropped.images)
    for (float x : img.values()) CHECK((x >= -1.0f && x <= 1.0f));

  CHECK_THROWS_AS(crop_augment(ds, {5, 3}), InvalidArgument);
  const Dataset random = crop_augment(ds, {3, 3}, CropMode::random, 5);
  CHECK(random.size() == 4);
}

TEST_CASE("split sizes, disjointness and determinism") {
  const Dataset ds = numbered(100);
  const std::vector<double> f{0.8, 0.1, 0.1};
  const Splits s = split(ds, f, 3);
  CHECK(s.train.size() == 80);
  CHECK(s.validation.size() == 10);
  CHECK(s.test.size() == 10);
  std::set<int> seen;
  for (const auto* part : {&s.train, &s.validation, &s.test})
    for (int l : part->labels) CHECK(seen.insert(l).second);
  CHECK(seen.size() == 100);

  const Splits again = split(ds, f, 3);
  CHECK(again.train.labels == s.train.labels);
  CHECK(split(ds, f, 4).train.labels != s.train.labels);

  const std::vector<double> all{1.0};
  CHECK(split(ds, all, 0).train.size() == 100);
  const std::vector<double> too_much{0.8, 0.3};
  CHECK_THROWS_AS(split(ds, too_much, 0), InvalidArgument);
}

TEST_CASE("synthetic datasets are deterministic") {
  for (auto kind : {SyntheticKind::multiscale_texture, SyntheticKind::gaussian_blobs, SyntheticKind::two_mode_mixture}) {
    SyntheticSpec spec{kind, {16, 16}, 1, 20, 77};
    const Dataset a = synthesize(spec), b = synthesize(spec);
    CHECK(a.images == b.images);
    CHECK(a.labels == b.labels);
    spec.seed = 78;
    CHECK(synthesize(spec).images != a.images);
  }
}

TEST_CASE("two-mode mixture centroids") {
  SyntheticSpec spec{SyntheticKind::two_mode_mixture, {1, 1}, 2, 10000, 5};
  const Dataset ds = synthesize(spec);
  double sum[2][2] = {}, n[2] = {};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int m = ds.labels[i];
    n[m] += 1;
    for (int d = 0; d < 2; ++d) sum[m][d] += ds.images[i].values()[d];
  }
  for (int m = 0; m < 2; ++m)
    for (int d = 0; d < 2; ++d) CHECK(std::abs(sum[m][d] / n[m] - spec.centers[m][d]) < 0.05);
}

TEST_CASE("multiscale texture hits its per-level band energy") {
  SyntheticSpec spec{SyntheticKind::multiscale_texture, {16, 16}, 1, 500, 2};
  const Dataset ds = synthesize(spec);
  const SizeSchedule schedule = SizeSchedule::automatic({16, 16});
  const auto measured = band_rms(ds, schedule);
  const auto target = default_band_rms(schedule.levels.size());
  REQUIRE(measured.size() == target.size());
  for (std::size_t k = 0; k < target.size(); ++k) {
    INFO("level " << k << " measured " << measured[k] << " target " << target[k]);
    CHECK(std::abs(measured[k] / target[k] - 1.0) < 0.2);
  }

  spec.size = {32, 32};
  spec.count = 200;
  spec.band_rms = {0.1, 0.2, 0.35};
  const auto m32 = band_rms(synthesize(spec), SizeSchedule::automatic({32, 32}));
  for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(m32[k] / spec.band_rms[k] - 1.0) < 0.2);
}
