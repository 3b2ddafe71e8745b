#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "lapgan/errors.hpp"
#include "lapgan/serialization.hpp"

using namespace lapgan;

namespace {

NetworkSpec small_spec() {
  return {{2, 4, 4}, {1, 4, 4}, 3,
          {LayerSpec::concat_condition(), LayerSpec::class_embed(), LayerSpec::conv(4, 3, 1, 1), LayerSpec::relu(),
           LayerSpec::reshape({64}), LayerSpec::dropout(0.25), LayerSpec::dense(1), LayerSpec::sigmoid()}};
}

}  // namespace

TEST_CASE("network specs survive a JSON round trip") {
  const NetworkSpec spec = small_spec();
  const nlohmann::json j = spec;
  CHECK(j.get<NetworkSpec>() == spec);

  const SgdSchedule sched{0.01, 1.001, 0.4, 0.001, 0.9};
  CHECK(nlohmann::json(sched).get<SgdSchedule>() == sched);

  const SizeSchedule sizes{{{28, 28}, {14, 14}, {8, 8}}};
  CHECK(nlohmann::json(sizes).get<SizeSchedule>() == sizes);
}

TEST_CASE("container round trip preserves networks bit for bit") {
  Network<float> net(small_spec(), 99);
  net.set_mode(Mode::eval);
  Container c;
  c.metadata["epoch"] = 7;
  add_network(c, "generator", net);

  const auto bytes = encode_container(c);
  CHECK(std::string(bytes.data(), 4) == "LPG1");
  const Container back = decode_container(bytes);
  CHECK(back.metadata["epoch"] == 7);
  const Network<float> restored = extract_network(back, "generator");
  CHECK(restored.spec() == net.spec());
  CHECK(restored.mode() == Mode::eval);
  for (std::size_t l = 0; l < net.layer_count(); ++l) CHECK(restored.parameters(l) == net.parameters(l));
  CHECK(encode_container(back) == bytes);
}

TEST_CASE("tensor groups round trip through a file") {
  const auto path = std::filesystem::temp_directory_path() / "lapgan_container_test.lpg";
  Container c;
  add_tensors(c, "velocity", {{Tensor({2, 2}, {1, 2, 3, 4})}, {}, {Tensor({1}, {-0.5f}), Tensor({3}, 2.f)}});
  write_container(path, c);
  const auto groups = extract_tensors(read_container(path), "velocity");
  REQUIRE(groups.size() == 3);
  CHECK(groups[0][0].values() == std::vector<float>{1, 2, 3, 4});
  CHECK(groups[1].empty());
  CHECK(groups[2][1].shape() == Shape{3});
  std::filesystem::remove(path);
}

TEST_CASE("malformed containers report a byte offset") {
  Container c;
  c.blocks.push_back({"w", Tensor({4}, 1.f)});
  auto bytes = encode_container(c);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_container(truncated), CorruptData);

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  try {
    decode_container(bad_magic);
    FAIL("expected CorruptData");
  } catch (const CorruptData& e) {
    CHECK(e.offset() == 0);
  }

  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_container(trailing), CorruptData);

  const std::vector<char> garbage(40, '\x7f');
  CHECK_THROWS_AS(decode_container(garbage), CorruptData);
}
