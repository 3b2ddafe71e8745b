#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include <httplib.h>

#include "lapgan/eval_service.hpp"

using namespace lapgan;
using nlohmann::json;

namespace {

TrialRecord rec(const std::string& subject, Source s, int duration, Judgment r) {
  TrialRecord t;
  t.subject_id = subject;
  t.source = s;
  t.duration_ms = duration;
  t.response = r;
  return t;
}

EvalServiceConfig four_sources(std::uint64_t seed) {
  EvalServiceConfig c;
  for (Source s : {Source::real, Source::gan, Source::lapgan, Source::cc_lapgan})
    c.images[s] = {Image(1, 2, 2, 0.25f), Image(1, 2, 2, -0.5f)};
  c.seed = seed;
  return c;
}

const ResultCell& cell(const std::vector<ResultCell>& cells, Source s, int d) {
  const auto it = std::find_if(cells.begin(), cells.end(),
                               [&](const ResultCell& c) { return c.source == s && c.duration_ms == d; });
  REQUIRE(it != cells.end());
  return *it;
}

}  // namespace

TEST_CASE("two subjects at 0.75 and 0.25 give mean 0.5 and sigma 0.3536") {
  std::vector<TrialRecord> r;
  const Judgment a[4] = {Judgment::real, Judgment::real, Judgment::real, Judgment::generated};
  const Judgment b[4] = {Judgment::real, Judgment::generated, Judgment::generated, Judgment::generated};
  for (int i = 0; i < 4; ++i) {
    r.push_back(rec("a", Source::lapgan, 200, a[i]));
    r.push_back(rec("b", Source::lapgan, 200, b[i]));
  }
  const auto cells = aggregate_results(r);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].mean == doctest::Approx(0.5).epsilon(1e-15));
  REQUIRE(cells[0].sigma);
  CHECK(*cells[0].sigma == doctest::Approx(std::sqrt(0.125)).epsilon(1e-15));
  CHECK(*cells[0].sigma == doctest::Approx(0.3536).epsilon(1e-4));
}

TEST_CASE("all responses real give fraction 1 and sigma 0; one subject leaves sigma undefined") {
  std::vector<TrialRecord> r{rec("a", Source::gan, 50, Judgment::real), rec("b", Source::gan, 50, Judgment::real),
                             rec("a", Source::real, 2000, Judgment::real)};
  const auto cells = aggregate_results(r);
  CHECK(cell(cells, Source::gan, 50).mean == 1.0);
  CHECK(*cell(cells, Source::gan, 50).sigma == 0.0);
  CHECK_FALSE(cell(cells, Source::real, 2000).sigma.has_value());
}

TEST_CASE("three-subject fixture matches the hand computation") {
  // Two responses per subject per cell. Fractions of "real":
  //   (real,100):  A 1,   B 1/2, C 0    -> mean 1/2, sigma 1/2
  //   (real,1000): A 1,   B 1,   C 1    -> mean 1,   sigma 0
  //   (gan,100):   A 1/2, B 1/2, C 1    -> mean 2/3, sigma sqrt(1/12)
  //   (gan,1000):  A 0,   B 0,   C 1/2  -> mean 1/6, sigma sqrt(1/12)
  const auto R = Judgment::real, G = Judgment::generated;
  std::vector<TrialRecord> r;
  auto add = [&](const char* s, Source src, int d, Judgment x, Judgment y) {
    r.push_back(rec(s, src, d, x));
    r.push_back(rec(s, src, d, y));
  };
  add("A", Source::real, 100, R, R);
  add("B", Source::real, 100, R, G);
  add("C", Source::real, 100, G, G);
  add("A", Source::real, 1000, R, R);
  add("B", Source::real, 1000, R, R);
  add("C", Source::real, 1000, R, R);
  add("A", Source::gan, 100, G, R);
  add("B", Source::gan, 100, R, G);
  add("C", Source::gan, 100, R, R);
  add("A", Source::gan, 1000, G, G);
  add("B", Source::gan, 1000, G, G);
  add("C", Source::gan, 1000, G, R);

  const auto check_all = [](const std::vector<ResultCell>& cells) {
    REQUIRE(cells.size() == 4);
    CHECK(cell(cells, Source::real, 100).mean == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(*cell(cells, Source::real, 100).sigma == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(cell(cells, Source::real, 1000).mean == 1.0);
    CHECK(*cell(cells, Source::real, 1000).sigma == 0.0);
    CHECK(cell(cells, Source::gan, 100).mean == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(*cell(cells, Source::gan, 100).sigma == doctest::Approx(std::sqrt(1.0 / 12.0)).epsilon(1e-15));
    CHECK(cell(cells, Source::gan, 1000).mean == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
    CHECK(*cell(cells, Source::gan, 1000).sigma == doctest::Approx(std::sqrt(1.0 / 12.0)).epsilon(1e-15));
    for (const auto& c : cells) CHECK(c.subjects == 3);
  };
  const auto first = aggregate_results(r);
  check_all(first);

  // permutation invariance and idempotence
  std::mt19937 g(4);
  for (int t = 0; t < 5; ++t) {
    std::shuffle(r.begin(), r.end(), g);
    const auto again = aggregate_results(r);
    check_all(again);
    CHECK(results_to_json(again) == results_to_json(first));
  }
}

TEST_CASE("served sources are uniform and every duration appears") {
  EvalService service(four_sources(17));
  std::map<std::string, std::size_t> by_source;
  std::map<int, std::size_t> by_duration;
  const std::size_t n = 10000;
  for (std::size_t i = 0; i < n; ++i) {
    const json t = service.next_trial("s");
    CHECK_FALSE(t.contains("source"));
    ++by_duration[t["duration_ms"].get<int>()];
    const auto r = service.respond(t["trial_id"], Judgment::real, std::nullopt);
    ++by_source[to_string(r.source)];
    if (i == 999) {
      CHECK(by_duration.size() == kDefaultDurations.size());
    }
  }
  CHECK(by_source.size() == 4);
  for (const auto& [_, count] : by_source) CHECK(std::abs(static_cast<double>(count) / n - 0.25) <= 0.02);
  for (const auto& [d, _] : by_duration)
    CHECK(std::find(kDefaultDurations.begin(), kDefaultDurations.end(), d) != kDefaultDurations.end());
}

TEST_CASE("responses join the truth server side and reject unknown or repeated trials") {
  EvalServiceConfig c;
  c.images[Source::real] = {Image(3, 2, 2, 0.0f)};
  EvalService service(std::move(c));
  const json t = service.next_trial("x");
  const auto r = service.respond(t["trial_id"], Judgment::real, 312.5);
  CHECK(r.source == Source::real);
  CHECK(r.correct);
  CHECK(*r.reaction_ms == 312.5);
  CHECK(r.subject_id == "x");
  CHECK_THROWS_AS(service.respond(t["trial_id"], Judgment::real, std::nullopt), Conflict);
  CHECK_THROWS_AS(service.respond("feed", Judgment::real, std::nullopt), NotFound);
  CHECK(t["image"]["pixels"].size() == 12);
}

TEST_CASE("record log is append-only and reloaded on restart") {
  const auto path = std::filesystem::temp_directory_path() / ("lapgan_trials_" + std::to_string(::getpid()) + ".jsonl");
  std::filesystem::remove(path);
  std::string first_id;
  {
    EvalServiceConfig c = four_sources(1);
    c.record_log = path;
    EvalService s(std::move(c));
    first_id = s.next_trial("a")["trial_id"];
    s.respond(first_id, Judgment::generated, 100.0);
  }
  {
    EvalServiceConfig c = four_sources(2);
    c.record_log = path;
    EvalService s(std::move(c));
    CHECK(s.records().size() == 1);
    CHECK_THROWS_AS(s.respond(first_id, Judgment::real, std::nullopt), Conflict);
    s.respond(s.next_trial("b")["trial_id"], Judgment::real, std::nullopt);
  }
  const auto all = read_record_log(path);
  REQUIRE(all.size() == 2);
  CHECK(all[0].trial_id == first_id);
  CHECK(all[0].reaction_ms.value() == 100.0);
  std::filesystem::remove(path);
}

TEST_CASE("HTTP endpoints on an ephemeral port") {
  EvalService service(four_sources(9));
  httplib::Server server;
  mount_eval_routes(server, service);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client cli("127.0.0.1", port);
  auto trial = cli.Get("/trial?subject_id=s7");
  REQUIRE(trial);
  CHECK(trial->status == 200);
  const json t = json::parse(trial->body);
  CHECK_FALSE(t.contains("source"));
  CHECK(t.contains("mask"));
  const std::string body = json{{"trial_id", t["trial_id"]}, {"response", "real"}, {"reaction_ms", 250}}.dump();
  auto ok = cli.Post("/response", body, "application/json");
  REQUIRE(ok);
  CHECK(ok->status == 200);
  CHECK(json::parse(ok->body)["subject_id"] == "s7");
  auto dup = cli.Post("/response", body, "application/json");
  CHECK(dup->status == 409);
  auto missing = cli.Post("/response", R"({"trial_id":"nope","response":"real"})", "application/json");
  CHECK(missing->status == 404);
  auto bad = cli.Post("/response", R"({"trial_id":"nope","response":"maybe"})", "application/json");
  CHECK(bad->status == 400);
  auto results = cli.Get("/results");
  CHECK(json::parse(results->body)["cells"].size() == 1);
  auto exported = cli.Get("/export");
  CHECK(std::count(exported->body.begin(), exported->body.end(), '\n') == 1);
  CHECK(json::parse(exported->body.substr(0, exported->body.find('\n')))["source"].is_string());

  server.stop();
  th.join();
}
