#include "lapgan/eval_service.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include <httplib.h>

#include "lapgan/dataset.hpp"

namespace lapgan {

using nlohmann::json;

std::string to_string(Source s) {
  switch (s) {
    case Source::real: return "real";
    case Source::gan: return "gan";
    case Source::lapgan: return "lapgan";
    case Source::cc_lapgan: return "cc-lapgan";
  }
  return "unknown";
}

std::string to_string(Judgment j) { return j == Judgment::real ? "real" : "generated"; }

Source parse_source(const std::string& s) {
  for (Source v : {Source::real, Source::gan, Source::lapgan, Source::cc_lapgan})
    if (to_string(v) == s) return v;
  throw InvalidArgument("unknown image source '" + s + "'");
}

Judgment parse_judgment(const std::string& s) {
  if (s == "real") return Judgment::real;
  if (s == "generated") return Judgment::generated;
  throw InvalidArgument("response must be 'real' or 'generated', got '" + s + "'");
}

void to_json(json& j, const TrialRecord& r) {
  j = json{{"trial_id", r.trial_id},
           {"subject_id", r.subject_id},
           {"image_id", r.image_id},
           {"source", to_string(r.source)},
           {"duration_ms", r.duration_ms},
           {"response", to_string(r.response)},
           {"correct", r.correct},
           {"reaction_ms", r.reaction_ms ? json(*r.reaction_ms) : json(nullptr)},
           {"timestamp", r.timestamp_ms}};
}

void from_json(const json& j, TrialRecord& r) {
  r.trial_id = j.value("trial_id", "");
  r.subject_id = j.at("subject_id").get<std::string>();
  r.image_id = j.value("image_id", "");
  r.source = parse_source(j.at("source").get<std::string>());
  r.duration_ms = j.at("duration_ms").get<int>();
  r.response = parse_judgment(j.at("response").get<std::string>());
  r.correct = j.value("correct", (r.source == Source::real) == (r.response == Judgment::real));
  if (j.contains("reaction_ms") && !j["reaction_ms"].is_null()) r.reaction_ms = j["reaction_ms"].get<double>();
  r.timestamp_ms = j.value("timestamp", std::int64_t{0});
}

std::vector<ResultCell> aggregate_results(std::span<const TrialRecord> records) {
  // (source, duration) -> subject -> (real answers, total)
  std::map<std::pair<Source, int>, std::map<std::string, std::pair<std::size_t, std::size_t>>> tally;
  for (const auto& r : records) {
    auto& t = tally[{r.source, r.duration_ms}][r.subject_id];
    t.first += r.response == Judgment::real;
    ++t.second;
  }
  std::vector<ResultCell> cells;
  for (const auto& [key, subjects] : tally) {
    ResultCell c{key.first, key.second, subjects.size(), 0, 0.0, std::nullopt};
    std::vector<double> fractions;
    for (const auto& [_, t] : subjects) {
      fractions.push_back(static_cast<double>(t.first) / static_cast<double>(t.second));
      c.responses += t.second;
    }
    for (double f : fractions) c.mean += f;
    c.mean /= static_cast<double>(fractions.size());
    if (fractions.size() >= 2) {
      double ss = 0.0;
      for (double f : fractions) ss += (f - c.mean) * (f - c.mean);
      c.sigma = std::sqrt(ss / static_cast<double>(fractions.size() - 1));
    }
    cells.push_back(c);
  }
  return cells;
}

json results_to_json(const std::vector<ResultCell>& cells) {
  json out = json::array();
  for (const auto& c : cells)
    out.push_back({{"source", to_string(c.source)},
                   {"duration_ms", c.duration_ms},
                   {"subjects", c.subjects},
                   {"responses", c.responses},
                   {"fraction_real", c.mean},
                   {"sigma", c.sigma ? json(*c.sigma) : json(nullptr)}});
  return out;
}

std::vector<TrialRecord> read_record_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open record log " + path.string());
  std::vector<TrialRecord> out;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) {
      try {
        out.push_back(json::parse(line).get<TrialRecord>());
      } catch (const json::exception& e) {
        throw CorruptData(std::string("bad record: ") + e.what(), offset);
      }
    }
    offset += line.size() + 1;
  }
  return out;
}

EvalService::EvalService(EvalServiceConfig config) : config_(std::move(config)), rng_(config_.seed) {
  if (config_.durations.empty()) throw InvalidArgument("at least one duration is required");
  for (int d : config_.durations)
    if (d <= 0) throw InvalidArgument("durations must be positive");
  for (const auto& [source, images] : config_.images) {
    if (images.empty()) throw InvalidArgument("source '" + to_string(source) + "' has no images");
    sources_.push_back(source);
  }
  if (sources_.empty()) throw InvalidArgument("at least one image source is required");
  if (config_.record_log) {
    for (auto& r : read_record_log_if_present()) {
      answered_[r.trial_id] = true;
      records_.push_back(std::move(r));
    }
    log_.open(*config_.record_log, std::ios::app);
    if (!log_) throw InvalidArgument("cannot open record log " + config_.record_log->string());
  }
}

std::vector<TrialRecord> EvalService::read_record_log_if_present() const {
  if (!config_.record_log || !std::filesystem::exists(*config_.record_log)) return {};
  return read_record_log(*config_.record_log);
}

std::string EvalService::new_trial_id() {
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng_()),
                static_cast<unsigned long long>(rng_()));
  return buf;
}

json EvalService::next_trial(const std::string& subject_id) {
  std::lock_guard lock(mutex_);
  const Source source = sources_[std::uniform_int_distribution<std::size_t>(0, sources_.size() - 1)(rng_)];
  const int duration =
      config_.durations[std::uniform_int_distribution<std::size_t>(0, config_.durations.size() - 1)(rng_)];
  const auto& pool = config_.images.at(source);
  const std::size_t index = std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng_);
  std::string id = new_trial_id();
  while (pending_.count(id) || answered_.count(id)) id = new_trial_id();
  pending_[id] = Pending{subject_id, source, index, duration, std::chrono::steady_clock::now()};

  const Image& img = pool[index];
  std::vector<int> pixels(img.size());
  std::transform(img.values().begin(), img.values().end(), pixels.begin(),
                 [](float v) { return static_cast<int>(unit_to_byte(v)); });
  return json{{"trial_id", id},
              {"duration_ms", duration},
              {"image",
               {{"width", img.width()},
                {"height", img.height()},
                {"channels", img.channels()},
                {"layout", "planar"},
                {"pixels", pixels}}},
              {"mask", {{"gray", static_cast<int>(unit_to_byte(config_.mask_gray))}}}};
}

TrialRecord EvalService::respond(const std::string& trial_id, Judgment response, std::optional<double> reaction_ms,
                                 std::optional<std::string> subject_id) {
  std::lock_guard lock(mutex_);
  if (answered_.count(trial_id)) throw Conflict("trial " + trial_id + " already has a response");
  const auto it = pending_.find(trial_id);
  if (it == pending_.end()) throw NotFound("unknown trial " + trial_id);
  const Pending p = it->second;
  pending_.erase(it);
  answered_[trial_id] = true;

  TrialRecord r;
  r.trial_id = trial_id;
  r.subject_id = subject_id.value_or(p.subject_id);
  r.image_id = to_string(p.source) + "/" + std::to_string(p.image_index);
  r.source = p.source;
  r.duration_ms = p.duration_ms;
  r.response = response;
  r.correct = (p.source == Source::real) == (response == Judgment::real);
  r.reaction_ms = reaction_ms;
  r.timestamp_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::system_clock::now().time_since_epoch())
                       .count();
  if (log_.is_open()) {
    log_ << json(r).dump() << '\n';
    log_.flush();
  }
  records_.push_back(r);
  return r;
}

std::vector<TrialRecord> EvalService::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

json EvalService::results() const {
  const auto snapshot = records();
  return json{{"cells", results_to_json(aggregate_results(snapshot))}, {"records", snapshot.size()}};
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, json{{"error", message}});
}

}  // namespace

void mount_eval_routes(httplib::Server& server, EvalService& service) {
  server.Get("/trial", [&service](const httplib::Request& req, httplib::Response& res) {
    const std::string subject = req.has_param("subject_id") ? req.get_param_value("subject_id") : "anonymous";
    send_json(res, 200, service.next_trial(subject));
  });
  server.Post("/response", [&service](const httplib::Request& req, httplib::Response& res) {
    try {
      const json body = json::parse(req.body);
      std::optional<double> reaction;
      if (body.contains("reaction_ms") && !body["reaction_ms"].is_null()) reaction = body["reaction_ms"].get<double>();
      std::optional<std::string> subject;
      if (body.contains("subject_id")) subject = body["subject_id"].get<std::string>();
      const TrialRecord r = service.respond(body.at("trial_id").get<std::string>(),
                                            parse_judgment(body.at("response").get<std::string>()), reaction, subject);
      send_json(res, 200, json(r));
    } catch (const NotFound& e) {
      send_error(res, 404, e.what());
    } catch (const Conflict& e) {
      send_error(res, 409, e.what());
    } catch (const InvalidArgument& e) {
      send_error(res, 400, e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, e.what());
    }
  });
  server.Get("/results", [&service](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, service.results());
  });
  server.Get("/export", [&service](const httplib::Request&, httplib::Response& res) {
    std::string body;
    for (const auto& r : service.records()) body += json(r).dump() + "\n";
    res.status = 200;
    res.set_content(body, "application/x-ndjson");
  });
}

void serve_eval(EvalService& service, const std::string& host, int port) {
  httplib::Server server;
  mount_eval_routes(server, service);
  if (!server.listen(host, port)) throw InvalidArgument("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace lapgan
