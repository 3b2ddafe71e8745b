#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lapgan/errors.hpp"
#include "lapgan/image.hpp"
#include "lapgan/random.hpp"

namespace httplib {
class Server;
}

namespace lapgan {

enum class Source { real, gan, lapgan, cc_lapgan };
enum class Judgment { real, generated };

std::string to_string(Source s);
std::string to_string(Judgment j);
Source parse_source(const std::string& s);
Judgment parse_judgment(const std::string& s);

inline const std::vector<int> kDefaultDurations{50, 75, 100, 150, 200, 300, 450, 650, 1000, 1400, 2000};

struct TrialRecord {
  std::string trial_id;
  std::string subject_id;
  std::string image_id;
  Source source = Source::real;
  int duration_ms = 0;
  Judgment response = Judgment::real;
  bool correct = false;
  std::optional<double> reaction_ms;  // from stimulus onset
  std::int64_t timestamp_ms = 0;      // unix epoch
};

void to_json(nlohmann::json& j, const TrialRecord& r);
void from_json(const nlohmann::json& j, TrialRecord& r);

/// One (source, duration) cell: per-subject fractions of "real" answers,
/// their mean, and the sample standard deviation across subjects (absent
/// with fewer than two subjects).
struct ResultCell {
  Source source = Source::real;
  int duration_ms = 0;
  std::size_t subjects = 0;
  std::size_t responses = 0;
  double mean = 0.0;
  std::optional<double> sigma;
};

/// Cells are sorted by (source, duration). Order of the input is irrelevant.
std::vector<ResultCell> aggregate_results(std::span<const TrialRecord> records);
nlohmann::json results_to_json(const std::vector<ResultCell>& cells);

std::vector<TrialRecord> read_record_log(const std::filesystem::path& path);

class NotFound : public Error {
 public:
  using Error::Error;
};

class Conflict : public Error {
 public:
  using Error::Error;
};

struct EvalServiceConfig {
  std::map<Source, std::vector<Image>> images;  // every listed source needs at least one image
  std::vector<int> durations = kDefaultDurations;
  float mask_gray = 0.0f;  // in [-1, 1]; 0 is mid gray
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> record_log;
};

/// Trial bookkeeping behind the HTTP endpoints. Thread-safe.
class EvalService {
 public:
  explicit EvalService(EvalServiceConfig config);

  /// Draws a uniformly random (source, duration) pair and an image from that
  /// source. The payload never names the source.
  nlohmann::json next_trial(const std::string& subject_id);

  /// Throws NotFound for an unknown trial and Conflict when it was already answered.
  TrialRecord respond(const std::string& trial_id, Judgment response, std::optional<double> reaction_ms,
                      std::optional<std::string> subject_id = std::nullopt);

  std::vector<TrialRecord> records() const;
  nlohmann::json results() const;

 private:
  struct Pending {
    std::string subject_id;
    Source source;
    std::size_t image_index;
    int duration_ms;
    std::chrono::steady_clock::time_point served;
  };

  std::string new_trial_id();
  std::vector<TrialRecord> read_record_log_if_present() const;

  EvalServiceConfig config_;
  std::vector<Source> sources_;
  mutable std::mutex mutex_;
  Rng rng_;
  std::map<std::string, Pending> pending_;
  std::map<std::string, bool> answered_;
  std::vector<TrialRecord> records_;
  std::ofstream log_;
};

/// Registers GET /trial, POST /response, GET /results and GET /export.
void mount_eval_routes(httplib::Server& server, EvalService& service);

/// Blocks serving on host:port until the process ends.
void serve_eval(EvalService& service, const std::string& host, int port);

}  // namespace lapgan
