#include <algorithm>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "lapgan/commands.hpp"
#include "lapgan/eval_service.hpp"
#include "lapgan/pnm.hpp"

namespace fs = std::filesystem;
using namespace lapgan;

namespace {

std::vector<Image> load_image_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InvalidArgument(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (ext == ".pnm" || ext == ".pgm" || ext == ".ppm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Image> out;
  for (const auto& f : files) out.push_back(read_pnm(f));
  if (out.empty()) throw InvalidArgument("no PNM images in " + dir.string());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Laplacian pyramid GAN toolkit"};
  app.require_subcommand(1);
  int status = kExitOk;

  // train
  auto* train = app.add_subcommand("train", "train every level of a cascade from a run config");
  std::string config_path;
  bool resume = false;
  train->add_option("config", config_path, "run config (JSON)")->required();
  train->add_flag("--resume", resume, "continue from existing checkpoints in the output directory");
  train->callback([&] {
    RunConfig config;
    try {
      config = load_run_config(config_path);
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      status = kExitInvalid;
      return;
    }
    status = cmd_train(config, std::cerr, resume);
  });

  // sample
  auto* sample = app.add_subcommand("sample", "draw images from a trained cascade");
  std::string manifest;
  SampleOptions so;
  std::string start, out_dir;
  int label = -1;
  sample->add_option("manifest", manifest, "manifest.json written by train")->required();
  sample->add_option("-n,--count", so.count, "number of samples")->default_val(1);
  sample->add_option("--seed", so.seed, "sampling seed")->default_val(0);
  sample->add_option("--start", start, "PNM image at the coarsest size to start from");
  sample->add_option("--label", label, "class label for class-conditional cascades");
  sample->add_flag("--trace", so.trace, "also write every intermediate level");
  sample->add_option("-o,--output", out_dir, "output directory")->required();
  sample->callback([&] {
    if (!start.empty()) so.start = start;
    if (label >= 0) so.label = label;
    so.output_dir = out_dir;
    status = cmd_sample(manifest, so, std::cerr);
  });

  // eval-ll
  auto* eval = app.add_subcommand("eval-ll", "Parzen log-likelihood of the test split, flat and multiscale");
  EvalOptions eo;
  std::string report;
  std::size_t max_test = 0, max_val = 0;
  eval->add_option("manifest", manifest, "manifest.json written by train")->required();
  eval->add_option("--samples", eo.n_model_samples, "model samples per estimate")->default_val(10000);
  eval->add_option("--sigma-grid", eo.sigma_grid, "candidate Parzen widths");
  eval->add_option("--seed", eo.seed, "seed for model samples")->default_val(0);
  eval->add_option("--max-test", max_test, "evaluate at most this many test images");
  eval->add_option("--max-validation", max_val, "use at most this many validation images");
  eval->add_option("--report", report, "also write the JSON report here");
  eval->callback([&] {
    if (max_test > 0) eo.max_test = max_test;
    if (max_val > 0) eo.max_validation = max_val;
    if (!report.empty()) eo.report = report;
    status = cmd_eval_ll(manifest, eo, std::cout);
  });

  // pyramid
  auto* pyramid = app.add_subcommand("pyramid", "Laplacian pyramid utilities");
  pyramid->require_subcommand(1);
  std::string in_path, out_path;
  std::size_t max_coarsest = 8;
  auto* build = pyramid->add_subcommand("build", "decompose a PNM image");
  build->add_option("image", in_path)->required();
  build->add_option("-o,--output", out_path)->required();
  build->add_option("--max-coarsest", max_coarsest, "largest side of the coarsest level")->default_val(8);
  build->callback([&] { status = cmd_pyramid_build(in_path, out_path, max_coarsest, std::cout); });
  auto* rec = pyramid->add_subcommand("reconstruct", "rebuild an image from a pyramid file");
  rec->add_option("pyramid", in_path)->required();
  rec->add_option("-o,--output", out_path)->required();
  rec->callback([&] { status = cmd_pyramid_reconstruct(in_path, out_path, std::cerr); });
  auto* check = pyramid->add_subcommand("check", "round-trip an image and report the error");
  check->add_option("image", in_path)->required();
  check->add_option("--max-coarsest", max_coarsest)->default_val(8);
  check->callback([&] { status = cmd_pyramid_check(in_path, max_coarsest, std::cout); });

  // serve-eval
  auto* serve = app.add_subcommand("serve-eval", "HTTP backend for the human evaluation");
  std::string host = "127.0.0.1", log_path;
  int port = 8080;
  std::vector<std::string> sources;
  EvalServiceConfig sc;
  float mask = 0.0f;
  serve->add_option("--host", host)->default_val("127.0.0.1");
  serve->add_option("--port", port)->default_val(8080);
  serve->add_option("--source", sources, "SOURCE=DIR with SOURCE one of real, gan, lapgan, cc-lapgan")
      ->delimiter(',')
      ->required();
  serve->add_option("--durations", sc.durations, "presentation durations in ms")->delimiter(',');
  serve->add_option("--mask-gray", mask, "mask level in [-1, 1]")->default_val(0.0f);
  serve->add_option("--seed", sc.seed, "trial draw seed")->default_val(0);
  serve->add_option("--log", log_path, "append-only JSONL record log")->default_val("trials.jsonl");
  serve->callback([&] {
    try {
      for (const auto& entry : sources) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos) throw InvalidArgument("--source expects SOURCE=DIR, got '" + entry + "'");
        sc.images[parse_source(entry.substr(0, eq))] = load_image_dir(entry.substr(eq + 1));
      }
      sc.mask_gray = mask;
      sc.record_log = log_path;
      EvalService service(std::move(sc));
      std::cerr << "serving on http://" << host << ":" << port << "\n";
      serve_eval(service, host, port);
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      status = kExitInvalid;
    }
  });

  // data synth
  auto* data = app.add_subcommand("data", "dataset utilities");
  data->require_subcommand(1);
  auto* synth = data->add_subcommand("synth", "write a synthetic dataset as binary records");
  SyntheticSpec spec;
  std::string kind = "multiscale-texture";
  std::size_t size = 16;
  synth->add_option("--kind", kind)->default_val("multiscale-texture");
  synth->add_option("--size", size, "square image side")->default_val(16);
  synth->add_option("--channels", spec.channels)->default_val(1);
  synth->add_option("--count", spec.count)->default_val(1000);
  synth->add_option("--seed", spec.seed)->default_val(0);
  synth->add_option("-o,--output", out_path)->required();
  synth->callback([&] {
    try {
      spec.kind = parse_synthetic_kind(kind);
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      status = kExitInvalid;
      return;
    }
    spec.size = {size, size};
    status = cmd_data_synth(spec, out_path, std::cerr);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }
  return status;
}
