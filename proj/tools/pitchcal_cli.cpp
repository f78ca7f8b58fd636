#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pitchcal/batch.hpp"
#include "pitchcal/errors.hpp"
#include "pitchcal/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;

struct Options {
  std::string input;
  std::string output;
  std::string config;
  std::optional<std::uint64_t> seed;
  int jobs = 0;
  std::vector<double> thresholds;
};

void add_common(CLI::App* cmd, Options& o, bool needs_input) {
  auto* in = cmd->add_option("--input,-i", o.input, "Input directory");
  if (needs_input) in->required();
  cmd->add_option("--output,-o", o.output, "Output directory")->required();
  cmd->add_option("--config,-c", o.config, "JSON config file");
  cmd->add_option("--seed", o.seed, "Seed for synthesis and RANSAC");
  cmd->add_option("--jobs,-j", o.jobs, "Worker threads (0: all cores, 1: serial)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--threshold,-t", o.thresholds, "Evaluation thresholds in pixels")->delimiter(',');
}

void print_summary(const pitchcal::BatchSummary& s) {
  int ok = 0, none = 0, err = 0;
  for (const auto& r : s.records) {
    ok += r.status == "ok";
    none += r.status == "no_output";
    err += r.status == "error";
  }
  std::cout << pitchcal::mode_name(s.mode) << ": " << s.records.size() << " frames, " << ok << " ok, " << none
            << " without output, " << err << " errors\n";
  for (const auto& r : s.reports) {
    std::cout << "  t=" << r.threshold_px << " px  acc=";
    if (r.acc_at_t)
      std::cout << *r.acc_at_t;
    else
      std::cout << "n/a";
    std::cout << "  cr=" << r.completeness_ratio << "  score=" << r.score << '\n';
  }
  if (s.tuned_thresholds) {
    std::cout << "  tuned confidence thresholds:";
    for (double t : *s.tuned_thresholds) std::cout << ' ' << t;
    std::cout << '\n';
  }
  for (const auto& r : s.records)
    if (r.status == "error") std::cerr << "error: " << r.name << ": " << r.message << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Broadcast pitch camera calibration"};
  app.require_subcommand(1);
  Options o;
  struct Mode {
    const char* name;
    const char* help;
    pitchcal::RunMode mode;
  };
  const Mode modes[] = {
      {"derive", "Derive keypoints from marking annotations", pitchcal::RunMode::derive},
      {"calibrate", "Calibrate cameras from detections or annotations", pitchcal::RunMode::calibrate},
      {"evaluate", "Score camera files against annotations", pitchcal::RunMode::evaluate},
      {"synth", "Generate synthetic annotated frames", pitchcal::RunMode::synth},
      {"tune", "Grid-search the voter confidence thresholds", pitchcal::RunMode::tune},
  };
  for (const auto& m : modes) add_common(app.add_subcommand(m.name, m.help), o, m.mode != pitchcal::RunMode::synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  pitchcal::RunManifest manifest;
  for (const auto& m : modes)
    if (app.got_subcommand(m.name)) manifest.mode = m.mode;
  manifest.input_dir = o.input;
  manifest.output_dir = o.output;
  manifest.jobs = o.jobs;
  manifest.seed = o.seed;

  try {
    if (!o.config.empty()) manifest.config = pitchcal::read_config(o.config);
    if (!o.thresholds.empty()) manifest.config.thresholds = o.thresholds;
    const auto summary = pitchcal::run_batch(manifest);
    print_summary(summary);
    return kExitOk;
  } catch (const pitchcal::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const pitchcal::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}
