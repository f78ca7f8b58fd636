#include <benchmark/benchmark.h>

#include "pitchcal/batch.hpp"

using namespace pitchcal;

namespace {

constexpr int kFrames = 32;

const std::vector<SyntheticFrame>& frames() {
  static const std::vector<SyntheticFrame> f = [] {
    SyntheticScenario s;
    s.seed = 2024;
    s.noise_sigma_px = 1.0;
    s.min_visible_keypoints = 8;
    return synthesize_frames(s, kFrames, standard_pitch(), Execution::serial);
  }();
  return f;
}

std::vector<Detections> detections() {
  std::vector<Detections> d;
  for (const auto& f : frames()) d.push_back(f.detections);
  return d;
}

void BM_Calibrate(benchmark::State& state, Execution execution) {
  const auto d = detections();
  for (auto _ : state) benchmark::DoNotOptimize(calibrate_frames(d, VoterConfig{}, standard_pitch(), execution));
  state.SetItemsProcessed(state.iterations() * kFrames);
}

void BM_Derive(benchmark::State& state, Execution execution) {
  std::vector<Annotation> a;
  for (const auto& f : frames()) a.push_back(f.annotation);
  for (auto _ : state) benchmark::DoNotOptimize(derive_frames(a, DeriveOptions{}, standard_pitch(), execution));
  state.SetItemsProcessed(state.iterations() * kFrames);
}

void BM_Evaluate(benchmark::State& state, Execution execution) {
  std::vector<std::optional<CameraParams>> cams;
  std::vector<Annotation> a;
  for (const auto& f : frames()) {
    cams.push_back(f.camera);
    a.push_back(f.annotation);
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(evaluate_frames(cams, a, {5.0, 10.0, 20.0}, standard_pitch(), execution).reports());
  state.SetItemsProcessed(state.iterations() * kFrames);
}

void BM_Synthesize(benchmark::State& state, Execution execution) {
  SyntheticScenario s;
  s.min_visible_keypoints = 8;
  for (auto _ : state) benchmark::DoNotOptimize(synthesize_frames(s, kFrames, standard_pitch(), execution));
  state.SetItemsProcessed(state.iterations() * kFrames);
}

}  // namespace

BENCHMARK_CAPTURE(BM_Calibrate, serial, Execution::serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK_CAPTURE(BM_Calibrate, parallel, Execution::parallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK_CAPTURE(BM_Derive, serial, Execution::serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK_CAPTURE(BM_Derive, parallel, Execution::parallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK_CAPTURE(BM_Evaluate, serial, Execution::serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK_CAPTURE(BM_Evaluate, parallel, Execution::parallel)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK_CAPTURE(BM_Synthesize, serial, Execution::serial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK_CAPTURE(BM_Synthesize, parallel, Execution::parallel)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
