#include <benchmark/benchmark.h>

#include "dal/bcca.hpp"
#include "dal/losses.hpp"
#include "dal/trainer.hpp"

namespace {

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = state.range(0);
  dal::Rng rng(1);
  dal::Matrix a = rng.normal_matrix(n, n, 0.0, 1.0);
  dal::Matrix b = rng.normal_matrix(n, n, 0.0, 1.0);
  for (auto _ : state) {
    dal::Matrix c = dal::matmul(a, b);
    benchmark::DoNotOptimize(c.data().data());
  }
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128);

void BM_BccaForwardBackward(benchmark::State& state) {
  const std::size_t m = state.range(0);
  const std::size_t d = 32;
  dal::Rng rng(2);
  dal::CmmParams cmm = dal::CmmParams::init(d, rng);
  dal::Matrix x_id = rng.normal_matrix(m, d, 0.0, 1.0);
  dal::Matrix x_age = rng.normal_matrix(m, d, 0.0, 1.0);
  for (auto _ : state) {
    dal::BccaBatch batch = dal::cmm_forward(cmm, x_id, x_age, 1e-5);
    dal::BccaGrads g = dal::bcca_backward(batch);
    dal::CmmGrads cg = dal::cmm_backward(cmm, x_id, x_age, g.grad_v_id, g.grad_v_age);
    benchmark::DoNotOptimize(cg.grad_w_id.data().data());
  }
}
BENCHMARK(BM_BccaForwardBackward)->Arg(64)->Arg(512);

void BM_CosFace(benchmark::State& state) {
  const std::size_t n = state.range(0);
  dal::Rng rng(3);
  dal::Matrix x = rng.normal_matrix(n, 32, 0.0, 1.0);
  dal::Matrix w = rng.normal_matrix(32, 160, 0.0, 1.0);
  std::vector<std::size_t> labels(n);
  for (auto& l : labels) l = rng.uniform_index(160);
  dal::CosFaceConfig cfg;
  for (auto _ : state) {
    dal::CosFaceCache cache;
    double loss = dal::cosface_forward(x, w, labels, cfg, &cache);
    dal::CosFaceGrads g = dal::cosface_backward(x, w, cache);
    benchmark::DoNotOptimize(loss);
    benchmark::DoNotOptimize(g.grad_x_id.data().data());
  }
}
BENCHMARK(BM_CosFace)->Arg(64);

void BM_MinStep(benchmark::State& state) {
  dal::TrainConfig cfg;
  cfg.model.d_in = 64;
  cfg.finalize();
  dal::Rng rng(4);
  dal::FactorModel model = dal::FactorModel::init(cfg.model, 160, rng);
  dal::CmmParams cmm = dal::CmmParams::init(cfg.model.d_feat, rng);
  dal::Matrix inputs = rng.normal_matrix(64, 64, 0.0, 1.0);
  std::vector<std::size_t> id_labels(64), age_labels(64);
  for (auto& l : id_labels) l = rng.uniform_index(160);
  for (auto& l : age_labels) l = rng.uniform_index(8);
  for (auto _ : state) {
    dal::StepMetrics m = dal::train_step_min(model, cmm, inputs, id_labels, age_labels, cfg,
                                             1e-6);
    benchmark::DoNotOptimize(m.loss.total);
  }
}
BENCHMARK(BM_MinStep);

}  // namespace

BENCHMARK_MAIN();
