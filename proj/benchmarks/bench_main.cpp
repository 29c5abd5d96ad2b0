#include <benchmark/benchmark.h>

#include <random>

#include "tanktune/plant.hpp"
#include "tanktune/td3.hpp"

using namespace tanktune;

static void PlantStep(benchmark::State& state) {
  const PlantParams params;
  PlantState s = steady_state_for_pump(3.5, params);
  for (auto _ : state) {
    step_plant(s, 4.0, params, 0.1);
    benchmark::DoNotOptimize(s.level);
  }
}
BENCHMARK(PlantStep);

static void ClosedLoopInterval(benchmark::State& state) {
  const PlantParams params;
  const double f0 = steady_flow_for_level(60.0, params);
  PlantState s = steady_state_for_flow(f0, params, 0.1);
  FlowLoop flow = make_flow_loop(0.1, s.p);
  PidState level_state = make_pid_state(0.1, 1.0, f0);
  const PidGains gains{4.0, 4.0 / 60.0, 0.04, 0.5};
  for (auto _ : state) {
    closed_loop_step(s, 65.0, gains, level_state, flow, params, 0.0, 100.0, 1.0, 0.1);
    benchmark::DoNotOptimize(s.measured_level);
  }
}
BENCHMARK(ClosedLoopInterval);

static void CriticForwardBackward(benchmark::State& state) {
  Td3Config cfg;
  std::mt19937_64 rng(1);
  CriticNet critic = make_critic(cfg, rng);
  RlState s;
  s.obs.resize(cfg.history + 1);
  for (auto& o : s.obs) o = Observation{0.5, 0.2, -0.1, 0.0, 35.0};
  CriticGrads grads = make_grads(critic);
  CriticTape tape;
  for (auto _ : state) {
    const double q = critic_forward(critic, s, 35.0, &tape);
    grads.set_zero();
    critic_backward(critic, tape, 1.0, grads);
    benchmark::DoNotOptimize(q);
  }
}
BENCHMARK(CriticForwardBackward);

static void TrainRound(benchmark::State& state) {
  Td3Config cfg;
  cfg.batch_size = 64;
  Td3Trainer trainer(cfg, PidGains{4.0, 4.0 / 60.0, 0.04, 0.5}, 9);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int i = 0; i < 512; ++i) {
    Transition t;
    t.s.obs.resize(cfg.history + 1);
    t.s_next.obs.resize(cfg.history + 1);
    for (auto& o : t.s.obs) o = Observation{dist(rng), dist(rng), dist(rng), 0.0, 35.0};
    for (auto& o : t.s_next.obs)
      o = Observation{dist(rng), dist(rng), dist(rng), 0.0, 35.0};
    t.u = 35.0 + dist(rng);
    t.r = -std::abs(dist(rng));
    trainer.replay().add(t);
  }
  for (auto _ : state) {
    const TrainRoundStats stats = trainer.train_round(4);
    benchmark::DoNotOptimize(stats.critic_loss);
  }
}
BENCHMARK(TrainRound);

BENCHMARK_MAIN();
