#pragma once

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tanktune/csv.hpp"
#include "tanktune/nn.hpp"
#include "tanktune/pid.hpp"
#include "tanktune/rewards_metrics.hpp"

namespace tanktune {

double softplus(double x);      // ln(1 + e^x)
double softplus_inv(double k);  // ln(e^k - 1), k > 0
double sigmoid(double x);
double logit(double p);  // p in (0,1)

// Trainable weights: kp/ki/kd live in softplus coordinates, ktau in sigmoid
// coordinates, so the controller gains stay positive (and ktau in (0,1)) for
// every parameter value.
struct ActorParams {
  double th_kp = 0.0;
  double th_ki = 0.0;
  double th_kd = 0.0;
  double th_ktau = 0.0;
};

// Throws std::invalid_argument("gain outside reparameterization domain") if
// kp/ki/kd <= 0 or ktau outside (0,1).
ActorParams gains_to_theta(const PidGains& gains);
PidGains theta_to_gains(const ActorParams& theta);

// Stacked observation history [o_{t-d}, ..., o_t], oldest first.
struct RlState {
  std::vector<Observation> obs;
};

struct Transition {
  RlState s;
  double u = 0.0;
  double r = 0.0;
  RlState s_next;
  bool terminal = false;
};

// Fixed-capacity ring with uniform sampling (without replacement inside a
// batch).
class ReplayMemory {
 public:
  ReplayMemory(std::size_t capacity, std::uint64_t seed);
  void add(Transition t);
  std::size_t size() const { return items_.size(); }
  std::vector<const Transition*> sample(std::size_t n);
  const std::vector<Transition>& data() const { return items_; }
  void clear();

 private:
  std::vector<Transition> items_;
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::mt19937_64 rng_;
};

struct Td3Config {
  double gamma = 0.99;
  double rho = 0.995;
  double sigma = 0.5;        // target-noise std, input units
  double noise_clip = 1.0;   // input units
  int policy_delay = 2;
  int batch_size = 64;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  int updates_per_round = 0;  // 0: one update per freshly ingested sample
  int history = 2;            // d
  double u_min = 0.0;
  double u_max = 100.0;
  bool use_inverting_gradients = false;
  std::size_t replay_capacity = 100000;
  int gru_hidden = 16;
  std::vector<int> head_hidden{64, 64};
  double control_dt = 1.0;  // sample time of the ingested process data
  double obs_t_f = 0.1;     // derivative filter used when rebuilding observations
};

void validate(const Td3Config& cfg);

// The PID policy applied to the newest observation; no saturation here, the
// plant-side controller clips.
double actor_forward(const ActorParams& theta, const RlState& s);

// d(u_hat)/d(theta): observation components times the softplus/sigmoid
// slopes.
Eigen::Vector4d actor_gradient_basis(const ActorParams& theta, const RlState& s);

// Constraint-aware scaling of dQ/du. Outside [u_min, u_max] the sign flips,
// steering updates back toward the feasible range.
double invert_gradient(double g, double u, double u_min, double u_max);

// Twin-critic body: GRU over the observation sequence, hidden state joined
// with the action into a dense head. Inputs are scaled by fixed constants so
// the gates operate in their linear region.
struct CriticNet {
  GruCell gru;
  DenseNet head;
  Eigen::VectorXd obs_scale;  // 5 entries
  double u_scale = 100.0;
};

CriticNet make_critic(const Td3Config& cfg, std::mt19937_64& rng);

struct CriticTape {
  std::vector<GruTape> steps;
  std::vector<Eigen::VectorXd> h;  // h_0 ... h_T
  DenseTape head;
};

double critic_forward(const CriticNet& net, const RlState& s, double u,
                      CriticTape* tape = nullptr);

struct CriticGrads {
  GruGrads gru;
  DenseGrads head;
  void set_zero();
};
CriticGrads make_grads(const CriticNet& net);

// Accumulates parameter gradients; returns dQ/du (in raw input units).
double critic_backward(const CriticNet& net, const CriticTape& tape, double gq,
                       CriticGrads& grads);

Eigen::VectorXd flatten(const CriticNet& net);
void unflatten(CriticNet& net, const Eigen::VectorXd& flat);
Eigen::VectorXd flatten_grads(const CriticNet& net, const CriticGrads& grads);

// Rebuilds replay transitions from logged process rows. Episodes are cut on
// episode_id changes and on time gaps larger than 1.5*dt; the last transition
// of each episode is terminal. Rows replay through the same observation
// recursion the live controller uses.
std::vector<Transition> build_transitions(const std::vector<ProcessRow>& rows,
                                          const RewardSpec& reward, int history,
                                          double dt, double t_f);

struct TrainRoundStats {
  int critic_updates = 0;
  int actor_updates = 0;
  double critic_loss = 0.0;  // mean over the round
  double mean_q = 0.0;
  bool aborted = false;
  std::string note;
};

class Td3Trainer {
 public:
  Td3Trainer(const Td3Config& cfg, const PidGains& initial_gains, std::uint64_t seed);

  std::size_t ingest_rows(const std::vector<ProcessRow>& rows, const RewardSpec& reward);
  std::size_t ingest_file(const std::string& path, const RewardSpec& reward);
  // Consumes process CSVs not seen before, in lexicographic order.
  std::size_t ingest_directory(const std::string& dir, const RewardSpec& reward);

  // updates = 0 uses one update per sample ingested since the last round.
  TrainRoundStats train_round(int updates = 0);

  PidGains gains() const { return theta_to_gains(theta_); }
  const ActorParams& theta() const { return theta_; }
  const ActorParams& theta_target() const { return theta_target_; }
  void set_theta(const ActorParams& theta);

  double target_action(const RlState& s_next);
  double critic_update(const std::vector<const Transition*>& batch);
  bool actor_update(const std::vector<const Transition*>& batch);
  void polyak_all();

  const CriticNet& q1() const { return q1_; }
  const CriticNet& q2() const { return q2_; }
  const CriticNet& q1_target() const { return q1_target_; }
  const CriticNet& q2_target() const { return q2_target_; }

  ReplayMemory& replay() { return replay_; }
  const Td3Config& config() const { return cfg_; }

  void save_checkpoint(const std::string& path, bool include_replay = false) const;
  void load_checkpoint(const std::string& path);

 private:
  Td3Config cfg_;
  ActorParams theta_, theta_target_;
  CriticNet q1_, q2_, q1_target_, q2_target_;
  AdamState opt_actor_, opt_q1_, opt_q2_;
  ReplayMemory replay_;
  std::mt19937_64 rng_;
  std::set<std::string> consumed_;
  int pending_ = 0;
  long round_counter_ = 0;
};

}  // namespace tanktune
