#include "tanktune/td3.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <stdexcept>

#include "tanktune/checkpoint.hpp"

namespace tanktune {

double softplus(double x) {
  if (x > 30.0) return x;
  return std::log1p(std::exp(x));
}

double softplus_inv(double k) {
  if (k <= 0.0) throw std::invalid_argument("softplus_inv: k must be positive");
  if (k > 30.0) return k;
  return k + std::log1p(-std::exp(-k));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("logit: p must be in (0,1)");
  return std::log(p / (1.0 - p));
}

ActorParams gains_to_theta(const PidGains& gains) {
  if (gains.kp <= 0.0 || gains.ki <= 0.0 || gains.kd <= 0.0 || gains.ktau <= 0.0 ||
      gains.ktau >= 1.0)
    throw std::invalid_argument("gain outside reparameterization domain");
  ActorParams theta;
  theta.th_kp = softplus_inv(gains.kp);
  theta.th_ki = softplus_inv(gains.ki);
  theta.th_kd = softplus_inv(gains.kd);
  theta.th_ktau = logit(gains.ktau);
  return theta;
}

PidGains theta_to_gains(const ActorParams& theta) {
  PidGains gains;
  gains.kp = softplus(theta.th_kp);
  gains.ki = softplus(theta.th_ki);
  gains.kd = softplus(theta.th_kd);
  gains.ktau = sigmoid(theta.th_ktau);
  return gains;
}

ReplayMemory::ReplayMemory(std::size_t capacity, std::uint64_t seed)
    : capacity_(capacity), rng_(seed) {
  if (capacity_ == 0) throw std::invalid_argument("replay: capacity must be positive");
}

void ReplayMemory::add(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[cursor_] = std::move(t);
  }
  cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayMemory::sample(std::size_t n) {
  if (n == 0 || items_.empty())
    throw std::invalid_argument("replay: cannot sample from empty memory");
  n = std::min(n, items_.size());
  std::vector<const Transition*> out;
  out.reserve(n);
  std::vector<std::size_t> picked;
  picked.reserve(n);
  std::uniform_int_distribution<std::size_t> dist(0, items_.size() - 1);
  while (out.size() < n) {
    const std::size_t idx = dist(rng_);
    if (std::find(picked.begin(), picked.end(), idx) != picked.end()) continue;
    picked.push_back(idx);
    out.push_back(&items_[idx]);
  }
  return out;
}

void ReplayMemory::clear() {
  items_.clear();
  cursor_ = 0;
}

void validate(const Td3Config& cfg) {
  if (!(cfg.gamma > 0.0 && cfg.gamma <= 1.0))
    throw std::invalid_argument("td3: gamma must be in (0,1]");
  if (cfg.rho < 0.0 || cfg.rho > 1.0)
    throw std::invalid_argument("td3: rho must be in [0,1]");
  if (!(cfg.u_min < cfg.u_max))
    throw std::invalid_argument("td3: u_min must be below u_max");
  if (cfg.sigma < 0.0) throw std::invalid_argument("td3: sigma must be >= 0");
  if (cfg.policy_delay < 1) throw std::invalid_argument("td3: policy_delay must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("td3: batch_size must be >= 1");
  if (cfg.history < 0) throw std::invalid_argument("td3: history must be >= 0");
}

double actor_forward(const ActorParams& theta, const RlState& s) {
  if (s.obs.empty()) throw std::invalid_argument("actor_forward: empty state");
  const Observation& o = s.obs.back();
  const PidGains g = theta_to_gains(theta);
  return g.kp * o.d_e + g.ki * o.i_e + g.kd * o.neg_d2y + g.ktau * o.aw + o.u_prev;
}

Eigen::Vector4d actor_gradient_basis(const ActorParams& theta, const RlState& s) {
  if (s.obs.empty()) throw std::invalid_argument("actor_gradient_basis: empty state");
  const Observation& o = s.obs.back();
  const double sk = sigmoid(theta.th_ktau);
  Eigen::Vector4d g;
  g(0) = o.d_e * sigmoid(theta.th_kp);
  g(1) = o.i_e * sigmoid(theta.th_ki);
  g(2) = o.neg_d2y * sigmoid(theta.th_kd);
  g(3) = o.aw * sk * (1.0 - sk);
  return g;
}

double invert_gradient(double g, double u, double u_min, double u_max) {
  if (!(u_min < u_max)) throw std::invalid_argument("invert_gradient: bad bounds");
  const double span = u_max - u_min;
  return g > 0.0 ? g * (u_max - u) / span : g * (u - u_min) / span;
}

CriticNet make_critic(const Td3Config& cfg, std::mt19937_64& rng) {
  CriticNet net;
  net.gru = make_gru(5, cfg.gru_hidden, rng);
  std::vector<int> sizes{cfg.gru_hidden + 1};
  std::vector<Act> acts;
  for (int h : cfg.head_hidden) {
    sizes.push_back(h);
    acts.push_back(Act::Relu);
  }
  sizes.push_back(1);
  acts.push_back(Act::Identity);
  net.head = make_dense(sizes, acts, rng);
  net.obs_scale = Eigen::VectorXd(5);
  net.obs_scale << 0.2, 0.2, 1.0, 0.2, 0.01;
  net.u_scale = 100.0;
  return net;
}

namespace {

Eigen::VectorXd scaled_obs(const CriticNet& net, const Observation& o) {
  Eigen::VectorXd x(5);
  x << o.d_e, o.i_e, o.neg_d2y, o.aw, o.u_prev;
  return x.cwiseProduct(net.obs_scale);
}

}  // namespace

double critic_forward(const CriticNet& net, const RlState& s, double u,
                      CriticTape* tape) {
  if (s.obs.empty()) throw std::invalid_argument("critic_forward: empty state");
  Eigen::VectorXd h = Eigen::VectorXd::Zero(net.gru.hidden);
  if (tape) {
    tape->steps.assign(s.obs.size(), GruTape{});
    tape->h.clear();
    tape->h.push_back(h);
  }
  for (std::size_t i = 0; i < s.obs.size(); ++i) {
    h = gru_forward(net.gru, h, scaled_obs(net, s.obs[i]), tape ? &tape->steps[i] : nullptr);
    if (tape) tape->h.push_back(h);
  }
  Eigen::VectorXd head_in(net.gru.hidden + 1);
  head_in.head(net.gru.hidden) = h;
  head_in(net.gru.hidden) = u / net.u_scale;
  const Eigen::VectorXd q = dense_forward(net.head, head_in, tape ? &tape->head : nullptr);
  return q(0);
}

void CriticGrads::set_zero() {
  gru.set_zero();
  head.set_zero();
}

CriticGrads make_grads(const CriticNet& net) {
  CriticGrads g;
  g.gru = make_grads(net.gru);
  g.head = make_grads(net.head);
  return g;
}

double critic_backward(const CriticNet& net, const CriticTape& tape, double gq,
                       CriticGrads& grads) {
  Eigen::VectorXd gy(1);
  gy(0) = gq;
  const Eigen::VectorXd d_head_in = dense_backward(net.head, tape.head, gy, grads.head);
  Eigen::VectorXd dh = d_head_in.head(net.gru.hidden);
  const double du_scaled = d_head_in(net.gru.hidden);
  for (std::size_t i = tape.steps.size(); i-- > 0;) {
    const GruBack back = gru_backward(net.gru, tape.steps[i], dh, grads.gru);
    dh = back.dh_prev;
  }
  return du_scaled / net.u_scale;
}

Eigen::VectorXd flatten(const CriticNet& net) {
  const Eigen::VectorXd a = flatten(net.gru);
  const Eigen::VectorXd b = flatten(net.head);
  Eigen::VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}

void unflatten(CriticNet& net, const Eigen::VectorXd& flat) {
  const Eigen::Index na = flatten(net.gru).size();
  unflatten(net.gru, flat.head(na));
  unflatten(net.head, flat.tail(flat.size() - na));
}

Eigen::VectorXd flatten_grads(const CriticNet& net, const CriticGrads& grads) {
  const Eigen::VectorXd a = flatten_grads(net.gru, grads.gru);
  const Eigen::VectorXd b = flatten_grads(net.head, grads.head);
  Eigen::VectorXd out(a.size() + b.size());
  out << a, b;
  return out;
}

std::vector<Transition> build_transitions(const std::vector<ProcessRow>& rows,
                                          const RewardSpec& reward, int history,
                                          double dt, double t_f) {
  if (history < 0) throw std::invalid_argument("build_transitions: history must be >= 0");
  std::vector<Transition> out;

  std::vector<std::vector<ProcessRow>> episodes;
  for (const ProcessRow& row : rows) {
    const bool fresh = episodes.empty() || row.episode_id != episodes.back().back().episode_id ||
                       row.t - episodes.back().back().t > 1.5 * dt;
    if (fresh) episodes.emplace_back();
    episodes.back().push_back(row);
  }

  const int d = history;
  for (const auto& ep : episodes) {
    const int n = static_cast<int>(ep.size());
    if (n < d + 3) continue;
    PidState scratch = make_pid_state(t_f, dt, ep[0].u);
    std::vector<Observation> obs(n);
    for (int i = 0; i < n; ++i) {
      obs[i] = compute_observation(scratch, ep[i].level_sp, ep[i].level);
      scratch.u_prev = ep[i].u;
      scratch.u_hat_prev = ep[i].u_hat;
    }
    for (int t = d + 1; t <= n - 2; ++t) {
      Transition tr;
      tr.s.obs.assign(obs.begin() + (t - d), obs.begin() + t + 1);
      tr.s_next.obs.assign(obs.begin() + (t + 1 - d), obs.begin() + t + 2);
      tr.u = ep[t].u;
      const double e_t = ep[t].level_sp - ep[t].level;
      const double du_t = ep[t].u - ep[t - 1].u;
      tr.r = -cost(reward, e_t, du_t);
      tr.terminal = t == n - 2;
      out.push_back(std::move(tr));
    }
  }
  return out;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 step
  std::uint64_t z = seed + stream * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

Td3Trainer::Td3Trainer(const Td3Config& cfg, const PidGains& initial_gains,
                       std::uint64_t seed)
    : cfg_(cfg),
      replay_(cfg.replay_capacity, mix_seed(seed, 1)),
      rng_(mix_seed(seed, 2)) {
  validate(cfg_);
  theta_ = gains_to_theta(initial_gains);
  theta_target_ = theta_;
  std::mt19937_64 rng_q1(mix_seed(seed, 3));
  std::mt19937_64 rng_q2(mix_seed(seed, 4));
  q1_ = make_critic(cfg_, rng_q1);
  q2_ = make_critic(cfg_, rng_q2);
  q1_target_ = q1_;
  q2_target_ = q2_;
  const Eigen::Index n_critic = flatten(q1_).size();
  opt_actor_ = make_adam(cfg_.actor_lr, 4);
  opt_q1_ = make_adam(cfg_.critic_lr, n_critic);
  opt_q2_ = make_adam(cfg_.critic_lr, n_critic);
}

void Td3Trainer::set_theta(const ActorParams& theta) {
  theta_ = theta;
  theta_target_ = theta;
}

std::size_t Td3Trainer::ingest_rows(const std::vector<ProcessRow>& rows,
                                    const RewardSpec& reward) {
  const auto transitions =
      build_transitions(rows, reward, cfg_.history, cfg_.control_dt, cfg_.obs_t_f);
  for (const Transition& t : transitions) replay_.add(t);
  pending_ += static_cast<int>(transitions.size());
  return transitions.size();
}

std::size_t Td3Trainer::ingest_file(const std::string& path, const RewardSpec& reward) {
  consumed_.insert(std::filesystem::path(path).filename().string());
  return ingest_rows(read_process_csv(path), reward);
}

std::size_t Td3Trainer::ingest_directory(const std::string& dir, const RewardSpec& reward) {
  namespace fs = std::filesystem;
  std::vector<std::string> fresh;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    const std::string name = entry.path().filename().string();
    if (consumed_.count(name)) continue;
    fresh.push_back(entry.path().string());
  }
  std::sort(fresh.begin(), fresh.end());
  std::size_t total = 0;
  for (const std::string& path : fresh) total += ingest_file(path, reward);
  return total;
}

double Td3Trainer::target_action(const RlState& s_next) {
  double noise = 0.0;
  if (cfg_.sigma > 0.0) {
    std::normal_distribution<double> dist(0.0, cfg_.sigma);
    noise = std::clamp(dist(rng_), -cfg_.noise_clip, cfg_.noise_clip);
  }
  const double a = actor_forward(theta_target_, s_next) + noise;
  return std::clamp(a, cfg_.u_min, cfg_.u_max);
}

double Td3Trainer::critic_update(const std::vector<const Transition*>& batch) {
  if (batch.empty()) throw std::invalid_argument("critic_update: empty batch");
  const double n = static_cast<double>(batch.size());

  std::vector<double> targets(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& tr = *batch[i];
    double q_next = 0.0;
    if (!tr.terminal) {
      const double a = target_action(tr.s_next);
      q_next = std::min(critic_forward(q1_target_, tr.s_next, a),
                        critic_forward(q2_target_, tr.s_next, a));
    }
    targets[i] = tr.r + cfg_.gamma * q_next;
  }

  double loss_total = 0.0;
  for (CriticNet* critic : {&q1_, &q2_}) {
    CriticGrads grads = make_grads(*critic);
    CriticTape tape;
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Transition& tr = *batch[i];
      const double q = critic_forward(*critic, tr.s, tr.u, &tape);
      const double err = q - targets[i];
      loss += err * err / n;
      critic_backward(*critic, tape, 2.0 * err / n, grads);
    }
    if (!std::isfinite(loss)) return std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd params = flatten(*critic);
    AdamState& opt = critic == &q1_ ? opt_q1_ : opt_q2_;
    adam_step(params, flatten_grads(*critic, grads), opt);
    unflatten(*critic, params);
    loss_total += loss;
  }
  return loss_total / 2.0;
}

bool Td3Trainer::actor_update(const std::vector<const Transition*>& batch) {
  if (batch.empty()) throw std::invalid_argument("actor_update: empty batch");
  const double n = static_cast<double>(batch.size());
  Eigen::Vector4d g = Eigen::Vector4d::Zero();
  CriticGrads scratch = make_grads(q1_);
  CriticTape tape;
  for (const Transition* tr : batch) {
    const double u_a = actor_forward(theta_, tr->s);
    critic_forward(q1_, tr->s, u_a, &tape);
    scratch.set_zero();
    double du = critic_backward(q1_, tape, 1.0, scratch);
    if (cfg_.use_inverting_gradients)
      du = invert_gradient(du, u_a, cfg_.u_min, cfg_.u_max);
    g += actor_gradient_basis(theta_, tr->s) * du;
  }
  g /= n;
  if (!g.allFinite()) return false;

  Eigen::VectorXd params(4);
  params << theta_.th_kp, theta_.th_ki, theta_.th_kd, theta_.th_ktau;
  const Eigen::VectorXd ascent = -g;  // Adam minimizes
  adam_step(params, ascent, opt_actor_);
  theta_.th_kp = params(0);
  theta_.th_ki = params(1);
  theta_.th_kd = params(2);
  theta_.th_ktau = params(3);
  return true;
}

void Td3Trainer::polyak_all() {
  for (auto [target, online] : {std::pair{&q1_target_, &q1_}, std::pair{&q2_target_, &q2_}}) {
    Eigen::VectorXd t = flatten(*target);
    polyak(t, flatten(*online), cfg_.rho);
    unflatten(*target, t);
  }
  theta_target_.th_kp = cfg_.rho * theta_target_.th_kp + (1.0 - cfg_.rho) * theta_.th_kp;
  theta_target_.th_ki = cfg_.rho * theta_target_.th_ki + (1.0 - cfg_.rho) * theta_.th_ki;
  theta_target_.th_kd = cfg_.rho * theta_target_.th_kd + (1.0 - cfg_.rho) * theta_.th_kd;
  theta_target_.th_ktau =
      cfg_.rho * theta_target_.th_ktau + (1.0 - cfg_.rho) * theta_.th_ktau;
}

TrainRoundStats Td3Trainer::train_round(int updates) {
  TrainRoundStats stats;
  if (updates <= 0) updates = pending_;
  pending_ = 0;
  if (updates <= 0) return stats;
  if (replay_.size() < static_cast<std::size_t>(cfg_.batch_size)) {
    stats.note = "replay smaller than batch; skipped round";
    return stats;
  }

  double loss_sum = 0.0;
  for (int j = 1; j <= updates; ++j) {
    const auto batch = replay_.sample(cfg_.batch_size);
    const double loss = critic_update(batch);
    if (!std::isfinite(loss)) {
      stats.aborted = true;
      stats.note = "non-finite critic loss; round aborted";
      return stats;
    }
    loss_sum += loss;
    ++stats.critic_updates;
    if (j % cfg_.policy_delay == 0) {
      if (!actor_update(batch)) stats.note = "non-finite actor gradient; update skipped";
      polyak_all();
      ++stats.actor_updates;
    }
  }
  stats.critic_loss = loss_sum / stats.critic_updates;

  // Structural positivity: gains must stay in range after every round.
  const PidGains g = gains();
  if (!(g.kp > 0.0 && g.ki > 0.0 && g.kd > 0.0 && g.ktau > 0.0 && g.ktau < 1.0)) {
    stats.aborted = true;
    stats.note = "reparameterized gains left their range";
  }
  ++round_counter_;
  return stats;
}

namespace {

void put_actor(TensorStore& store, const std::string& name, const ActorParams& theta) {
  Eigen::VectorXd v(4);
  v << theta.th_kp, theta.th_ki, theta.th_kd, theta.th_ktau;
  store.put(name, v);
}

ActorParams get_actor(const TensorStore& store, const std::string& name) {
  const Eigen::VectorXd v = store.get(name, 4);
  return ActorParams{v(0), v(1), v(2), v(3)};
}

void put_adam(TensorStore& store, const std::string& prefix, const AdamState& s) {
  store.put_scalar(prefix + ".t", static_cast<double>(s.t));
  store.put(prefix + ".m", s.m);
  store.put(prefix + ".v", s.v);
}

void get_adam(const TensorStore& store, const std::string& prefix, AdamState& s) {
  s.t = static_cast<long>(store.get_scalar(prefix + ".t"));
  s.m = store.get(prefix + ".m", s.m.size());
  s.v = store.get(prefix + ".v", s.v.size());
}

}  // namespace

void Td3Trainer::save_checkpoint(const std::string& path, bool include_replay) const {
  TensorStore store;
  put_actor(store, "theta", theta_);
  put_actor(store, "theta_target", theta_target_);
  store.put("q1", flatten(q1_));
  store.put("q2", flatten(q2_));
  store.put("q1_target", flatten(q1_target_));
  store.put("q2_target", flatten(q2_target_));
  put_adam(store, "adam_actor", opt_actor_);
  put_adam(store, "adam_q1", opt_q1_);
  put_adam(store, "adam_q2", opt_q2_);
  if (include_replay) {
    const auto& items = replay_.data();
    const int d = cfg_.history;
    const Eigen::Index per = 5 * (d + 1);
    Eigen::VectorXd blob(static_cast<Eigen::Index>(items.size()) * (2 * per + 3));
    Eigen::Index at = 0;
    auto pack_state = [&](const RlState& s) {
      for (const Observation& o : s.obs) {
        blob(at++) = o.d_e;
        blob(at++) = o.i_e;
        blob(at++) = o.neg_d2y;
        blob(at++) = o.aw;
        blob(at++) = o.u_prev;
      }
    };
    for (const Transition& t : items) {
      pack_state(t.s);
      pack_state(t.s_next);
      blob(at++) = t.u;
      blob(at++) = t.r;
      blob(at++) = t.terminal ? 1.0 : 0.0;
    }
    store.put("replay", blob);
  }
  store.save(path);
}

void Td3Trainer::load_checkpoint(const std::string& path) {
  TensorStore store;
  store.load(path);
  theta_ = get_actor(store, "theta");
  theta_target_ = get_actor(store, "theta_target");
  const Eigen::Index n_critic = flatten(q1_).size();
  unflatten(q1_, store.get("q1", n_critic));
  unflatten(q2_, store.get("q2", n_critic));
  unflatten(q1_target_, store.get("q1_target", n_critic));
  unflatten(q2_target_, store.get("q2_target", n_critic));
  get_adam(store, "adam_actor", opt_actor_);
  get_adam(store, "adam_q1", opt_q1_);
  get_adam(store, "adam_q2", opt_q2_);
  if (store.has("replay")) {
    const int d = cfg_.history;
    const Eigen::Index per = 5 * (d + 1);
    const Eigen::VectorXd blob = store.get_any("replay");
    const Eigen::Index stride = 2 * per + 3;
    replay_.clear();
    Eigen::Index at = 0;
    while (at + stride <= blob.size()) {
      Transition t;
      auto unpack_state = [&](RlState& s) {
        s.obs.resize(d + 1);
        for (Observation& o : s.obs) {
          o.d_e = blob(at++);
          o.i_e = blob(at++);
          o.neg_d2y = blob(at++);
          o.aw = blob(at++);
          o.u_prev = blob(at++);
        }
      };
      unpack_state(t.s);
      unpack_state(t.s_next);
      t.u = blob(at++);
      t.r = blob(at++);
      t.terminal = blob(at++) != 0.0;
      replay_.add(std::move(t));
    }
  }
}

}  // namespace tanktune
