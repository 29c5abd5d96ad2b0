#include "tanktune/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace tanktune {

namespace {

double uniform_pm(std::mt19937_64& rng, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  return dist(rng);
}

void fill_uniform(Eigen::MatrixXd& m, std::mt19937_64& rng, double bound) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = uniform_pm(rng, bound);
}

void fill_uniform(Eigen::VectorXd& v, std::mt19937_64& rng, double bound) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = uniform_pm(rng, bound);
}

Eigen::VectorXd apply_act(Act a, const Eigen::VectorXd& x) {
  switch (a) {
    case Act::Identity: return x;
    case Act::Relu: return x.cwiseMax(0.0);
    case Act::Tanh: return x.array().tanh().matrix();
  }
  throw std::logic_error("nn: unhandled activation");
}

Eigen::VectorXd act_grad(Act a, const Eigen::VectorXd& pre, const Eigen::VectorXd& post,
                         const Eigen::VectorXd& g) {
  switch (a) {
    case Act::Identity: return g;
    case Act::Relu:
      return (pre.array() > 0.0).select(g.array(), 0.0).matrix();
    case Act::Tanh:
      return (g.array() * (1.0 - post.array().square())).matrix();
  }
  throw std::logic_error("nn: unhandled activation");
}

}  // namespace

DenseNet make_dense(const std::vector<int>& sizes, const std::vector<Act>& acts,
                    std::mt19937_64& rng) {
  if (sizes.size() < 2 || acts.size() != sizes.size() - 1)
    throw std::invalid_argument("make_dense: sizes/acts mismatch");
  DenseNet net;
  net.act = acts;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[i]));
    Eigen::MatrixXd w(sizes[i + 1], sizes[i]);
    Eigen::VectorXd b(sizes[i + 1]);
    fill_uniform(w, rng, bound);
    fill_uniform(b, rng, bound);
    net.w.push_back(std::move(w));
    net.b.push_back(std::move(b));
  }
  return net;
}

Eigen::VectorXd dense_forward(const DenseNet& net, const Eigen::VectorXd& x,
                              DenseTape* tape) {
  if (x.size() != net.input_size())
    throw std::invalid_argument("dense_forward: input dimension mismatch");
  Eigen::VectorXd h = x;
  if (tape) {
    tape->x = x;
    tape->pre.clear();
    tape->post.clear();
    tape->version = net.version;
  }
  for (std::size_t i = 0; i < net.w.size(); ++i) {
    Eigen::VectorXd pre = net.w[i] * h + net.b[i];
    Eigen::VectorXd post = apply_act(net.act[i], pre);
    if (tape) {
      tape->pre.push_back(pre);
      tape->post.push_back(post);
    }
    h = std::move(post);
  }
  return h;
}

void DenseGrads::set_zero() {
  for (auto& m : dw) m.setZero();
  for (auto& v : db) v.setZero();
}

DenseGrads make_grads(const DenseNet& net) {
  DenseGrads g;
  for (std::size_t i = 0; i < net.w.size(); ++i) {
    g.dw.emplace_back(Eigen::MatrixXd::Zero(net.w[i].rows(), net.w[i].cols()));
    g.db.emplace_back(Eigen::VectorXd::Zero(net.b[i].size()));
  }
  return g;
}

Eigen::VectorXd dense_backward(const DenseNet& net, const DenseTape& tape,
                               const Eigen::VectorXd& gy, DenseGrads& grads) {
  if (tape.version != net.version)
    throw std::logic_error("dense_backward: tape is stale, parameters changed");
  if (tape.pre.size() != net.w.size())
    throw std::logic_error("dense_backward: tape does not match network");
  Eigen::VectorXd g = gy;
  for (std::size_t ii = net.w.size(); ii-- > 0;) {
    const Eigen::VectorXd& input = ii == 0 ? tape.x : tape.post[ii - 1];
    const Eigen::VectorXd gpre = act_grad(net.act[ii], tape.pre[ii], tape.post[ii], g);
    grads.dw[ii] += gpre * input.transpose();
    grads.db[ii] += gpre;
    g = net.w[ii].transpose() * gpre;
  }
  return g;
}

GruCell make_gru(int in, int hidden, std::mt19937_64& rng) {
  if (in <= 0 || hidden <= 0) throw std::invalid_argument("make_gru: bad sizes");
  GruCell c;
  c.in = in;
  c.hidden = hidden;
  const double bound = 1.0 / std::sqrt(static_cast<double>(in + hidden));
  auto mk_w = [&]() {
    Eigen::MatrixXd m(hidden, in);
    fill_uniform(m, rng, bound);
    return m;
  };
  auto mk_u = [&]() {
    Eigen::MatrixXd m(hidden, hidden);
    fill_uniform(m, rng, bound);
    return m;
  };
  auto mk_b = [&]() {
    Eigen::VectorXd v(hidden);
    fill_uniform(v, rng, bound);
    return v;
  };
  c.wz = mk_w(); c.uz = mk_u(); c.bz = mk_b();
  c.wr = mk_w(); c.ur = mk_u(); c.br = mk_b();
  c.wh = mk_w(); c.uh = mk_u(); c.bh = mk_b();
  return c;
}

Eigen::VectorXd gru_forward(const GruCell& cell, const Eigen::VectorXd& h_prev,
                            const Eigen::VectorXd& x, GruTape* tape) {
  if (x.size() != cell.in || h_prev.size() != cell.hidden)
    throw std::invalid_argument("gru_forward: dimension mismatch");
  const Eigen::VectorXd z =
      (1.0 / (1.0 + (-(cell.wz * x + cell.uz * h_prev + cell.bz)).array().exp())).matrix();
  const Eigen::VectorXd r =
      (1.0 / (1.0 + (-(cell.wr * x + cell.ur * h_prev + cell.br)).array().exp())).matrix();
  const Eigen::VectorXd uh_h = cell.uh * h_prev;
  const Eigen::VectorXd n =
      (cell.wh * x + r.cwiseProduct(uh_h) + cell.bh).array().tanh().matrix();
  Eigen::VectorXd h = z.cwiseProduct(h_prev) + (Eigen::VectorXd::Ones(cell.hidden) - z).cwiseProduct(n);
  if (tape) {
    tape->x = x;
    tape->h_prev = h_prev;
    tape->z = z;
    tape->r = r;
    tape->n = n;
    tape->uh_h = uh_h;
    tape->version = cell.version;
  }
  return h;
}

void GruGrads::set_zero() {
  dwz.setZero(); duz.setZero(); dwr.setZero(); dur.setZero(); dwh.setZero(); duh.setZero();
  dbz.setZero(); dbr.setZero(); dbh.setZero();
}

GruGrads make_grads(const GruCell& cell) {
  GruGrads g;
  g.dwz = Eigen::MatrixXd::Zero(cell.hidden, cell.in);
  g.duz = Eigen::MatrixXd::Zero(cell.hidden, cell.hidden);
  g.dwr = Eigen::MatrixXd::Zero(cell.hidden, cell.in);
  g.dur = Eigen::MatrixXd::Zero(cell.hidden, cell.hidden);
  g.dwh = Eigen::MatrixXd::Zero(cell.hidden, cell.in);
  g.duh = Eigen::MatrixXd::Zero(cell.hidden, cell.hidden);
  g.dbz = Eigen::VectorXd::Zero(cell.hidden);
  g.dbr = Eigen::VectorXd::Zero(cell.hidden);
  g.dbh = Eigen::VectorXd::Zero(cell.hidden);
  return g;
}

GruBack gru_backward(const GruCell& cell, const GruTape& tape,
                     const Eigen::VectorXd& gh, GruGrads& grads) {
  if (tape.version != cell.version)
    throw std::logic_error("gru_backward: tape is stale, parameters changed");
  const Eigen::ArrayXd z = tape.z.array();
  const Eigen::ArrayXd r = tape.r.array();
  const Eigen::ArrayXd n = tape.n.array();
  const Eigen::ArrayXd g = gh.array();

  const Eigen::ArrayXd dz = g * (tape.h_prev.array() - n);
  const Eigen::ArrayXd dn = g * (1.0 - z);
  const Eigen::VectorXd da_n = (dn * (1.0 - n.square())).matrix();
  const Eigen::ArrayXd dr = da_n.array() * tape.uh_h.array();
  const Eigen::VectorXd da_r = (dr * r * (1.0 - r)).matrix();
  const Eigen::VectorXd da_z = (dz * z * (1.0 - z)).matrix();
  const Eigen::VectorXd d_uh_h = (da_n.array() * r).matrix();

  grads.dwh += da_n * tape.x.transpose();
  grads.dbh += da_n;
  grads.duh += d_uh_h * tape.h_prev.transpose();
  grads.dwr += da_r * tape.x.transpose();
  grads.dbr += da_r;
  grads.dur += da_r * tape.h_prev.transpose();
  grads.dwz += da_z * tape.x.transpose();
  grads.dbz += da_z;
  grads.duz += da_z * tape.h_prev.transpose();

  GruBack back;
  back.dh_prev = (g * z).matrix() + cell.uh.transpose() * d_uh_h +
                 cell.ur.transpose() * da_r + cell.uz.transpose() * da_z;
  back.dx = cell.wh.transpose() * da_n + cell.wr.transpose() * da_r +
            cell.wz.transpose() * da_z;
  return back;
}

namespace {

template <typename Blocks>
Eigen::VectorXd pack(const Blocks& blocks, Eigen::Index total) {
  Eigen::VectorXd flat(total);
  Eigen::Index at = 0;
  for (const auto* b : blocks) {
    const Eigen::Index n = b->size();
    flat.segment(at, n) = Eigen::Map<const Eigen::VectorXd>(b->data(), n);
    at += n;
  }
  return flat;
}

}  // namespace

Eigen::VectorXd flatten(const DenseNet& net) {
  std::vector<const Eigen::MatrixXd*> ms;
  Eigen::Index total = 0;
  std::vector<const double*> unused;
  Eigen::Index at = 0;
  for (const auto& w : net.w) total += w.size();
  for (const auto& b : net.b) total += b.size();
  Eigen::VectorXd flat(total);
  for (std::size_t i = 0; i < net.w.size(); ++i) {
    const Eigen::Index nw = net.w[i].size();
    flat.segment(at, nw) = Eigen::Map<const Eigen::VectorXd>(net.w[i].data(), nw);
    at += nw;
    const Eigen::Index nb = net.b[i].size();
    flat.segment(at, nb) = net.b[i];
    at += nb;
  }
  return flat;
}

void unflatten(DenseNet& net, const Eigen::VectorXd& flat) {
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < net.w.size(); ++i) {
    const Eigen::Index nw = net.w[i].size();
    Eigen::Map<Eigen::VectorXd>(net.w[i].data(), nw) = flat.segment(at, nw);
    at += nw;
    const Eigen::Index nb = net.b[i].size();
    net.b[i] = flat.segment(at, nb);
    at += nb;
  }
  if (at != flat.size()) throw std::invalid_argument("unflatten: size mismatch");
  ++net.version;
}

Eigen::VectorXd flatten_grads(const DenseNet& net, const DenseGrads& grads) {
  Eigen::Index total = 0;
  for (const auto& w : net.w) total += w.size();
  for (const auto& b : net.b) total += b.size();
  Eigen::VectorXd flat(total);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < grads.dw.size(); ++i) {
    const Eigen::Index nw = grads.dw[i].size();
    flat.segment(at, nw) = Eigen::Map<const Eigen::VectorXd>(grads.dw[i].data(), nw);
    at += nw;
    const Eigen::Index nb = grads.db[i].size();
    flat.segment(at, nb) = grads.db[i];
    at += nb;
  }
  return flat;
}

namespace {

template <typename Cell, typename M, typename V>
Eigen::Index gru_total(const Cell& c) {
  return 3 * (c.wz.size() + c.uz.size() + c.bz.size());
}

}  // namespace

Eigen::VectorXd flatten(const GruCell& cell) {
  Eigen::VectorXd flat(gru_total<GruCell, Eigen::MatrixXd, Eigen::VectorXd>(cell));
  Eigen::Index at = 0;
  for (const Eigen::MatrixXd* m : {&cell.wz, &cell.uz, &cell.wr, &cell.ur, &cell.wh, &cell.uh}) {
    flat.segment(at, m->size()) = Eigen::Map<const Eigen::VectorXd>(m->data(), m->size());
    at += m->size();
  }
  for (const Eigen::VectorXd* v : {&cell.bz, &cell.br, &cell.bh}) {
    flat.segment(at, v->size()) = *v;
    at += v->size();
  }
  return flat;
}

void unflatten(GruCell& cell, const Eigen::VectorXd& flat) {
  Eigen::Index at = 0;
  for (Eigen::MatrixXd* m : {&cell.wz, &cell.uz, &cell.wr, &cell.ur, &cell.wh, &cell.uh}) {
    Eigen::Map<Eigen::VectorXd>(m->data(), m->size()) = flat.segment(at, m->size());
    at += m->size();
  }
  for (Eigen::VectorXd* v : {&cell.bz, &cell.br, &cell.bh}) {
    *v = flat.segment(at, v->size());
    at += v->size();
  }
  if (at != flat.size()) throw std::invalid_argument("unflatten: size mismatch");
  ++cell.version;
}

Eigen::VectorXd flatten_grads(const GruCell& cell, const GruGrads& grads) {
  Eigen::VectorXd flat(gru_total<GruCell, Eigen::MatrixXd, Eigen::VectorXd>(cell));
  Eigen::Index at = 0;
  for (const Eigen::MatrixXd* m :
       {&grads.dwz, &grads.duz, &grads.dwr, &grads.dur, &grads.dwh, &grads.duh}) {
    flat.segment(at, m->size()) = Eigen::Map<const Eigen::VectorXd>(m->data(), m->size());
    at += m->size();
  }
  for (const Eigen::VectorXd* v : {&grads.dbz, &grads.dbr, &grads.dbh}) {
    flat.segment(at, v->size()) = *v;
    at += v->size();
  }
  return flat;
}

AdamState make_adam(double alpha, Eigen::Index n) {
  AdamState s;
  s.alpha = alpha;
  s.m = Eigen::VectorXd::Zero(n);
  s.v = Eigen::VectorXd::Zero(n);
  return s;
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  ++state.t;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v.array().matrix() +
            (1.0 - state.beta2) * grads.array().square().matrix();
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  params.array() -= state.alpha * (state.m.array() / bc1) /
                    ((state.v.array() / bc2).sqrt() + state.eps);
}

void polyak(Eigen::VectorXd& target, const Eigen::VectorXd& online, double rho) {
  if (target.size() != online.size())
    throw std::invalid_argument("polyak: shape mismatch");
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("polyak: rho must be in [0,1]");
  target = rho * target + (1.0 - rho) * online;
}

}  // namespace tanktune
