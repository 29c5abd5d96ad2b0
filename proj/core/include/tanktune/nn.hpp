#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

namespace tanktune {

enum class Act { Identity, Relu, Tanh };

// Plain feedforward net. `version` lets tapes detect stale parameters.
struct DenseNet {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;
  std::vector<Act> act;
  std::uint64_t version = 0;

  int input_size() const { return w.empty() ? 0 : static_cast<int>(w.front().cols()); }
  int output_size() const { return w.empty() ? 0 : static_cast<int>(w.back().rows()); }
};

// sizes = {in, h1, ..., out}; acts has sizes.size()-1 entries. Weights and
// biases are uniform in +-1/sqrt(fan_in).
DenseNet make_dense(const std::vector<int>& sizes, const std::vector<Act>& acts,
                    std::mt19937_64& rng);

struct DenseTape {
  Eigen::VectorXd x;
  std::vector<Eigen::VectorXd> pre;
  std::vector<Eigen::VectorXd> post;
  std::uint64_t version = 0;
};

Eigen::VectorXd dense_forward(const DenseNet& net, const Eigen::VectorXd& x,
                              DenseTape* tape = nullptr);

struct DenseGrads {
  std::vector<Eigen::MatrixXd> dw;
  std::vector<Eigen::VectorXd> db;
  void set_zero();
};
DenseGrads make_grads(const DenseNet& net);

// Accumulates parameter gradients; returns dL/dx. Throws std::logic_error if
// the tape predates a parameter change.
Eigen::VectorXd dense_backward(const DenseNet& net, const DenseTape& tape,
                               const Eigen::VectorXd& gy, DenseGrads& grads);

// Gated recurrent unit:
//   z = sigmoid(wz x + uz h + bz)
//   r = sigmoid(wr x + ur h + br)
//   n = tanh(wh x + r .* (uh h) + bh)
//   h' = z .* h + (1 - z) .* n
struct GruCell {
  int in = 0;
  int hidden = 0;
  Eigen::MatrixXd wz, uz, wr, ur, wh, uh;
  Eigen::VectorXd bz, br, bh;
  std::uint64_t version = 0;
};

GruCell make_gru(int in, int hidden, std::mt19937_64& rng);

struct GruTape {
  Eigen::VectorXd x, h_prev, z, r, n, uh_h;
  std::uint64_t version = 0;
};

Eigen::VectorXd gru_forward(const GruCell& cell, const Eigen::VectorXd& h_prev,
                            const Eigen::VectorXd& x, GruTape* tape = nullptr);

struct GruGrads {
  Eigen::MatrixXd dwz, duz, dwr, dur, dwh, duh;
  Eigen::VectorXd dbz, dbr, dbh;
  void set_zero();
};
GruGrads make_grads(const GruCell& cell);

struct GruBack {
  Eigen::VectorXd dh_prev;
  Eigen::VectorXd dx;
};
GruBack gru_backward(const GruCell& cell, const GruTape& tape,
                     const Eigen::VectorXd& gh, GruGrads& grads);

// Flat parameter packing (layer order, column-major within each block).
Eigen::VectorXd flatten(const DenseNet& net);
void unflatten(DenseNet& net, const Eigen::VectorXd& flat);
Eigen::VectorXd flatten_grads(const DenseNet& net, const DenseGrads& grads);
Eigen::VectorXd flatten(const GruCell& cell);
void unflatten(GruCell& cell, const Eigen::VectorXd& flat);
Eigen::VectorXd flatten_grads(const GruCell& cell, const GruGrads& grads);

// Bias-corrected Adam on flat vectors.
struct AdamState {
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
};
AdamState make_adam(double alpha, Eigen::Index n);
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state);

// target <- rho*target + (1-rho)*online
void polyak(Eigen::VectorXd& target, const Eigen::VectorXd& online, double rho);

}  // namespace tanktune
