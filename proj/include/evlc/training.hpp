#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evlc/event.hpp"
#include "evlc/model.hpp"

namespace evlc {

struct TrainingConfig {
  double learning_rate = 1e-4;
  double lr_decay = 0.1;  // multiplied in every decay_every epochs
  int decay_every = 5;
  int max_epochs = 100;
  int patience = 10;  // epochs without validation improvement before stopping
  int batch_size = 64;
  double epsilon_clamp = 1e-9;
  std::uint64_t seed = 1;

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
};

// One supervised sample: N history PMFs (oldest first) and the PMF they
// should predict.
struct WindowSample {
  std::vector<Pmf> history;
  Pmf target{};
};

using WindowDataset = std::vector<WindowSample>;

// One sample per position i >= window within each sequence; windows never
// span sequence boundaries. Sequences shorter than window+1 contribute
// nothing.
WindowDataset build_dataset(const std::vector<std::vector<Pmf>>& sequences,
                            int window);

// Per-unit empirical PMFs of an event stream, in unit order: the codec's
// front half (segment, quadtree, PMF) without any entropy coding.
std::vector<Pmf> unit_pmf_sequence(std::span<const Event> events,
                                   const SensorGeometry& geometry);

// The predictor in its double-precision training form: same layers as
// ModelWeights plus batch normalization before each ReLU. Parameters live in
// one flat vector so the optimizer and the finite-difference check can walk
// them uniformly.
class TrainingNetwork {
 public:
  TrainingNetwork(int window, std::uint64_t seed, double bn_eps = 1e-5);

  int window() const { return window_; }
  std::size_t param_count() const { return params_.size(); }

  double get_param(std::size_t i) const { return params_[i]; }
  void set_param(std::size_t i, double v) { params_[i] = v; }
  double get_grad(std::size_t i) const { return grads_[i]; }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& grads() const { return grads_; }

  // Mean clamped cross-entropy over the batch using batch statistics
  // (training mode). Does not touch gradients or running statistics.
  double forward(std::span<const WindowSample> batch, double eps_clamp);

  // forward plus analytic gradients into grads(). When update_running_stats
  // is set, folds this batch's statistics into the running estimates.
  double forward_backward(std::span<const WindowSample> batch, double eps_clamp,
                          bool update_running_stats, double bn_momentum = 0.1);

  // Eval-mode prediction for one history window, using running statistics.
  Pmf eval_forward(std::span<const Pmf> history) const;

  double eval_loss(const WindowDataset& set, double eps_clamp) const;

  // Folds batch-norm scale/shift and running statistics into the affine
  // weights and casts to the single-precision inference form.
  ModelWeights fold() const;

  struct Snapshot {
    std::vector<double> params;
    std::vector<double> running;
  };
  Snapshot snapshot() const;
  void restore(const Snapshot& s);

 private:
  double run(std::span<const WindowSample> batch, double eps_clamp,
             bool with_grads, bool update_running_stats, double bn_momentum);

  int window_;
  double bn_eps_;
  std::vector<double> params_;
  std::vector<double> grads_;
  std::vector<double> running_;  // mean0[16], var0[16], mean1[64], var1[64]

  // scratch reused across batches
  std::vector<double> a0_, xhat0_, h0_, z1_, xhat1_, h1_, q_;
};

struct TrainingReport {
  ModelWeights weights;  // best-validation snapshot, batch norm folded
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;
};

// Adam with step-decay schedule and early stopping on validation loss.
// Deterministic given cfg.seed and the datasets.
TrainingReport train(const WindowDataset& train_set, const WindowDataset& val_set,
                     const TrainingConfig& cfg);

// Max relative error between analytic gradients and central finite
// differences over every parameter, on one batch in training mode.
double gradient_check(TrainingNetwork& net, std::span<const WindowSample> batch,
                      double eps_clamp = 1e-9, double step = 1e-5);

}  // namespace evlc
