#include "evlc/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "evlc/errors.hpp"
#include "evlc/rng.hpp"

namespace evlc {
namespace {

constexpr int kS = ModelWeights::kSymbols;
constexpr int kH = ModelWeights::kHidden;

// Offsets into the flat parameter vector.
struct Layout {
  explicit Layout(int window) {
    w0 = 0;
    b0 = w0 + std::size_t(kS) * std::size_t(window);
    g0 = b0 + kS;
    be0 = g0 + kS;
    w1 = be0 + kS;
    b1 = w1 + std::size_t(kH) * kS;
    g1 = b1 + kH;
    be1 = g1 + kH;
    w2 = be1 + kH;
    b2 = w2 + std::size_t(kS) * kH;
    total = b2 + kS;
  }
  std::size_t w0, b0, g0, be0, w1, b1, g1, be1, w2, b2, total;
};

// Running-statistics offsets: mean0, var0, mean1, var1.
constexpr std::size_t kRMean0 = 0;
constexpr std::size_t kRVar0 = kRMean0 + kS;
constexpr std::size_t kRMean1 = kRVar0 + kS;
constexpr std::size_t kRVar1 = kRMean1 + kH;
constexpr std::size_t kRunningTotal = kRVar1 + kH;

void softmax_row(const double* z, double* q, int n) {
  double zmax = z[0];
  for (int i = 1; i < n; ++i) zmax = std::max(zmax, z[i]);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    q[i] = std::exp(z[i] - zmax);
    total += q[i];
  }
  for (int i = 0; i < n; ++i) q[i] /= total;
}

}  // namespace

WindowDataset build_dataset(const std::vector<std::vector<Pmf>>& sequences,
                            int window) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  WindowDataset out;
  for (const auto& seq : sequences) {
    for (std::size_t i = std::size_t(window); i < seq.size(); ++i) {
      WindowSample sample;
      sample.history.assign(seq.begin() + long(i) - window, seq.begin() + long(i));
      sample.target = seq[i];
      out.push_back(std::move(sample));
    }
  }
  return out;
}

std::vector<Pmf> unit_pmf_sequence(std::span<const Event> events,
                                   const SensorGeometry& geometry) {
  const int depth = required_depth(geometry);
  const SegmentResult segments = segment_into_units(events, geometry);
  std::vector<Pmf> pmfs;
  pmfs.reserve(segments.units.size());
  for (const CodingUnit& unit : segments.units) {
    pmfs.push_back(compute_pmf(build_occupancy(unit.coords, depth)));
  }
  return pmfs;
}

TrainingNetwork::TrainingNetwork(int window, std::uint64_t seed, double bn_eps)
    : window_(window), bn_eps_(bn_eps) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  const Layout L(window);
  params_.assign(L.total, 0.0);
  grads_.assign(L.total, 0.0);
  running_.assign(kRunningTotal, 0.0);
  for (int j = 0; j < kS; ++j) running_[kRVar0 + std::size_t(j)] = 1.0;
  for (int u = 0; u < kH; ++u) running_[kRVar1 + std::size_t(u)] = 1.0;

  Rng rng(seed);
  auto uniform_init = [&](std::size_t offset, std::size_t count, double bound) {
    for (std::size_t i = 0; i < count; ++i) {
      params_[offset + i] = rng.range(-bound, bound);
    }
  };
  uniform_init(L.w0, std::size_t(kS) * std::size_t(window),
               std::sqrt(6.0 / double(window + 1)));
  uniform_init(L.w1, std::size_t(kH) * kS, std::sqrt(6.0 / double(kS + kH)));
  uniform_init(L.w2, std::size_t(kS) * kH, std::sqrt(6.0 / double(kH + kS)));
  for (int j = 0; j < kS; ++j) params_[L.g0 + std::size_t(j)] = 1.0;
  for (int u = 0; u < kH; ++u) params_[L.g1 + std::size_t(u)] = 1.0;
}

double TrainingNetwork::forward(std::span<const WindowSample> batch,
                                double eps_clamp) {
  return run(batch, eps_clamp, false, false, 0.0);
}

double TrainingNetwork::forward_backward(std::span<const WindowSample> batch,
                                         double eps_clamp,
                                         bool update_running_stats,
                                         double bn_momentum) {
  return run(batch, eps_clamp, true, update_running_stats, bn_momentum);
}

double TrainingNetwork::run(std::span<const WindowSample> batch, double eps_clamp,
                            bool with_grads, bool update_running_stats,
                            double bn_momentum) {
  const std::size_t m = batch.size();
  if (m == 0) throw std::invalid_argument("empty batch");
  for (const WindowSample& s : batch) {
    if (int(s.history.size()) != window_) {
      throw std::invalid_argument("sample window does not match network");
    }
  }
  const Layout L(window_);
  const double* P = params_.data();

  a0_.assign(m * kS, 0.0);
  xhat0_.assign(m * kS, 0.0);
  h0_.assign(m * kS, 0.0);
  z1_.assign(m * kH, 0.0);
  xhat1_.assign(m * kH, 0.0);
  h1_.assign(m * kH, 0.0);
  q_.assign(m * kS, 0.0);

  // Per-symbol FC(N,1) bank.
  for (std::size_t s = 0; s < m; ++s) {
    const auto& hist = batch[s].history;
    for (int j = 0; j < kS; ++j) {
      double acc = P[L.b0 + std::size_t(j)];
      const double* row = P + L.w0 + std::size_t(j) * std::size_t(window_);
      for (int i = 0; i < window_; ++i) {
        acc += row[i] * hist[std::size_t(i)][std::size_t(j)];
      }
      a0_[s * kS + std::size_t(j)] = acc;
    }
  }

  // Batch norm over channel j, then ReLU. Biased variance for the batch
  // statistics, unbiased for the running estimate.
  std::array<double, kS> mu0{}, var0{};
  for (int j = 0; j < kS; ++j) {
    double mean = 0.0;
    for (std::size_t s = 0; s < m; ++s) mean += a0_[s * kS + std::size_t(j)];
    mean /= double(m);
    double var = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
      const double d = a0_[s * kS + std::size_t(j)] - mean;
      var += d * d;
    }
    var /= double(m);
    mu0[std::size_t(j)] = mean;
    var0[std::size_t(j)] = var;
    const double istd = 1.0 / std::sqrt(var + bn_eps_);
    const double gamma = P[L.g0 + std::size_t(j)];
    const double beta = P[L.be0 + std::size_t(j)];
    for (std::size_t s = 0; s < m; ++s) {
      const double xh = (a0_[s * kS + std::size_t(j)] - mean) * istd;
      xhat0_[s * kS + std::size_t(j)] = xh;
      const double y = gamma * xh + beta;
      h0_[s * kS + std::size_t(j)] = y > 0.0 ? y : 0.0;
    }
  }

  // FC(16, 64).
  for (std::size_t s = 0; s < m; ++s) {
    for (int u = 0; u < kH; ++u) {
      double acc = P[L.b1 + std::size_t(u)];
      const double* row = P + L.w1 + std::size_t(u) * kS;
      for (int j = 0; j < kS; ++j) acc += row[j] * h0_[s * kS + std::size_t(j)];
      z1_[s * kH + std::size_t(u)] = acc;
    }
  }

  std::array<double, kH> mu1{}, var1{};
  for (int u = 0; u < kH; ++u) {
    double mean = 0.0;
    for (std::size_t s = 0; s < m; ++s) mean += z1_[s * kH + std::size_t(u)];
    mean /= double(m);
    double var = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
      const double d = z1_[s * kH + std::size_t(u)] - mean;
      var += d * d;
    }
    var /= double(m);
    mu1[std::size_t(u)] = mean;
    var1[std::size_t(u)] = var;
    const double istd = 1.0 / std::sqrt(var + bn_eps_);
    const double gamma = P[L.g1 + std::size_t(u)];
    const double beta = P[L.be1 + std::size_t(u)];
    for (std::size_t s = 0; s < m; ++s) {
      const double xh = (z1_[s * kH + std::size_t(u)] - mean) * istd;
      xhat1_[s * kH + std::size_t(u)] = xh;
      const double y = gamma * xh + beta;
      h1_[s * kH + std::size_t(u)] = y > 0.0 ? y : 0.0;
    }
  }

  // FC(64, 16) + softmax + clamped cross-entropy.
  double loss = 0.0;
  for (std::size_t s = 0; s < m; ++s) {
    double z2[kS];
    for (int t = 0; t < kS; ++t) {
      double acc = P[L.b2 + std::size_t(t)];
      const double* row = P + L.w2 + std::size_t(t) * kH;
      for (int u = 0; u < kH; ++u) acc += row[u] * h1_[s * kH + std::size_t(u)];
      z2[t] = acc;
    }
    softmax_row(z2, q_.data() + s * kS, kS);
    const Pmf& target = batch[s].target;
    for (int t = 0; t < kS; ++t) {
      const double p = target[std::size_t(t)];
      if (p > 0.0) {
        loss -= p * std::log(std::max(q_[s * kS + std::size_t(t)], eps_clamp));
      }
    }
  }
  loss /= double(m);

  if (update_running_stats && m >= 2) {
    const double unbias = double(m) / double(m - 1);
    for (int j = 0; j < kS; ++j) {
      running_[kRMean0 + std::size_t(j)] =
          (1.0 - bn_momentum) * running_[kRMean0 + std::size_t(j)] +
          bn_momentum * mu0[std::size_t(j)];
      running_[kRVar0 + std::size_t(j)] =
          (1.0 - bn_momentum) * running_[kRVar0 + std::size_t(j)] +
          bn_momentum * var0[std::size_t(j)] * unbias;
    }
    for (int u = 0; u < kH; ++u) {
      running_[kRMean1 + std::size_t(u)] =
          (1.0 - bn_momentum) * running_[kRMean1 + std::size_t(u)] +
          bn_momentum * mu1[std::size_t(u)];
      running_[kRVar1 + std::size_t(u)] =
          (1.0 - bn_momentum) * running_[kRVar1 + std::size_t(u)] +
          bn_momentum * var1[std::size_t(u)] * unbias;
    }
  }

  if (!with_grads) return loss;

  std::fill(grads_.begin(), grads_.end(), 0.0);
  double* G = grads_.data();

  // dL/dz2 via the softmax Jacobian; the clamp zeroes the gradient of any
  // term it froze.
  std::vector<double> dz2(m * kS, 0.0);
  for (std::size_t s = 0; s < m; ++s) {
    double gq[kS];
    double dot = 0.0;
    for (int t = 0; t < kS; ++t) {
      const double p = batch[s].target[std::size_t(t)];
      const double qv = q_[s * kS + std::size_t(t)];
      gq[t] = (p > 0.0 && qv > eps_clamp) ? (-p / qv) / double(m) : 0.0;
      dot += gq[t] * qv;
    }
    for (int t = 0; t < kS; ++t) {
      const double qv = q_[s * kS + std::size_t(t)];
      dz2[s * kS + std::size_t(t)] = qv * (gq[t] - dot);
    }
  }

  // FC(64, 16) backward.
  std::vector<double> dh1(m * kH, 0.0);
  for (std::size_t s = 0; s < m; ++s) {
    for (int t = 0; t < kS; ++t) {
      const double d = dz2[s * kS + std::size_t(t)];
      G[L.b2 + std::size_t(t)] += d;
      double* wrow = G + L.w2 + std::size_t(t) * kH;
      const double* prow = P + L.w2 + std::size_t(t) * kH;
      for (int u = 0; u < kH; ++u) {
        wrow[u] += d * h1_[s * kH + std::size_t(u)];
        dh1[s * kH + std::size_t(u)] += d * prow[u];
      }
    }
  }

  // ReLU + batch-norm backward over the 64 channels.
  std::vector<double> dz1(m * kH, 0.0);
  for (int u = 0; u < kH; ++u) {
    const double gamma = P[L.g1 + std::size_t(u)];
    const double istd = 1.0 / std::sqrt(var1[std::size_t(u)] + bn_eps_);
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
      const double dy =
          h1_[s * kH + std::size_t(u)] > 0.0 ? dh1[s * kH + std::size_t(u)] : 0.0;
      dh1[s * kH + std::size_t(u)] = dy;  // reuse as dy
      sum_dy += dy;
      sum_dy_xhat += dy * xhat1_[s * kH + std::size_t(u)];
    }
    G[L.g1 + std::size_t(u)] += sum_dy_xhat;
    G[L.be1 + std::size_t(u)] += sum_dy;
    const double inv_m = 1.0 / double(m);
    for (std::size_t s = 0; s < m; ++s) {
      const double dy = dh1[s * kH + std::size_t(u)];
      dz1[s * kH + std::size_t(u)] =
          gamma * istd *
          (dy - sum_dy * inv_m - xhat1_[s * kH + std::size_t(u)] * sum_dy_xhat * inv_m);
    }
  }

  // FC(16, 64) backward.
  std::vector<double> dh0(m * kS, 0.0);
  for (std::size_t s = 0; s < m; ++s) {
    for (int u = 0; u < kH; ++u) {
      const double d = dz1[s * kH + std::size_t(u)];
      G[L.b1 + std::size_t(u)] += d;
      double* wrow = G + L.w1 + std::size_t(u) * kS;
      const double* prow = P + L.w1 + std::size_t(u) * kS;
      for (int j = 0; j < kS; ++j) {
        wrow[j] += d * h0_[s * kS + std::size_t(j)];
        dh0[s * kS + std::size_t(j)] += d * prow[j];
      }
    }
  }

  // ReLU + batch-norm backward over the 16 channels, then the FC(N,1) bank.
  for (int j = 0; j < kS; ++j) {
    const double gamma = P[L.g0 + std::size_t(j)];
    const double istd = 1.0 / std::sqrt(var0[std::size_t(j)] + bn_eps_);
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
      const double dy =
          h0_[s * kS + std::size_t(j)] > 0.0 ? dh0[s * kS + std::size_t(j)] : 0.0;
      dh0[s * kS + std::size_t(j)] = dy;
      sum_dy += dy;
      sum_dy_xhat += dy * xhat0_[s * kS + std::size_t(j)];
    }
    G[L.g0 + std::size_t(j)] += sum_dy_xhat;
    G[L.be0 + std::size_t(j)] += sum_dy;
    const double inv_m = 1.0 / double(m);
    for (std::size_t s = 0; s < m; ++s) {
      const double dy = dh0[s * kS + std::size_t(j)];
      const double da0 =
          gamma * istd *
          (dy - sum_dy * inv_m - xhat0_[s * kS + std::size_t(j)] * sum_dy_xhat * inv_m);
      G[L.b0 + std::size_t(j)] += da0;
      double* wrow = G + L.w0 + std::size_t(j) * std::size_t(window_);
      const auto& hist = batch[s].history;
      for (int i = 0; i < window_; ++i) {
        wrow[i] += da0 * hist[std::size_t(i)][std::size_t(j)];
      }
    }
  }

  return loss;
}

Pmf TrainingNetwork::eval_forward(std::span<const Pmf> history) const {
  if (int(history.size()) != window_) {
    throw std::invalid_argument("history window does not match network");
  }
  const Layout L(window_);
  const double* P = params_.data();

  double h0[kS];
  for (int j = 0; j < kS; ++j) {
    double acc = P[L.b0 + std::size_t(j)];
    const double* row = P + L.w0 + std::size_t(j) * std::size_t(window_);
    for (int i = 0; i < window_; ++i) {
      acc += row[i] * history[std::size_t(i)][std::size_t(j)];
    }
    const double istd = 1.0 / std::sqrt(running_[kRVar0 + std::size_t(j)] + bn_eps_);
    const double y = P[L.g0 + std::size_t(j)] *
                         (acc - running_[kRMean0 + std::size_t(j)]) * istd +
                     P[L.be0 + std::size_t(j)];
    h0[j] = y > 0.0 ? y : 0.0;
  }

  double h1[kH];
  for (int u = 0; u < kH; ++u) {
    double acc = P[L.b1 + std::size_t(u)];
    const double* row = P + L.w1 + std::size_t(u) * kS;
    for (int j = 0; j < kS; ++j) acc += row[j] * h0[j];
    const double istd = 1.0 / std::sqrt(running_[kRVar1 + std::size_t(u)] + bn_eps_);
    const double y = P[L.g1 + std::size_t(u)] *
                         (acc - running_[kRMean1 + std::size_t(u)]) * istd +
                     P[L.be1 + std::size_t(u)];
    h1[u] = y > 0.0 ? y : 0.0;
  }

  double z2[kS];
  for (int t = 0; t < kS; ++t) {
    double acc = P[L.b2 + std::size_t(t)];
    const double* row = P + L.w2 + std::size_t(t) * kH;
    for (int u = 0; u < kH; ++u) acc += row[u] * h1[u];
    z2[t] = acc;
  }
  Pmf q;
  softmax_row(z2, q.data(), kS);
  return q;
}

double TrainingNetwork::eval_loss(const WindowDataset& set, double eps_clamp) const {
  if (set.empty()) throw std::invalid_argument("empty evaluation set");
  double total = 0.0;
  for (const WindowSample& s : set) {
    total += cross_entropy(s.target, eval_forward(s.history), eps_clamp);
  }
  return total / double(set.size());
}

ModelWeights TrainingNetwork::fold() const {
  const Layout L(window_);
  const double* P = params_.data();
  ModelWeights w;
  w.window = window_;
  w.w0.resize(std::size_t(kS) * std::size_t(window_));

  for (int j = 0; j < kS; ++j) {
    const double scale = P[L.g0 + std::size_t(j)] /
                         std::sqrt(running_[kRVar0 + std::size_t(j)] + bn_eps_);
    for (int i = 0; i < window_; ++i) {
      w.w0[std::size_t(j) * std::size_t(window_) + std::size_t(i)] =
          float(scale * P[L.w0 + std::size_t(j) * std::size_t(window_) + std::size_t(i)]);
    }
    w.b0[std::size_t(j)] =
        float(scale * (P[L.b0 + std::size_t(j)] - running_[kRMean0 + std::size_t(j)]) +
              P[L.be0 + std::size_t(j)]);
  }

  for (int u = 0; u < kH; ++u) {
    const double scale = P[L.g1 + std::size_t(u)] /
                         std::sqrt(running_[kRVar1 + std::size_t(u)] + bn_eps_);
    for (int j = 0; j < kS; ++j) {
      w.w1[std::size_t(u) * kS + std::size_t(j)] =
          float(scale * P[L.w1 + std::size_t(u) * kS + std::size_t(j)]);
    }
    w.b1[std::size_t(u)] =
        float(scale * (P[L.b1 + std::size_t(u)] - running_[kRMean1 + std::size_t(u)]) +
              P[L.be1 + std::size_t(u)]);
  }

  for (std::size_t i = 0; i < w.w2.size(); ++i) w.w2[i] = float(P[L.w2 + i]);
  for (int t = 0; t < kS; ++t) w.b2[std::size_t(t)] = float(P[L.b2 + std::size_t(t)]);
  return w;
}

TrainingNetwork::Snapshot TrainingNetwork::snapshot() const {
  return Snapshot{params_, running_};
}

void TrainingNetwork::restore(const Snapshot& s) {
  params_ = s.params;
  running_ = s.running;
}

TrainingReport train(const WindowDataset& train_set, const WindowDataset& val_set,
                     const TrainingConfig& cfg) {
  if (train_set.empty() || val_set.empty()) {
    throw std::invalid_argument("training and validation sets must be non-empty");
  }
  if (cfg.patience < 1 || cfg.patience > cfg.max_epochs) {
    throw std::invalid_argument("patience must be in [1, max_epochs]");
  }
  if (cfg.batch_size < 2) {
    throw std::invalid_argument("batch size must be >= 2 (batch-norm statistics)");
  }
  const int window = int(train_set.front().history.size());

  TrainingNetwork net(window, cfg.seed, cfg.bn_eps);
  const std::size_t P = net.param_count();
  std::vector<double> m1(P, 0.0), m2(P, 0.0);
  std::uint64_t step = 0;

  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::uint32_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0u);

  TrainingReport report;
  double best_val = std::numeric_limits<double>::infinity();
  TrainingNetwork::Snapshot best = net.snapshot();
  int best_epoch = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr =
        cfg.learning_rate *
        std::pow(cfg.lr_decay, double((epoch - 1) / cfg.decay_every));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t counted = 0;
    std::vector<WindowSample> batch;
    for (std::size_t pos = 0; pos < order.size(); pos += std::size_t(cfg.batch_size)) {
      const std::size_t take =
          std::min(std::size_t(cfg.batch_size), order.size() - pos);
      if (take < 2) break;  // batch statistics need >= 2 samples
      batch.clear();
      for (std::size_t i = 0; i < take; ++i) {
        batch.push_back(train_set[order[pos + i]]);
      }

      const double loss =
          net.forward_backward(batch, cfg.epsilon_clamp, true, cfg.bn_momentum);
      if (!std::isfinite(loss)) {
        throw TrainingError("training loss diverged", epoch);
      }
      epoch_loss += loss * double(take);
      counted += take;

      // Adam with bias correction.
      ++step;
      const double c1 = 1.0 - std::pow(cfg.adam_beta1, double(step));
      const double c2 = 1.0 - std::pow(cfg.adam_beta2, double(step));
      auto& params = net.params();
      const auto& grads = net.grads();
      for (std::size_t i = 0; i < P; ++i) {
        m1[i] = cfg.adam_beta1 * m1[i] + (1.0 - cfg.adam_beta1) * grads[i];
        m2[i] = cfg.adam_beta2 * m2[i] + (1.0 - cfg.adam_beta2) * grads[i] * grads[i];
        params[i] -= lr * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + cfg.adam_eps);
      }
    }

    const double val = net.eval_loss(val_set, cfg.epsilon_clamp);
    if (!std::isfinite(val)) {
      throw TrainingError("validation loss diverged", epoch);
    }
    report.train_loss.push_back(counted > 0 ? epoch_loss / double(counted) : 0.0);
    report.val_loss.push_back(val);
    report.epochs_run = epoch;

    if (val < best_val) {
      best_val = val;
      best = net.snapshot();
      best_epoch = epoch;
    } else if (epoch - best_epoch >= cfg.patience) {
      break;
    }
  }

  net.restore(best);
  report.best_epoch = best_epoch;
  report.best_val_loss = best_val;
  report.weights = net.fold();
  return report;
}

double gradient_check(TrainingNetwork& net, std::span<const WindowSample> batch,
                      double eps_clamp, double step) {
  net.forward_backward(batch, eps_clamp, false, 0.0);
  const std::vector<double> analytic = net.grads();

  double max_rel = 0.0;
  for (std::size_t i = 0; i < net.param_count(); ++i) {
    const double orig = net.get_param(i);
    net.set_param(i, orig + step);
    const double lp = net.forward(batch, eps_clamp);
    net.set_param(i, orig - step);
    const double lm = net.forward(batch, eps_clamp);
    net.set_param(i, orig);

    const double numeric = (lp - lm) / (2.0 * step);
    const double diff = std::abs(analytic[i] - numeric);
    if (diff <= 1e-9) continue;  // below the finite-difference noise floor
    const double denom = std::max(std::abs(analytic[i]), std::abs(numeric));
    max_rel = std::max(max_rel, diff / denom);
  }
  return max_rel;
}

}  // namespace evlc
