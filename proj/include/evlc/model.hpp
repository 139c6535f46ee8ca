#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "evlc/pmf.hpp"

namespace evlc {

// Inference-form parameters of the PMF predictor: a bank of 16 per-symbol
// FC(N,1) units, FC(16,64), FC(64,16), softmax. Batch normalization from
// training is already folded into the affine weights, so inference is pure
// affine + ReLU + softmax.
struct ModelWeights {
  static constexpr int kSymbols = 16;
  static constexpr int kHidden = 64;

  int window = 10;       // N: history PMFs consumed per prediction
  std::vector<float> w0;  // kSymbols rows of `window` weights each
  std::array<float, kSymbols> b0{};
  std::array<float, std::size_t(kHidden) * kSymbols> w1{};  // row-major 64x16
  std::array<float, kHidden> b1{};
  std::array<float, std::size_t(kSymbols) * kHidden> w2{};  // row-major 16x64
  std::array<float, kSymbols> b2{};

  // All-zero parameters: predicts the uniform PMF for any input, which makes
  // the substitution table the identity. Used as the non-learned baseline.
  static ModelWeights zeros(int window = 10);
};

// Predicted PMF for the current unit from the buffered history. Float
// arithmetic with strict sequential accumulation; both codec ends must
// produce identical values (see FORMAT.md). Output sums to 1 within 1e-6
// with strictly positive entries.
Pmf predict(const PmfBuffer& buffer, const ModelWeights& weights);

// H(p, q) = -sum p[s] * ln(max(q[s], eps)). Terms with p[s] == 0 contribute
// nothing, so targets with empty bins are fine.
double cross_entropy(const Pmf& p, const Pmf& q, double eps = 1e-9);

// Multiply-accumulates in one forward pass: 16*N + 16*64 + 64*16.
std::uint64_t mac_count(const ModelWeights& weights);

// SHA-256 over the serialized header and parameter block; recorded in both
// the weights file and every encoded stream's header.
std::array<std::uint8_t, 32> weights_hash(const ModelWeights& weights);

// Weights file: magic "LCW1", layout metadata, little-endian float32
// parameters in fixed order (w0, b0, w1, b1, w2, b2), 32-byte content hash.
std::vector<std::uint8_t> serialize_weights(const ModelWeights& weights);
ModelWeights deserialize_weights(std::span<const std::uint8_t> bytes);

void save_weights(const ModelWeights& weights, const std::filesystem::path& path);
ModelWeights load_weights(const std::filesystem::path& path);

}  // namespace evlc
