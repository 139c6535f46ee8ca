#include "evlc/model.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "evlc/errors.hpp"
#include "evlc/io.hpp"

namespace evlc {
namespace {

constexpr char kWeightsMagic[4] = {'L', 'C', 'W', '1'};
constexpr std::uint8_t kWeightsVersion = 1;

void check_shapes(const ModelWeights& w) {
  if (w.window < 1 || w.window > 255) {
    throw ModelError("model window out of range");
  }
  if (w.w0.size() != std::size_t(ModelWeights::kSymbols) * std::size_t(w.window)) {
    throw ModelError("w0 shape does not match window");
  }
  auto finite = [](std::span<const float> xs) {
    for (float x : xs) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  };
  if (!finite(w.w0) || !finite(w.b0) || !finite(w.w1) || !finite(w.b1) ||
      !finite(w.w2) || !finite(w.b2)) {
    throw ModelError("non-finite model parameter");
  }
}

// Everything before the trailing hash, in the normative order.
std::vector<std::uint8_t> serialize_body(const ModelWeights& w) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + 4 * (w.w0.size() + 16 + 64 * 16 + 64 + 16 * 64 + 16));
  out.insert(out.end(), kWeightsMagic, kWeightsMagic + 4);
  append_u8(out, kWeightsVersion);
  append_u8(out, std::uint8_t(w.window));
  append_u16le(out, ModelWeights::kSymbols);
  append_u16le(out, ModelWeights::kHidden);
  for (float v : w.w0) append_f32le(out, v);
  for (float v : w.b0) append_f32le(out, v);
  for (float v : w.w1) append_f32le(out, v);
  for (float v : w.b1) append_f32le(out, v);
  for (float v : w.w2) append_f32le(out, v);
  for (float v : w.b2) append_f32le(out, v);
  return out;
}

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> bytes) {
  std::array<std::uint8_t, 32> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != digest.size()) {
    throw ModelError("SHA-256 computation failed");
  }
  return digest;
}

}  // namespace

ModelWeights ModelWeights::zeros(int window) {
  ModelWeights w;
  w.window = window;
  w.w0.assign(std::size_t(kSymbols) * std::size_t(window), 0.0f);
  return w;
}

Pmf predict(const PmfBuffer& buffer, const ModelWeights& weights) {
  check_shapes(weights);
  if (buffer.window() != weights.window) {
    throw ModelError("PMF buffer window " + std::to_string(buffer.window()) +
                     " does not match model window " +
                     std::to_string(weights.window));
  }
  constexpr int kS = ModelWeights::kSymbols;
  constexpr int kH = ModelWeights::kHidden;
  const int n = weights.window;

  // Strict sequential float accumulation throughout; see FORMAT.md.
  float h0[kS];
  for (int j = 0; j < kS; ++j) {
    float acc = weights.b0[std::size_t(j)];
    const float* row = weights.w0.data() + std::size_t(j) * std::size_t(n);
    for (int i = 0; i < n; ++i) {
      acc += row[i] * float(buffer[i][std::size_t(j)]);
    }
    h0[j] = acc > 0.0f ? acc : 0.0f;
  }

  float h1[kH];
  for (int u = 0; u < kH; ++u) {
    float acc = weights.b1[std::size_t(u)];
    const float* row = weights.w1.data() + std::size_t(u) * kS;
    for (int j = 0; j < kS; ++j) {
      acc += row[j] * h0[j];
    }
    h1[u] = acc > 0.0f ? acc : 0.0f;
  }

  float z[kS];
  float zmax = -std::numeric_limits<float>::infinity();
  for (int s = 0; s < kS; ++s) {
    float acc = weights.b2[std::size_t(s)];
    const float* row = weights.w2.data() + std::size_t(s) * kH;
    for (int u = 0; u < kH; ++u) {
      acc += row[u] * h1[u];
    }
    z[s] = acc;
    zmax = std::max(zmax, acc);
  }

  Pmf out;
  double total = 0.0;
  for (int s = 0; s < kS; ++s) {
    out[std::size_t(s)] = std::exp(double(z[s]) - double(zmax));
    total += out[std::size_t(s)];
  }
  for (double& v : out) {
    v /= total;
    // Guard against underflow for extreme logit spreads; keeps every entry
    // strictly positive while staying well inside the 1e-6 sum tolerance.
    if (v < 1e-300) v = 1e-300;
  }
  return out;
}

double cross_entropy(const Pmf& p, const Pmf& q, double eps) {
  if (eps <= 0) throw std::invalid_argument("clamp must be positive");
  double h = 0.0;
  for (std::size_t s = 0; s < p.size(); ++s) {
    if (p[s] > 0.0) {
      h -= p[s] * std::log(std::max(q[s], eps));
    }
  }
  return h;
}

std::uint64_t mac_count(const ModelWeights& weights) {
  check_shapes(weights);
  constexpr std::uint64_t kS = ModelWeights::kSymbols;
  constexpr std::uint64_t kH = ModelWeights::kHidden;
  return kS * std::uint64_t(weights.window) + kS * kH + kH * kS;
}

std::array<std::uint8_t, 32> weights_hash(const ModelWeights& weights) {
  check_shapes(weights);
  return sha256(serialize_body(weights));
}

std::vector<std::uint8_t> serialize_weights(const ModelWeights& weights) {
  check_shapes(weights);
  std::vector<std::uint8_t> out = serialize_body(weights);
  const auto digest = sha256(out);
  out.insert(out.end(), digest.begin(), digest.end());
  return out;
}

ModelWeights deserialize_weights(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 10 + 32) {
    throw ModelError("weights file truncated");
  }
  for (int i = 0; i < 4; ++i) {
    if (bytes[std::size_t(i)] != std::uint8_t(kWeightsMagic[i])) {
      throw ModelError("not a weights file (bad magic)");
    }
  }

  const std::span<const std::uint8_t> body = bytes.first(bytes.size() - 32);
  const std::span<const std::uint8_t> stored = bytes.last(32);
  const auto digest = sha256(body);
  if (!std::equal(digest.begin(), digest.end(), stored.begin())) {
    throw ModelError("weights content hash mismatch");
  }

  ByteCursor cur(body);
  cur.take(4);  // magic
  const std::uint8_t version = cur.u8();
  if (version != kWeightsVersion) {
    throw ModelError("unsupported weights version " + std::to_string(version));
  }
  ModelWeights w;
  w.window = cur.u8();
  const std::uint16_t symbols = cur.u16le();
  const std::uint16_t hidden = cur.u16le();
  if (symbols != ModelWeights::kSymbols || hidden != ModelWeights::kHidden ||
      w.window < 1) {
    throw ModelError("unsupported weights layout");
  }
  try {
    w.w0.resize(std::size_t(ModelWeights::kSymbols) * std::size_t(w.window));
    for (float& v : w.w0) v = cur.f32le();
    for (float& v : w.b0) v = cur.f32le();
    for (float& v : w.w1) v = cur.f32le();
    for (float& v : w.b1) v = cur.f32le();
    for (float& v : w.w2) v = cur.f32le();
    for (float& v : w.b2) v = cur.f32le();
  } catch (const CorruptionError&) {
    throw ModelError("weights file truncated");
  }
  if (!cur.at_end()) {
    throw ModelError("weights file has trailing bytes");
  }
  check_shapes(w);
  return w;
}

void save_weights(const ModelWeights& weights, const std::filesystem::path& path) {
  const auto bytes = serialize_weights(weights);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ModelError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            std::streamsize(bytes.size()));
  if (!out) throw ModelError("failed writing " + path.string());
}

ModelWeights load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw ModelError("cannot open " + path.string());
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(std::size_t(size));
  in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) throw ModelError("failed reading " + path.string());
  return deserialize_weights(bytes);
}

}  // namespace evlc
