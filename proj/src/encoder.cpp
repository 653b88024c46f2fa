#include "condet/encoder.hpp"

#include <cmath>
#include <string>

#include "condet/error.hpp"
#include "condet/random.hpp"

namespace condet {
namespace {

bool word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

// y += W x, W row-major [rows, cols].
void gemv_add(std::span<const double> w, std::span<const double> x, std::span<double> y) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < y.size(); ++r) {
    const double* row = w.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] += acc;
  }
}

// x_grad += W^T dy
void gemv_t_add(std::span<const double> w, std::span<const double> dy, std::span<double> dx) {
  const std::size_t cols = dx.size();
  for (std::size_t r = 0; r < dy.size(); ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    const double* row = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) dx[c] += row[c] * g;
  }
}

// dW += dy x^T
void outer_add(std::span<const double> dy, std::span<const double> x, std::span<double> dw) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < dy.size(); ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    double* row = dw.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += g * x[c];
  }
}

void add_into(std::span<const double> src, std::span<double> dst) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

void require_finite_range(std::span<const double> values, std::string_view name) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericalError("non-finite value in parameter block " + std::string(name));
  }
}

}  // namespace

std::vector<std::uint32_t> tokenize(std::string_view text, const TokenizerConfig& config) {
  std::vector<std::uint32_t> ids;
  std::string word;
  auto flush = [&] {
    if (!word.empty() && ids.size() < config.max_seq_len) {
      ids.push_back(static_cast<std::uint32_t>(fnv1a64(word) % config.vocab_size));
    }
    word.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (word_byte(c)) {
      word.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else {
      flush();
      if (ids.size() >= config.max_seq_len) return ids;
    }
  }
  flush();
  return ids;
}

ParamLayout::ParamLayout(const ModelDims& dims) : dims_(dims) {
  const auto& d = dims;
  const std::array<BlockInfo, kBlockCount> shapes = {{
      {"embedding", 0, d.vocab, d.embed},
      {"encoder.w1", 0, d.hidden, d.embed},
      {"encoder.b1", 0, d.hidden, 0},
      {"encoder.w2", 0, d.hidden, d.hidden},
      {"encoder.b2", 0, d.hidden, 0},
      {"projection.w1", 0, d.proj_hidden, d.hidden},
      {"projection.b1", 0, d.proj_hidden, 0},
      {"projection.w2", 0, d.proj, d.proj_hidden},
      {"projection.b2", 0, d.proj, 0},
      {"classifier.w", 0, 1, d.hidden},
      {"classifier.b", 0, 1, 0},
  }};
  std::size_t offset = 0;
  for (std::size_t i = 0; i < kBlockCount; ++i) {
    blocks_[i] = shapes[i];
    blocks_[i].offset = offset;
    offset += blocks_[i].size();
  }
  total_ = offset;
}

void round_to_f32(std::span<double> values) {
  for (auto& v : values) v = static_cast<double>(static_cast<float>(v));
}

ModelParams init_params(const ModelDims& dims, std::uint64_t seed) {
  ModelParams params(dims);
  const std::array<std::size_t, kBlockCount> fan_in = {
      1,          dims.embed,       dims.embed,       dims.hidden,  dims.hidden, dims.hidden,
      dims.hidden, dims.proj_hidden, dims.proj_hidden, dims.hidden, dims.hidden,
  };
  Rng rng(seed);
  for (std::size_t b = 0; b < kBlockCount; ++b) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in[b]));
    for (auto& v : params.block(static_cast<Block>(b))) v = rng.uniform(-bound, bound);
  }
  round_to_f32(params.values());
  return params;
}

void require_finite(const ModelParams& params, Block b) {
  require_finite_range(params.block(b), params.layout()[b].name);
}

std::vector<double> encode(std::span<const std::uint32_t> ids, const ModelParams& params,
                           EncodeCache* cache) {
  const auto& d = params.dims();
  const auto embedding = params.block(Block::embedding);
  for (Block b : {Block::encoder_w1, Block::encoder_b1, Block::encoder_w2, Block::encoder_b2}) {
    require_finite(params, b);
  }

  std::vector<double> pooled(d.embed, 0.0);
  for (std::uint32_t id : ids) {
    if (id >= d.vocab) throw UsageError("token id " + std::to_string(id) + " outside vocabulary");
    const auto row = embedding.subspan(static_cast<std::size_t>(id) * d.embed, d.embed);
    require_finite_range(row, "embedding");
    add_into(row, pooled);
  }
  if (!ids.empty()) {
    const double inv = 1.0 / static_cast<double>(ids.size());
    for (auto& v : pooled) v *= inv;
  }

  std::vector<double> hidden(params.block(Block::encoder_b1).begin(),
                             params.block(Block::encoder_b1).end());
  gemv_add(params.block(Block::encoder_w1), pooled, hidden);
  for (auto& v : hidden) v = std::tanh(v);

  std::vector<double> h(params.block(Block::encoder_b2).begin(), params.block(Block::encoder_b2).end());
  gemv_add(params.block(Block::encoder_w2), hidden, h);
  for (auto& v : h) v = std::tanh(v);

  if (cache != nullptr) {
    cache->ids.assign(ids.begin(), ids.end());
    cache->pooled = std::move(pooled);
    cache->hidden = std::move(hidden);
    cache->h = h;
  }
  return h;
}

std::vector<double> project(std::span<const double> h, const ModelParams& params,
                            ProjectCache* cache) {
  for (Block b : {Block::projection_w1, Block::projection_b1, Block::projection_w2,
                  Block::projection_b2}) {
    require_finite(params, b);
  }
  std::vector<double> mid(params.block(Block::projection_b1).begin(),
                          params.block(Block::projection_b1).end());
  gemv_add(params.block(Block::projection_w1), h, mid);
  for (auto& v : mid) v = std::tanh(v);

  std::vector<double> z(params.block(Block::projection_b2).begin(),
                        params.block(Block::projection_b2).end());
  gemv_add(params.block(Block::projection_w2), mid, z);

  if (cache != nullptr) {
    cache->h.assign(h.begin(), h.end());
    cache->mid = std::move(mid);
  }
  return z;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double classifier_logit(std::span<const double> h, const ModelParams& params) {
  require_finite(params, Block::classifier_w);
  require_finite(params, Block::classifier_b);
  const auto w = params.block(Block::classifier_w);
  double logit = params.block(Block::classifier_b)[0];
  for (std::size_t i = 0; i < h.size(); ++i) logit += w[i] * h[i];
  return logit;
}

double classify(std::span<const double> h, const ModelParams& params) {
  return sigmoid(classifier_logit(h, params));
}

void encode_backward(const EncodeCache& cache, std::span<const double> dh,
                     const ModelParams& params, Gradients& grads) {
  const auto& d = params.dims();
  std::vector<double> da2(d.hidden);
  for (std::size_t i = 0; i < d.hidden; ++i) da2[i] = dh[i] * (1.0 - cache.h[i] * cache.h[i]);
  outer_add(da2, cache.hidden, grads.block(Block::encoder_w2));
  add_into(da2, grads.block(Block::encoder_b2));

  std::vector<double> da1(d.hidden, 0.0);
  gemv_t_add(params.block(Block::encoder_w2), da2, da1);
  for (std::size_t i = 0; i < d.hidden; ++i) da1[i] *= 1.0 - cache.hidden[i] * cache.hidden[i];
  outer_add(da1, cache.pooled, grads.block(Block::encoder_w1));
  add_into(da1, grads.block(Block::encoder_b1));

  if (cache.ids.empty()) return;
  std::vector<double> dpooled(d.embed, 0.0);
  gemv_t_add(params.block(Block::encoder_w1), da1, dpooled);
  const double inv = 1.0 / static_cast<double>(cache.ids.size());
  for (auto& v : dpooled) v *= inv;
  auto emb = grads.block(Block::embedding);
  for (std::uint32_t id : cache.ids) {
    add_into(dpooled, emb.subspan(static_cast<std::size_t>(id) * d.embed, d.embed));
  }
}

void project_backward(const ProjectCache& cache, std::span<const double> dz,
                      const ModelParams& params, Gradients& grads, std::span<double> dh) {
  const auto& d = params.dims();
  outer_add(dz, cache.mid, grads.block(Block::projection_w2));
  add_into(dz, grads.block(Block::projection_b2));

  std::vector<double> dmid(d.proj_hidden, 0.0);
  gemv_t_add(params.block(Block::projection_w2), dz, dmid);
  for (std::size_t i = 0; i < d.proj_hidden; ++i) dmid[i] *= 1.0 - cache.mid[i] * cache.mid[i];
  outer_add(dmid, cache.h, grads.block(Block::projection_w1));
  add_into(dmid, grads.block(Block::projection_b1));
  gemv_t_add(params.block(Block::projection_w1), dmid, dh);
}

void classify_backward(std::span<const double> h, double dlogit, const ModelParams& params,
                       Gradients& grads, std::span<double> dh) {
  auto gw = grads.block(Block::classifier_w);
  const auto w = params.block(Block::classifier_w);
  for (std::size_t i = 0; i < h.size(); ++i) {
    gw[i] += dlogit * h[i];
    dh[i] += dlogit * w[i];
  }
  grads.block(Block::classifier_b)[0] += dlogit;
}

}  // namespace condet
