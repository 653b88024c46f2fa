#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace condet {

struct TokenizerConfig {
  std::size_t vocab_size = 8192;
  std::size_t max_seq_len = 256;
};

// Lowercased split on anything that is not an ASCII letter/digit (bytes >= 0x80
// stay inside words), FNV-1a hash modulo vocab_size, truncated to max_seq_len.
std::vector<std::uint32_t> tokenize(std::string_view text, const TokenizerConfig& config);

struct ModelDims {
  std::size_t vocab = 8192;
  std::size_t embed = 64;
  std::size_t hidden = 128;
  std::size_t proj_hidden = 128;
  std::size_t proj = 300;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

enum class Block : std::size_t {
  embedding,
  encoder_w1,
  encoder_b1,
  encoder_w2,
  encoder_b2,
  projection_w1,
  projection_b1,
  projection_w2,
  projection_b2,
  classifier_w,
  classifier_b,
};
inline constexpr std::size_t kBlockCount = 11;

struct BlockInfo {
  std::string_view name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;  // 0 for vectors
  std::size_t size() const { return cols == 0 ? rows : rows * cols; }
};

// Shape table for the flat parameter vector. Blocks are stored back to back in
// the order of the Block enum, matrices row-major as [out, in].
class ParamLayout {
 public:
  ParamLayout() = default;
  explicit ParamLayout(const ModelDims& dims);

  const ModelDims& dims() const { return dims_; }
  const BlockInfo& operator[](Block b) const { return blocks_[static_cast<std::size_t>(b)]; }
  const std::array<BlockInfo, kBlockCount>& blocks() const { return blocks_; }
  std::size_t total() const { return total_; }

  friend bool operator==(const ParamLayout& a, const ParamLayout& b) { return a.dims_ == b.dims_; }

 private:
  ModelDims dims_{};
  std::array<BlockInfo, kBlockCount> blocks_{};
  std::size_t total_ = 0;
};

// One flat, shape-tagged vector. Parameters and gradients share the layout but
// are distinct types.
template <class Tag>
class FlatVector {
 public:
  FlatVector() = default;
  explicit FlatVector(const ModelDims& dims) : layout_(dims), values_(layout_.total(), 0.0) {}

  const ParamLayout& layout() const { return layout_; }
  const ModelDims& dims() const { return layout_.dims(); }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::span<double> block(Block b) {
    const auto& info = layout_[b];
    return {values_.data() + info.offset, info.size()};
  }
  std::span<const double> block(Block b) const {
    const auto& info = layout_[b];
    return {values_.data() + info.offset, info.size()};
  }

  friend bool operator==(const FlatVector& a, const FlatVector& b) {
    return a.layout_ == b.layout_ && a.values_ == b.values_;
  }

 private:
  ParamLayout layout_;
  std::vector<double> values_;
};

using ModelParams = FlatVector<struct ParamsTag>;
using Gradients = FlatVector<struct GradientsTag>;

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], block by block, element by
// element, rounded to f32. The embedding lookup counts as fan_in = 1.
ModelParams init_params(const ModelDims& dims, std::uint64_t seed);

// Rounds every value to the nearest f32 so checkpoints round-trip exactly.
void round_to_f32(std::span<double> values);

// Throws NumericalError naming the block if any value in `b` is non-finite.
void require_finite(const ModelParams& params, Block b);

struct EncodeCache {
  std::vector<std::uint32_t> ids;
  std::vector<double> pooled;  // embed
  std::vector<double> hidden;  // tanh of first encoder layer
  std::vector<double> h;       // document representation
};

struct ProjectCache {
  std::vector<double> h;
  std::vector<double> mid;  // tanh hidden layer of the projection head
};

// Mean-pooled embeddings -> tanh(W1 . + b1) -> tanh(W2 . + b2) = h.
// An empty id sequence pools to the zero vector.
std::vector<double> encode(std::span<const std::uint32_t> ids, const ModelParams& params,
                           EncodeCache* cache = nullptr);

// z = P2 tanh(P1 h + p1) + p2.
std::vector<double> project(std::span<const double> h, const ModelParams& params,
                            ProjectCache* cache = nullptr);

double classifier_logit(std::span<const double> h, const ModelParams& params);
double classify(std::span<const double> h, const ModelParams& params);
double sigmoid(double x);

// Backward passes accumulate into `grads` and return or add dL/dh.
void encode_backward(const EncodeCache& cache, std::span<const double> dh,
                     const ModelParams& params, Gradients& grads);
void project_backward(const ProjectCache& cache, std::span<const double> dz,
                      const ModelParams& params, Gradients& grads, std::span<double> dh);
void classify_backward(std::span<const double> h, double dlogit, const ModelParams& params,
                       Gradients& grads, std::span<double> dh);

// ---------------------------------------------------------------------------
// Checkpoints
//
//   "CNDA" | u32 version = 1 | u32 tensor count
//   per tensor: u32 name length | name bytes | u32 rank | u64 dims[rank] | f32 payload
//   u32 CRC32 over all payload bytes, in tensor order
//
// All integers and floats little-endian.

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<float> data;
};

void write_tensors(const std::vector<NamedTensor>& tensors, const std::filesystem::path& path);
std::vector<NamedTensor> read_tensors(const std::filesystem::path& path);

struct AdamState;

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                     const AdamState* optimizer = nullptr);

// Infers dims from the tensor shapes.
ModelParams load_checkpoint(const std::filesystem::path& path, AdamState* optimizer = nullptr);

// Rejects checkpoints whose shapes differ from `expected`.
ModelParams load_checkpoint(const std::filesystem::path& path, const ModelDims& expected,
                            AdamState* optimizer = nullptr);

}  // namespace condet
