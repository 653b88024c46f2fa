#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <zlib.h>

#include "condet/encoder.hpp"
#include "condet/error.hpp"
#include "condet/optim.hpp"

namespace condet {
namespace {

constexpr std::array<char, 4> kMagic = {'C', 'N', 'D', 'A'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    buffer_.insert(buffer_.end(), p, p + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buffer_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buffer_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  std::size_t f32_array(const std::vector<float>& values) {
    const std::size_t start = buffer_.size();
    for (float f : values) u32(std::bit_cast<std::uint32_t>(f));
    return start;
  }
  std::vector<unsigned char>& buffer() { return buffer_; }

 private:
  std::vector<unsigned char> buffer_;
};

class Reader {
 public:
  Reader(std::vector<unsigned char> data, std::string source)
      : data_(std::move(data)), source_(std::move(source)) {}

  const unsigned char* take(std::size_t n) {
    if (data_.size() - pos_ < n) throw DataError(source_ + ": truncated checkpoint");
    const unsigned char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32() {
    const auto* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  bool done() const { return pos_ == data_.size(); }
  const std::string& source() const { return source_; }

 private:
  std::vector<unsigned char> data_;
  std::size_t pos_ = 0;
  std::string source_;
};

std::vector<std::uint64_t> block_shape(const BlockInfo& info) {
  if (info.cols == 0) return {info.rows};
  return {info.rows, info.cols};
}

std::string shape_string(const std::vector<std::uint64_t>& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? ", " : "") << shape[i];
  out << "]";
  return out.str();
}

NamedTensor to_tensor(std::string name, std::vector<std::uint64_t> shape,
                      std::span<const double> values) {
  NamedTensor t{std::move(name), std::move(shape), {}};
  t.data.reserve(values.size());
  for (double v : values) t.data.push_back(static_cast<float>(v));
  return t;
}

const NamedTensor& find_tensor(const std::vector<NamedTensor>& tensors, std::string_view name,
                               const std::filesystem::path& path) {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw DataError(path.string() + ": missing tensor '" + std::string(name) + "'");
}

ModelDims infer_dims(const std::vector<NamedTensor>& tensors, const std::filesystem::path& path) {
  auto dim = [&](std::string_view name, std::size_t axis) -> std::size_t {
    const auto& t = find_tensor(tensors, name, path);
    if (axis >= t.shape.size()) throw DataError(path.string() + ": bad rank for '" + std::string(name) + "'");
    return static_cast<std::size_t>(t.shape[axis]);
  };
  ModelDims dims;
  dims.vocab = dim("embedding", 0);
  dims.embed = dim("embedding", 1);
  dims.hidden = dim("encoder.w1", 0);
  dims.proj_hidden = dim("projection.w1", 0);
  dims.proj = dim("projection.w2", 0);
  return dims;
}

void read_optimizer(const std::vector<NamedTensor>& tensors, std::size_t n,
                    const std::filesystem::path& path, AdamState& state) {
  const auto& m = find_tensor(tensors, "adam.m", path);
  const auto& v = find_tensor(tensors, "adam.v", path);
  const auto& step = find_tensor(tensors, "adam.step", path);
  if (m.data.size() != n || v.data.size() != n || step.data.size() != 1) {
    throw DataError(path.string() + ": optimizer state does not match parameter count");
  }
  state.m.assign(m.data.begin(), m.data.end());
  state.v.assign(v.data.begin(), v.data.end());
  state.step = static_cast<std::uint64_t>(step.data[0]);
}

}  // namespace

void write_tensors(const std::vector<NamedTensor>& tensors, const std::filesystem::path& path) {
  Writer w;
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  uLong crc = crc32(0L, Z_NULL, 0);
  for (const auto& t : tensors) {
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto dim : t.shape) w.u64(dim);
    const std::size_t start = w.f32_array(t.data);
    crc = crc32(crc, w.buffer().data() + start, static_cast<uInt>(w.buffer().size() - start));
  }
  w.u32(static_cast<std::uint32_t>(crc));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(w.buffer().data()),
            static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

std::vector<NamedTensor> read_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path.string());

  const auto* magic = r.take(4);
  if (std::memcmp(magic, kMagic.data(), 4) != 0) throw DataError(path.string() + ": bad magic");
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version) +
                    " (expected " + std::to_string(kVersion) + ")");
  }
  const std::uint32_t count = r.u32();
  std::vector<NamedTensor> tensors;
  uLong crc = crc32(0L, Z_NULL, 0);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const std::uint32_t name_len = r.u32();
    const auto* name = r.take(name_len);
    t.name.assign(reinterpret_cast<const char*>(name), name_len);
    const std::uint32_t rank = r.u32();
    std::uint64_t elements = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      t.shape.push_back(r.u64());
      elements *= t.shape.back();
    }
    if (elements > (std::uint64_t{1} << 40)) throw DataError(path.string() + ": implausible tensor size");
    const auto* payload = r.take(static_cast<std::size_t>(elements) * 4);
    crc = crc32(crc, payload, static_cast<uInt>(elements * 4));
    t.data.resize(static_cast<std::size_t>(elements));
    for (std::size_t e = 0; e < t.data.size(); ++e) {
      std::uint32_t raw = 0;
      for (int b = 0; b < 4; ++b) raw |= static_cast<std::uint32_t>(payload[e * 4 + b]) << (8 * b);
      t.data[e] = std::bit_cast<float>(raw);
    }
    tensors.push_back(std::move(t));
  }
  const std::uint32_t stored = r.u32();
  if (stored != static_cast<std::uint32_t>(crc)) throw DataError(path.string() + ": CRC mismatch");
  if (!r.done()) throw DataError(path.string() + ": trailing bytes after checkpoint");
  return tensors;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                     const AdamState* optimizer) {
  std::vector<NamedTensor> tensors;
  for (const auto& info : params.layout().blocks()) {
    tensors.push_back(to_tensor(std::string(info.name), block_shape(info),
                                params.values().subspan(info.offset, info.size())));
  }
  if (optimizer != nullptr) {
    const std::uint64_t n = params.size();
    tensors.push_back(to_tensor("adam.m", {n}, optimizer->m));
    tensors.push_back(to_tensor("adam.v", {n}, optimizer->v));
    const double step = static_cast<double>(optimizer->step);
    tensors.push_back(to_tensor("adam.step", {1}, std::span<const double>(&step, 1)));
  }
  write_tensors(tensors, path);
}

namespace {

ModelParams params_from_tensors(const std::vector<NamedTensor>& tensors, const ModelDims& expected,
                                const std::filesystem::path& path, AdamState* optimizer) {
  ModelParams params(expected);
  for (const auto& info : params.layout().blocks()) {
    const auto& t = find_tensor(tensors, info.name, path);
    const auto want = block_shape(info);
    if (t.shape != want) {
      throw DataError(path.string() + ": shape mismatch for '" + std::string(info.name) +
                      "': checkpoint has " + shape_string(t.shape) + ", config expects " +
                      shape_string(want));
    }
    auto dst = params.block(static_cast<Block>(&info - params.layout().blocks().data()));
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<double>(t.data[i]);
  }
  if (optimizer != nullptr) read_optimizer(tensors, params.size(), path, *optimizer);
  return params;
}

}  // namespace

ModelParams load_checkpoint(const std::filesystem::path& path, AdamState* optimizer) {
  const auto tensors = read_tensors(path);
  return params_from_tensors(tensors, infer_dims(tensors, path), path, optimizer);
}

ModelParams load_checkpoint(const std::filesystem::path& path, const ModelDims& expected,
                            AdamState* optimizer) {
  return params_from_tensors(read_tensors(path), expected, path, optimizer);
}

}  // namespace condet
