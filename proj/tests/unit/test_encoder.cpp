#include <doctest.h>

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include "condet/encoder.hpp"
#include "condet/error.hpp"
#include "condet/optim.hpp"
#include "condet/random.hpp"
#include "helpers.hpp"

using namespace condet;

namespace {

ModelDims small_dims(std::mt19937_64& gen) {
  ModelDims d;
  d.vocab = 17 + gen() % 40;
  d.embed = 1 + gen() % 8;
  d.hidden = 1 + gen() % 16;
  d.proj_hidden = 1 + gen() % 10;
  d.proj = 1 + gen() % 8;
  return d;
}

ModelParams random_params(const ModelDims& d, std::mt19937_64& gen) {
  ModelParams p(d);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& v : p.values()) v = u(gen);
  return p;
}

// Straight-line forward pass written against the documented layout only.
struct Oracle {
  const ModelParams& p;
  const ModelDims& d;

  double at(Block b, std::size_t r, std::size_t c) const { return p.block(b)[r * p.layout()[b].cols + c]; }
  double at(Block b, std::size_t i) const { return p.block(b)[i]; }

  std::vector<double> h(const std::vector<std::uint32_t>& ids) const {
    std::vector<double> pooled(d.embed, 0.0);
    for (auto id : ids) {
      for (std::size_t c = 0; c < d.embed; ++c) pooled[c] += at(Block::embedding, id, c);
    }
    for (auto& v : pooled) v = ids.empty() ? 0.0 : v / static_cast<double>(ids.size());
    std::vector<double> a(d.hidden), out(d.hidden);
    for (std::size_t r = 0; r < d.hidden; ++r) {
      double s = at(Block::encoder_b1, r);
      for (std::size_t c = 0; c < d.embed; ++c) s += at(Block::encoder_w1, r, c) * pooled[c];
      a[r] = std::tanh(s);
    }
    for (std::size_t r = 0; r < d.hidden; ++r) {
      double s = at(Block::encoder_b2, r);
      for (std::size_t c = 0; c < d.hidden; ++c) s += at(Block::encoder_w2, r, c) * a[c];
      out[r] = std::tanh(s);
    }
    return out;
  }
  std::vector<double> z(const std::vector<double>& h) const {
    std::vector<double> mid(d.proj_hidden), out(d.proj);
    for (std::size_t r = 0; r < d.proj_hidden; ++r) {
      double s = at(Block::projection_b1, r);
      for (std::size_t c = 0; c < d.hidden; ++c) s += at(Block::projection_w1, r, c) * h[c];
      mid[r] = std::tanh(s);
    }
    for (std::size_t r = 0; r < d.proj; ++r) {
      double s = at(Block::projection_b2, r);
      for (std::size_t c = 0; c < d.proj_hidden; ++c) s += at(Block::projection_w2, r, c) * mid[c];
      out[r] = s;
    }
    return out;
  }
  double prob(const std::vector<double>& h) const {
    double s = at(Block::classifier_b, 0);
    for (std::size_t c = 0; c < d.hidden; ++c) s += at(Block::classifier_w, 0, c) * h[c];
    return 1.0 / (1.0 + std::exp(-s));
  }
};

std::vector<std::uint32_t> random_ids(std::size_t vocab, std::mt19937_64& gen) {
  std::vector<std::uint32_t> ids(gen() % 12);
  for (auto& id : ids) id = static_cast<std::uint32_t>(gen() % vocab);
  return ids;
}

}  // namespace

TEST_CASE("tokenize") {
  TokenizerConfig tok;
  CHECK(tokenize("", tok).empty());
  CHECK(tokenize("Hello, world!", tok) == tokenize("hello world", tok));
  CHECK(tokenize("Hello, world!", tok).size() == 2);
  CHECK(tokenize("caf\xc3\xa9 au lait", tok).size() == 3);
  const auto ids = tokenize("the cat sat on the mat", tok);
  CHECK(ids[0] == ids[4]);
  CHECK(ids[0] == fnv1a64("the") % tok.vocab_size);
  std::string long_text;
  for (int i = 0; i < 300; ++i) long_text += "w" + std::to_string(i) + " ";
  CHECK(tokenize(long_text, tok).size() == 256);
  tok.vocab_size = 7;
  for (auto id : tokenize(long_text, tok)) CHECK(id < 7);
}

TEST_CASE("layout sizes add up and defaults match the stated dims") {
  const ModelDims d;
  const ParamLayout layout(d);
  std::size_t sum = 0;
  for (const auto& b : layout.blocks()) sum += b.size();
  CHECK(layout.total() == sum);
  CHECK(layout[Block::projection_w2].rows == 300);
  CHECK(layout[Block::embedding].size() == 8192 * 64);
}

TEST_CASE("forward passes match a duplicate straight-line implementation") {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 30; ++trial) {
    const ModelDims d = small_dims(gen);
    const ModelParams p = random_params(d, gen);
    const Oracle oracle{p, d};
    for (int k = 0; k < 3; ++k) {
      const auto ids = random_ids(d.vocab, gen);
      const auto h = encode(ids, p);
      const auto want_h = oracle.h(ids);
      REQUIRE(h.size() == d.hidden);
      for (std::size_t i = 0; i < h.size(); ++i) CHECK(std::abs(h[i] - want_h[i]) <= 1e-12);
      const auto z = project(h, p);
      const auto want_z = oracle.z(want_h);
      REQUIRE(z.size() == d.proj);
      for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::abs(z[i] - want_z[i]) <= 1e-12);
      CHECK(std::abs(classify(h, p) - oracle.prob(want_h)) <= 1e-12);
    }
  }
}

TEST_CASE("zero parameters give an input-independent h and p = 0.5") {
  ModelDims d;
  d.vocab = 50;
  d.embed = 4;
  d.hidden = 6;
  d.proj_hidden = 5;
  d.proj = 3;
  ModelParams p(d);
  const std::vector<std::uint32_t> a = {1, 2, 3}, b = {7};
  CHECK(encode(a, p) == encode(b, p));
  CHECK(encode(a, p) == std::vector<double>(6, 0.0));
  CHECK(classify(encode(a, p), p) == 0.5);
  CHECK(project(encode(a, p), p) == std::vector<double>(3, 0.0));

  for (auto& v : p.block(Block::encoder_b2)) v = 0.3;
  CHECK(encode(a, p) == std::vector<double>(6, std::tanh(0.3)));
  CHECK(encode(a, p) == encode(std::vector<std::uint32_t>{}, p));
}

TEST_CASE("mean pooling is order invariant") {
  std::mt19937_64 gen(5);
  const ModelDims d = small_dims(gen);
  const ModelParams p = random_params(d, gen);
  std::vector<std::uint32_t> ids = {1, 4, 9, 16, 3, 3};
  const auto h = encode(ids, p);
  std::reverse(ids.begin(), ids.end());
  const auto h2 = encode(ids, p);
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(h[i] == doctest::Approx(h2[i]).epsilon(1e-14));
}

TEST_CASE("classifier bias drives p monotonically to 1") {
  ModelDims d;
  d.vocab = 10;
  d.embed = 2;
  d.hidden = 3;
  d.proj_hidden = 2;
  d.proj = 2;
  ModelParams p(d);
  const std::vector<double> h = {0.1, -0.2, 0.3};
  double last = 0.0;
  for (double bias : {-5.0, 0.0, 2.0, 10.0, 40.0}) {
    p.block(Block::classifier_b)[0] = bias;
    const double prob = classify(h, p);
    CHECK(prob > last);
    CHECK(prob <= 1.0);
    last = prob;
  }
  CHECK(last == doctest::Approx(1.0));
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(std::isfinite(sigmoid(-800.0)));
  CHECK(sigmoid(800.0) == 1.0);
}

TEST_CASE("non-finite parameters are reported by block") {
  std::mt19937_64 gen(1);
  const ModelDims d = small_dims(gen);
  ModelParams p = random_params(d, gen);
  p.block(Block::encoder_w2)[0] = std::nan("");
  CHECK_THROWS_WITH_AS(encode(std::vector<std::uint32_t>{0}, p), "non-finite value in parameter block encoder.w2",
                       NumericalError);
}

TEST_CASE("init is seeded, bounded by fan-in, and f32-exact") {
  ModelDims d;
  d.vocab = 40;
  d.embed = 9;
  d.hidden = 16;
  d.proj_hidden = 4;
  d.proj = 8;
  const auto a = init_params(d, 3);
  CHECK(a == init_params(d, 3));
  CHECK_FALSE(a == init_params(d, 4));
  for (double v : a.block(Block::embedding)) CHECK(std::abs(v) <= 1.0);
  for (double v : a.block(Block::encoder_w1)) CHECK(std::abs(v) <= 1.0 / 3.0 + 1e-7);
  for (double v : a.block(Block::projection_w1)) CHECK(std::abs(v) <= 0.25 + 1e-7);
  for (double v : a.values()) CHECK(static_cast<double>(static_cast<float>(v)) == v);
}

TEST_CASE("checkpoint round trip is bit-identical") {
  testutil::TempDir dir("condet_ckpt");
  ModelDims d;
  d.vocab = 30;
  d.embed = 4;
  d.hidden = 5;
  d.proj_hidden = 3;
  d.proj = 2;
  const auto p = init_params(d, 9);
  save_checkpoint(p, dir / "m.cnda");
  CHECK(load_checkpoint(dir / "m.cnda") == p);
  CHECK(load_checkpoint(dir / "m.cnda", d) == p);
  save_checkpoint(p, dir / "m2.cnda");
  CHECK(testutil::read_file(dir / "m.cnda") == testutil::read_file(dir / "m2.cnda"));

  AdamState state = AdamState::zeros(p.size());
  state.step = 12;
  state.m[3] = 0.25;
  state.v[4] = 0.5;
  save_checkpoint(p, dir / "s.cnda", &state);
  AdamState back;
  CHECK(load_checkpoint(dir / "s.cnda", &back) == p);
  CHECK(back == state);
  AdamState none;
  CHECK_THROWS_AS(load_checkpoint(dir / "m.cnda", &none), DataError);
}

TEST_CASE("checkpoint layout matches the documented byte format") {
  testutil::TempDir dir("condet_ckpt_fmt");
  ModelDims d;
  d.vocab = 3;
  d.embed = 2;
  d.hidden = 2;
  d.proj_hidden = 2;
  d.proj = 2;
  const auto p = init_params(d, 1);
  save_checkpoint(p, dir / "m.cnda");
  const std::string bytes = testutil::read_file(dir / "m.cnda");
  std::size_t pos = 0;
  auto u32 = [&] {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * i);
    return v;
  };
  auto u64 = [&] {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * i);
    return v;
  };
  CHECK(bytes.substr(0, 4) == "CNDA");
  pos = 4;
  CHECK(u32() == 1);
  REQUIRE(u32() == kBlockCount);
  std::string payload;
  for (const auto& info : p.layout().blocks()) {
    const auto len = u32();
    CHECK(bytes.substr(pos, len) == info.name);
    pos += len;
    const auto rank = u32();
    CHECK(rank == (info.cols == 0 ? 1u : 2u));
    std::uint64_t count = 1;
    for (std::uint32_t r = 0; r < rank; ++r) count *= u64();
    CHECK(count == info.size());
    for (std::size_t i = 0; i < count; ++i) {
      float f;
      std::memcpy(&f, bytes.data() + pos, 4);
      CHECK(static_cast<double>(f) == p.values()[info.offset + i]);
      pos += 4;
    }
    payload += bytes.substr(pos - 4 * count, 4 * count);
  }
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size()));
  CHECK(u32() == static_cast<std::uint32_t>(crc));
  CHECK(pos == bytes.size());
}

TEST_CASE("checkpoint errors") {
  testutil::TempDir dir("condet_ckpt_err");
  ModelDims d;
  d.vocab = 20;
  d.embed = 4;
  d.hidden = 64;
  d.proj_hidden = 3;
  d.proj = 2;
  const auto p = init_params(d, 2);
  save_checkpoint(p, dir / "m.cnda");
  const std::string bytes = testutil::read_file(dir / "m.cnda");

  testutil::write_file(dir / "trunc.cnda", bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_WITH_AS(load_checkpoint(dir / "trunc.cnda"), doctest::Contains("truncated checkpoint"), DataError);

  std::string bad = bytes;
  bad[0] = 'X';
  testutil::write_file(dir / "magic.cnda", bad);
  CHECK_THROWS_WITH_AS(load_checkpoint(dir / "magic.cnda"), doctest::Contains("bad magic"), DataError);

  bad = bytes;
  bad[4] = 2;
  testutil::write_file(dir / "ver.cnda", bad);
  CHECK_THROWS_WITH_AS(load_checkpoint(dir / "ver.cnda"), doctest::Contains("version"), DataError);

  bad = bytes;
  bad[bytes.size() - 6] ^= 0x5a;  // inside the last f32 payload
  testutil::write_file(dir / "crc.cnda", bad);
  CHECK_THROWS_WITH_AS(load_checkpoint(dir / "crc.cnda"), doctest::Contains("CRC mismatch"), DataError);

  testutil::write_file(dir / "tail.cnda", bytes + "x");
  CHECK_THROWS_AS(load_checkpoint(dir / "tail.cnda"), DataError);

  ModelDims want = d;
  want.hidden = 128;
  try {
    load_checkpoint(dir / "m.cnda", want);
    FAIL("expected a shape error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("shape mismatch") != std::string::npos);
    CHECK(msg.find("64") != std::string::npos);
    CHECK(msg.find("128") != std::string::npos);
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.cnda"), DataError);
}
