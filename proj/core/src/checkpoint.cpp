// Copyright 2026 The DistillForge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <bit>
#include <fstream>
#include <sstream>

#include "distillforge/errors.hpp"
#include "distillforge/pipeline.hpp"
#include "json.hpp"

namespace distillforge {

// Layout (all integers little-endian):
//   "DFCK" u32 version u32 stage u64 step
//   model:     u32 base u32 hidden u32 depth u32 heads[4] u32 vision u8 activation
//   params:    u32 count, then per parameter
//              u16 name_len name u8 group u32 rows u32 cols f64[rows*cols]
//   optimizer: f64 beta1 beta2 eps weight_decay, u64 step, f64 m[...] v[...]
//              for every parameter in order
//   rng:       u64 batch_seed u64 epoch u64 position
//   u16 digest_len digest  u32 config_len config_json  u32 tail_len metrics_tail

namespace {

constexpr char kMagic[4] = {'D', 'F', 'C', 'K'};

class Writer {
 public:
  template <typename T>
  void u(T v) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::string_view s) { out_.append(s); }
  void blob(const Matrix& m) {
    for (double v : m.data()) f64(v);
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}

  template <typename T>
  T u(const char* what) {
    need(sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<T>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u<std::uint64_t>(what)); }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(b_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  void blob(Matrix& m, const char* what) {
    need(m.size() * 8, what);
    for (double& v : m.data()) v = f64(what);
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (b_.size() - pos_ < n) throw FormatError(std::string("checkpoint truncated in ") + what, pos_);
  }
  std::string_view b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  Writer w;
  w.bytes(std::string_view(kMagic, 4));
  w.u<std::uint32_t>(Checkpoint::kFormatVersion);
  w.u<std::uint32_t>(static_cast<std::uint32_t>(c.stage));
  w.u<std::uint64_t>(c.step);

  const auto& mc = c.net.config();
  w.u<std::uint32_t>(static_cast<std::uint32_t>(mc.base_dim));
  w.u<std::uint32_t>(static_cast<std::uint32_t>(mc.hidden_dim));
  w.u<std::uint32_t>(static_cast<std::uint32_t>(mc.tail_depth));
  for (auto d : mc.head_dims) w.u<std::uint32_t>(static_cast<std::uint32_t>(d));
  w.u<std::uint32_t>(static_cast<std::uint32_t>(mc.vision_dim));
  w.u<std::uint8_t>(static_cast<std::uint8_t>(mc.activation));

  const auto& ps = c.net.params();
  w.u<std::uint32_t>(static_cast<std::uint32_t>(ps.size()));
  for (const auto& p : ps) {
    w.u<std::uint16_t>(static_cast<std::uint16_t>(p.name.size()));
    w.bytes(p.name);
    w.u<std::uint8_t>(static_cast<std::uint8_t>(p.group));
    w.u<std::uint32_t>(static_cast<std::uint32_t>(p.value.rows()));
    w.u<std::uint32_t>(static_cast<std::uint32_t>(p.value.cols()));
    w.blob(p.value);
  }

  const auto& o = c.optimizer;
  if (o.first_moment.size() != ps.size() || o.second_moment.size() != ps.size())
    throw ShapeMismatch("checkpoint: optimizer state does not match the network");
  w.f64(o.hp.beta1);
  w.f64(o.hp.beta2);
  w.f64(o.hp.eps);
  w.f64(o.hp.weight_decay);
  w.u<std::uint64_t>(o.step);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (!o.first_moment[i].same_shape(ps[i].value) || !o.second_moment[i].same_shape(ps[i].value))
      throw ShapeMismatch("checkpoint: optimizer moment shape for " + ps[i].name);
    w.blob(o.first_moment[i]);
    w.blob(o.second_moment[i]);
  }

  w.u<std::uint64_t>(c.batch_seed);
  w.u<std::uint64_t>(c.cursor.epoch);
  w.u<std::uint64_t>(c.cursor.position);
  w.u<std::uint16_t>(static_cast<std::uint16_t>(c.config_digest.size()));
  w.bytes(c.config_digest);
  w.u<std::uint32_t>(static_cast<std::uint32_t>(c.config_json.size()));
  w.bytes(c.config_json);
  w.u<std::uint32_t>(static_cast<std::uint32_t>(c.metrics_tail.size()));
  w.bytes(c.metrics_tail);
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.bytes(4, "magic") != std::string_view(kMagic, 4)) throw FormatError("not a checkpoint (bad magic)", 0);
  const auto version = r.u<std::uint32_t>("version");
  if (version != Checkpoint::kFormatVersion) {
    throw VersionMismatch("checkpoint format version " + std::to_string(version) +
                              ", expected " + std::to_string(Checkpoint::kFormatVersion),
                          4);
  }
  Checkpoint c;
  c.stage = static_cast<int>(r.u<std::uint32_t>("stage"));
  c.step = r.u<std::uint64_t>("step");

  ModelConfig mc;
  mc.base_dim = r.u<std::uint32_t>("model config");
  mc.hidden_dim = r.u<std::uint32_t>("model config");
  mc.tail_depth = r.u<std::uint32_t>("model config");
  for (auto& d : mc.head_dims) d = r.u<std::uint32_t>("model config");
  mc.vision_dim = r.u<std::uint32_t>("model config");
  const auto act = r.u<std::uint8_t>("model config");
  if (act > 1) throw FormatError("unknown activation code", r.pos() - 1);
  mc.activation = static_cast<Activation>(act);
  try {
    mc.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid model config: ") + e.what(), r.pos());
  }
  StudentNet net = StudentNet::zeros(mc);
  auto& ps = net.params();

  const auto count = r.u<std::uint32_t>("parameter count");
  if (count != ps.size()) throw FormatError("parameter count does not match model config", r.pos());
  for (auto& p : ps) {
    const auto len = r.u<std::uint16_t>("parameter name");
    const auto name = r.bytes(len, "parameter name");
    const auto group = r.u<std::uint8_t>("parameter group");
    const auto rows = r.u<std::uint32_t>("parameter shape");
    const auto cols = r.u<std::uint32_t>("parameter shape");
    if (name != p.name || group != static_cast<std::uint8_t>(p.group) || rows != p.value.rows() ||
        cols != p.value.cols()) {
      throw FormatError("parameter table entry '" + name + "' does not match the model layout", r.pos());
    }
    r.blob(p.value, "parameter values");
  }

  OptimizerState& o = c.optimizer;
  o.hp.beta1 = r.f64("optimizer");
  o.hp.beta2 = r.f64("optimizer");
  o.hp.eps = r.f64("optimizer");
  o.hp.weight_decay = r.f64("optimizer");
  o.step = r.u<std::uint64_t>("optimizer");
  for (const auto& p : ps) {
    Matrix m(p.value.rows(), p.value.cols());
    Matrix v(p.value.rows(), p.value.cols());
    r.blob(m, "optimizer moments");
    r.blob(v, "optimizer moments");
    o.first_moment.push_back(std::move(m));
    o.second_moment.push_back(std::move(v));
  }

  c.batch_seed = r.u<std::uint64_t>("rng cursors");
  c.cursor.epoch = r.u<std::uint64_t>("rng cursors");
  c.cursor.position = r.u<std::uint64_t>("rng cursors");
  c.config_digest = r.bytes(r.u<std::uint16_t>("config digest"), "config digest");
  c.config_json = r.bytes(r.u<std::uint32_t>("config"), "config");
  c.metrics_tail = r.bytes(r.u<std::uint32_t>("metrics tail"), "metrics tail");
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint", r.pos());
  c.net = std::move(net);
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("failed writing checkpoint " + path.string());
  }
  nlohmann::ordered_json side;
  side["format_version"] = Checkpoint::kFormatVersion;
  side["stage"] = ckpt.stage;
  side["step"] = ckpt.step;
  side["config_digest"] = ckpt.config_digest;
  side["config"] = ckpt.config_json.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json::parse(ckpt.config_json);
  std::ofstream js(path.string() + ".json", std::ios::binary | std::ios::trunc);
  js << side.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace distillforge
