#include "tanp/checkpoint.hpp"

#include "tanp/io.hpp"

#include <bit>
#include <cstring>

namespace tanp {
namespace {

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void text(const std::string& s) {
    if (s.size() > UINT32_MAX) throw CheckpointError("string too long for checkpoint");
    u32(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void raw(const char* data, std::size_t n) { out_.append(data, n); }
  std::string take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string text() {
    const auto n = u32();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void expect(const char* data, std::size_t n) {
    need(n);
    if (std::memcmp(in_.data() + pos_, data, n) != 0) throw CheckpointError("not a checkpoint file (bad magic)");
    pos_ += n;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw CheckpointError("truncated checkpoint");
  }
  std::uint64_t get(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

Matrix scalar_tensor(double v) { return Matrix::Constant(1, 1, v); }

}  // namespace

const Matrix& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return m;
  }
  throw CheckpointError("checkpoint has no tensor '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.first == name) return true;
  }
  return false;
}

std::string serialize(const Checkpoint& checkpoint) {
  Writer w;
  w.raw(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u32(checkpoint.version);
  w.text(checkpoint.config_text);
  w.u32(static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& [name, m] : checkpoint.tensors) {
    w.text(name);
    w.u32(2);
    w.u64(static_cast<std::uint64_t>(m.rows()));
    w.u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) w.f64(m.data()[i]);
  }
  return w.take();
}

Checkpoint deserialize(const std::string& bytes) {
  Reader r(bytes);
  r.expect(kCheckpointMagic, sizeof(kCheckpointMagic));
  Checkpoint c;
  c.version = r.u32();
  if (c.version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(c.version) + " (this build reads version " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  c.config_text = r.text();
  const auto count = r.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    auto name = r.text();
    const auto rank = r.u32();
    if (rank > 2) throw CheckpointError("tensor '" + name + "' has unsupported rank " + std::to_string(rank));
    std::uint64_t dims[2] = {1, 1};
    for (std::uint32_t d = 0; d < rank; ++d) dims[2 - rank + d] = r.u64();
    if (dims[0] * dims[1] > bytes.size() / 8) throw CheckpointError("truncated checkpoint");
    Matrix m(static_cast<Eigen::Index>(dims[0]), static_cast<Eigen::Index>(dims[1]));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
    c.tensors.emplace_back(std::move(name), std::move(m));
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint payload");
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_file_atomic(path, serialize(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const std::runtime_error&) {
    throw CheckpointError("cannot read checkpoint: " + path.string());
  }
  return deserialize(bytes);
}

Checkpoint make_checkpoint(const std::string& config_text, const TrainingSnapshot& snapshot) {
  Checkpoint c;
  c.config_text = config_text;
  for (const auto& [name, entry] : snapshot.params) c.tensors.emplace_back("param/" + name, entry.value);
  for (const auto& [name, m] : snapshot.adam.m) c.tensors.emplace_back("adam.m/" + name, m);
  for (const auto& [name, v] : snapshot.adam.v) c.tensors.emplace_back("adam.v/" + name, v);
  c.tensors.emplace_back("state/adam_step", scalar_tensor(static_cast<double>(snapshot.adam.step)));
  c.tensors.emplace_back("state/epoch", scalar_tensor(static_cast<double>(snapshot.epoch)));
  Matrix seed(1, 2);
  seed(0, 0) = static_cast<double>(snapshot.seed & 0xffffffffULL);
  seed(0, 1) = static_cast<double>(snapshot.seed >> 32);
  c.tensors.emplace_back("state/seed", seed);
  return c;
}

TrainingSnapshot read_snapshot(const Checkpoint& checkpoint) {
  TrainingSnapshot s;
  const auto strip = [](const std::string& name, const std::string& prefix) -> std::string {
    return name.rfind(prefix, 0) == 0 ? name.substr(prefix.size()) : std::string();
  };
  for (const auto& [name, m] : checkpoint.tensors) {
    if (auto p = strip(name, "param/"); !p.empty()) {
      s.params.add(p, m);
    } else if (auto am = strip(name, "adam.m/"); !am.empty()) {
      s.adam.m[am] = m;
    } else if (auto av = strip(name, "adam.v/"); !av.empty()) {
      s.adam.v[av] = m;
    }
  }
  s.adam.step = static_cast<std::int64_t>(checkpoint.tensor("state/adam_step")(0, 0));
  s.epoch = static_cast<int>(checkpoint.tensor("state/epoch")(0, 0));
  const auto& seed = checkpoint.tensor("state/seed");
  s.seed = static_cast<std::uint64_t>(seed(0, 0)) | (static_cast<std::uint64_t>(seed(0, 1)) << 32);
  return s;
}

}  // namespace tanp
