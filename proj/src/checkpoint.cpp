#include "wdiff/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "wdiff/error.hpp"
#include "wdiff/rng.hpp"

namespace wdiff {

using Eigen::Index;

namespace {

constexpr char kMagic[4] = {'W', 'D', 'I', 'F'};

class Writer {
 public:
  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void bytes(std::string_view s) { out_.append(s); }
  void record(const std::string& name, const ad::Shape& shape, const Eigen::VectorXd& data) {
    uint<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    bytes(name);
    uint<std::uint32_t>(static_cast<std::uint32_t>(shape.size()));
    for (const Index d : shape) uint<std::uint64_t>(static_cast<std::uint64_t>(d));
    for (Index i = 0; i < data.size(); ++i) uint(std::bit_cast<std::uint64_t>(data[i]));
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(std::string_view in, const std::string& source) : in_(in), source_(source) {}

  template <typename U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    const auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }
  [[noreturn]] void fail(const std::string& what) const { throw Error(ErrorCode::CheckpointError, source_ + ": " + what); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) fail("truncated at byte " + std::to_string(pos_));
  }
  std::string_view in_;
  std::size_t pos_ = 0;
  const std::string& source_;
};

Eigen::VectorXd vec(const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size())); }

}  // namespace

std::uint64_t config_digest(const RunConfig& cfg) { return fnv1a64(model_text(cfg)); }

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const std::string text = to_text(ckpt.config);
  Writer w;
  w.bytes(std::string_view(kMagic, 4));
  w.uint<std::uint32_t>(kCheckpointVersion);
  w.uint<std::uint64_t>(config_digest(ckpt.config));
  w.uint<std::uint64_t>(text.size());
  w.bytes(text);

  const auto& norm = ckpt.normalization;
  const auto& layout = ckpt.params.layout;
  std::vector<double> layout_meta{static_cast<double>(layout.features)};
  for (const Index t : layout.tokens) layout_meta.push_back(static_cast<double>(t));

  std::uint64_t count = 5 + ckpt.params.tensors.size();
  for (const auto& [name, tensor] : ckpt.params.tensors) {
    (void)tensor;
    count += ckpt.optimizer.m.count(name) + ckpt.optimizer.v.count(name);
  }
  w.uint<std::uint64_t>(count);

  w.record("meta.layout", {static_cast<Index>(layout_meta.size())}, vec(layout_meta));
  w.record("norm.mode", {1}, Eigen::VectorXd::Constant(1, static_cast<double>(norm.mode)));
  w.record("norm.offset", {norm.offset.size()}, norm.offset);
  w.record("norm.scale", {norm.scale.size()}, norm.scale);
  w.record("adam.step", {}, Eigen::VectorXd::Constant(1, static_cast<double>(ckpt.optimizer.step)));
  for (const auto& [name, tensor] : ckpt.params.tensors) w.record("param/" + name, tensor.shape, tensor.data);
  for (const auto& [name, tensor] : ckpt.params.tensors) {
    if (const auto it = ckpt.optimizer.m.find(name); it != ckpt.optimizer.m.end()) w.record("adam.m/" + name, tensor.shape, it->second);
    if (const auto it = ckpt.optimizer.v.find(name); it != ckpt.optimizer.v.end()) w.record("adam.v/" + name, tensor.shape, it->second);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes, const std::string& source) {
  Reader r(bytes, source);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) r.fail("not a checkpoint (bad magic)");
  r.bytes(4);
  const auto version = r.uint<std::uint32_t>();
  if (version != kCheckpointVersion) r.fail("unsupported format version " + std::to_string(version));
  const auto digest = r.uint<std::uint64_t>();
  const auto text_len = r.uint<std::uint64_t>();
  if (text_len > bytes.size()) r.fail("config text length out of range");

  Checkpoint ck;
  try {
    ck.config = parse_config(r.bytes(static_cast<std::size_t>(text_len)));
  } catch (const Error& e) {
    r.fail(std::string("embedded config: ") + e.what());
  }
  if (config_digest(ck.config) != digest) r.fail("config digest mismatch");

  const auto count = r.uint<std::uint64_t>();
  bool have_layout = false;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.uint<std::uint32_t>();
    const std::string name(r.bytes(name_len));
    const auto rank = r.uint<std::uint32_t>();
    if (rank > 8) r.fail("record '" + name + "' has rank " + std::to_string(rank));
    ad::Shape shape;
    std::uint64_t total = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const auto d = r.uint<std::uint64_t>();
      if (d > bytes.size()) r.fail("record '" + name + "' dimension out of range");
      shape.push_back(static_cast<Index>(d));
      total *= d;
    }
    if (total > bytes.size() / 8) r.fail("record '" + name + "' larger than the file");
    Eigen::VectorXd data(static_cast<Index>(total));
    for (Index j = 0; j < data.size(); ++j) data[j] = std::bit_cast<double>(r.uint<std::uint64_t>());

    if (name == "meta.layout") {
      if (data.size() < 2) r.fail("layout record too short");
      ck.params.layout.features = static_cast<Index>(data[0]);
      for (Index j = 1; j < data.size(); ++j) ck.params.layout.tokens.push_back(static_cast<Index>(data[j]));
      have_layout = true;
    } else if (name == "norm.mode") {
      ck.normalization.mode = static_cast<Normalization>(static_cast<int>(data[0]));
    } else if (name == "norm.offset") {
      ck.normalization.offset = data;
    } else if (name == "norm.scale") {
      ck.normalization.scale = data;
    } else if (name == "adam.step") {
      ck.optimizer.step = static_cast<std::int64_t>(data[0]);
    } else if (name.starts_with("param/")) {
      ck.params.tensors.emplace(name.substr(6), ad::Tensor(shape, std::move(data)));
    } else if (name.starts_with("adam.m/")) {
      ck.optimizer.m.emplace(name.substr(7), std::move(data));
    } else if (name.starts_with("adam.v/")) {
      ck.optimizer.v.emplace(name.substr(7), std::move(data));
    } else {
      r.fail("unknown record '" + name + "'");
    }
  }
  if (!r.done()) r.fail("trailing bytes after the last record");
  if (!have_layout) r.fail("missing layout record");
  if (ck.params.tensors.empty()) r.fail("no parameters");
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) { write_file_atomic(path, serialize_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file(path), path); }

}  // namespace wdiff
