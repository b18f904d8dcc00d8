#include "cats/tree_policy.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace cats {

namespace {

// Exact log2 of a positive double that is an integral power of two.
std::optional<int> exact_log2(double v) {
  if (!(v > 0.0) || !std::isfinite(v)) return std::nullopt;
  int exp = 0;
  const double mant = std::frexp(v, &exp);  // v = mant * 2^exp, mant in [0.5, 1)
  if (mant != 0.5) return std::nullopt;
  return exp - 1;
}

}  // namespace

TreeShape::TreeShape(int depth, double h) : depth_(depth), num_leaves_(0), h_(h) {
  if (depth < 1 || depth > 30) {
    throw std::invalid_argument("tree depth must lie in [1, 30], got " + std::to_string(depth));
  }
  if (!(h >= 0.0 && h <= 0.5)) {
    throw std::invalid_argument("bandwidth must lie in [0, 1/2], got " + std::to_string(h));
  }
  num_leaves_ = std::uint32_t{1} << depth;
  if (h == 0.0) return;

  const auto m = exact_log2(static_cast<double>(num_leaves_) * h);
  if (!m || *m < 0) {
    throw std::invalid_argument("K * h must be a power of two >= 1 (K = " +
                                std::to_string(num_leaves_) + ", h = " + std::to_string(h) + ")");
  }
  // Both boundary bands hold 2^m leaves each; something must remain between.
  if (*m > depth - 2) {
    throw std::invalid_argument("bandwidth " + std::to_string(h) + " leaves no reachable action at K = " +
                                std::to_string(num_leaves_));
  }
  m_sharp_ = *m;
  only_right_ = NodeId{(std::uint32_t{1} << (depth - *m - 1)) - 1};
  only_left_ = NodeId{(std::uint32_t{1} << (depth - *m)) - 2};
}

int TreeShape::level(NodeId v) { return std::bit_width(v.id + 1) - 1; }

DiscretizedAction TreeShape::label(NodeId leaf) const {
  if (!is_leaf(leaf)) throw std::invalid_argument("node " + std::to_string(leaf.id) + " is not a leaf");
  return {leaf.id - (num_leaves_ - 1), num_leaves_};
}

LeafRange TreeShape::leaf_range(NodeId v) const {
  if (!contains(v)) throw std::invalid_argument("node " + std::to_string(v.id) + " is outside the tree");
  const int d = level(v);
  const std::uint32_t pos = v.id - ((std::uint32_t{1} << d) - 1);
  const std::uint32_t width = num_leaves_ >> d;
  return {pos * width, (pos + 1) * width - 1};
}

std::optional<NodeId> TreeShape::only_right_id() const { return only_right_; }
std::optional<NodeId> TreeShape::only_left_id() const { return only_left_; }

LeafRange TreeShape::reachable_leaves() const {
  if (!m_sharp_) return {0, num_leaves_ - 1};
  const std::uint32_t band = std::uint32_t{1} << *m_sharp_;
  return {band, num_leaves_ - band - 1};
}

std::optional<double> admissible_bandwidth(std::uint32_t num_leaves, double h) {
  if (h == 0.0) return 0.0;
  const double kh = static_cast<double>(num_leaves) * h;
  if (!(kh >= 1.0)) return std::nullopt;
  int exp = 0;
  std::frexp(kh, &exp);
  return std::ldexp(1.0, exp - 1) / static_cast<double>(num_leaves);
}

TreePolicy::TreePolicy(int depth, double h, const BaseLearnerConfig& learner_config)
    : shape_(depth, h), config_(learner_config) {
  config_.validate();
  learners_.assign(shape_.num_internal(), BaseLearner(config_));
}

DiscretizedAction TreePolicy::subtree_action(NodeId v, Context x) const {
  if (!shape_.contains(v)) throw std::invalid_argument("node " + std::to_string(v.id) + " is outside the tree");
  const NodeId leaf = shape_.descend(v, [&](NodeId u) { return decide(u, x); });
  return shape_.label(leaf);
}

// ---------------------------------------------------------------------------
// Model file: little-endian
//   "CATSTREE" | u32 version | u32 depth | f64 h
//   | u64 feature_dim | u8 update_rule | f64 learning_rate | u64 seed
//   | per internal node in id order: f64[dim+1] left, f64[dim+1] right, u64 updates
//   | u64 FNV-1a checksum of everything before it

namespace {

constexpr char kMagic[8] = {'C', 'A', 'T', 'S', 'T', 'R', 'E', 'E'};
constexpr std::size_t kHeaderSize = 8 + 4 + 4 + 8 + 8 + 1 + 8 + 8;

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    hash ^= b;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

class Writer {
 public:
  void u8(std::uint8_t v) { out.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[i]} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t offset() const { return pos_; }

 private:
  std::span<const std::uint8_t> take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw ModelTruncatedError("model file is truncated");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> TreePolicy::serialize() const {
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(shape_.depth()));
  w.f64(shape_.bandwidth());
  w.u64(config_.feature_dim);
  w.u8(static_cast<std::uint8_t>(config_.update_rule));
  w.f64(config_.learning_rate);
  w.u64(config_.seed);
  for (const BaseLearner& l : learners_) {
    for (double v : l.weights_left()) w.f64(v);
    for (double v : l.weights_right()) w.f64(v);
    w.u64(l.update_count());
  }
  w.u64(fnv1a(w.out));
  return std::move(w.out);
}

TreePolicy TreePolicy::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderSize) throw ModelTruncatedError("model file is truncated");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw ModelFormatError("not a tree model file (bad magic)");
  }
  Reader r(bytes.subspan(sizeof kMagic));
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion) {
    throw ModelVersionError("unsupported model format version " + std::to_string(version));
  }
  const std::uint32_t depth = r.u32();
  const double h = r.f64();
  BaseLearnerConfig config;
  config.feature_dim = r.u64();
  config.update_rule = static_cast<UpdateRule>(r.u8());
  config.learning_rate = r.f64();
  config.seed = r.u64();
  if (depth < 1 || depth > 30 || config.feature_dim == 0 || config.feature_dim > (1u << 24)) {
    throw ModelFormatError("model header is corrupt");
  }

  // Size check before constructing anything large.
  const std::size_t dim = config.feature_dim;
  const std::size_t nodes = (std::size_t{1} << depth) - 1;
  const std::size_t expected = kHeaderSize + nodes * (2 * (dim + 1) * 8 + 8) + 8;
  if (bytes.size() < expected) throw ModelTruncatedError("model file is truncated");
  if (bytes.size() > expected) throw ModelFormatError("model file has trailing bytes");

  const std::uint64_t stored = [&] {
    Reader tail(bytes.subspan(expected - 8));
    return tail.u64();
  }();
  if (stored != fnv1a(bytes.first(expected - 8))) {
    throw ModelChecksumError("model checksum mismatch");
  }

  TreePolicy tree(static_cast<int>(depth), h, config);
  std::vector<double> left(dim + 1), right(dim + 1);
  for (BaseLearner& l : tree.learners_) {
    for (double& v : left) v = r.f64();
    for (double& v : right) v = r.f64();
    l.restore(left, right, r.u64());
  }
  return tree;
}

void TreePolicy::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

TreePolicy TreePolicy::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace cats
