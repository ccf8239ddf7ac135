#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "oef/errors.hpp"
#include "oef/forest.hpp"

namespace oef {
namespace {

static_assert(std::endian::native == std::endian::little,
              "model files are little-endian; add byte swapping for this target");

constexpr char kMagic[4] = {'O', 'E', 'F', 'F'};
constexpr std::uint32_t kFlagPosteriors = 1;

std::uint64_t fnv1a(const std::uint8_t* data, size_t n) {
  std::uint64_t h = 1469598103934665603ull;
  for (size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 1099511628211ull;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, size_t size) : data_(data), size_(size) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > size_) throw DataError("model file is truncated");
    T value;
    std::memcpy(&value, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  size_t position() const { return pos_; }

 private:
  const std::uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
};

void write_node(Writer& w, const DecisionTree& tree, std::int32_t i, bool posteriors) {
  const TreeNode& n = tree.nodes[i];
  if (n.is_leaf()) {
    const LeafPosterior& leaf = tree.leaves[n.leaf];
    w.put<std::uint8_t>(1);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(leaf.argmax));
    w.put<std::int32_t>(leaf.count);
    if (posteriors) {
      w.put<std::uint16_t>(static_cast<std::uint16_t>(leaf.entries.size()));
      for (const auto& [k, p] : leaf.entries) {
        w.put<std::uint16_t>(k);
        w.put<float>(p);
      }
    }
    return;
  }
  w.put<std::uint8_t>(0);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(n.feature.kind));
  w.put<std::uint8_t>(n.feature.channel);
  w.put<std::int8_t>(n.feature.dx1);
  w.put<std::int8_t>(n.feature.dy1);
  w.put<std::int8_t>(n.feature.dx2);
  w.put<std::int8_t>(n.feature.dy2);
  w.put<float>(n.threshold);
  write_node(w, tree, i + 1, posteriors);
  write_node(w, tree, n.right, posteriors);
}

struct NodeParser {
  Reader& r;
  DecisionTree& tree;
  bool file_posteriors;
  bool keep_posteriors;
  int num_classes;
  std::uint32_t remaining;

  std::int32_t parse(int depth) {
    if (remaining == 0) throw DataError("model file: node count mismatch");
    if (depth > 4096) throw DataError("model file: tree too deep");
    --remaining;
    const std::int32_t index = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.push_back({});
    const auto tag = r.get<std::uint8_t>();
    if (tag == 1) {
      LeafPosterior leaf;
      leaf.argmax = r.get<std::uint16_t>();
      leaf.count = r.get<std::int32_t>();
      if (leaf.argmax >= num_classes) throw DataError("model file: label out of range");
      if (file_posteriors) {
        const auto n = r.get<std::uint16_t>();
        for (int e = 0; e < n; ++e) {
          const auto k = r.get<std::uint16_t>();
          const auto p = r.get<float>();
          if (k >= num_classes) throw DataError("model file: label out of range");
          if (keep_posteriors) leaf.entries.emplace_back(k, p);
        }
      }
      tree.nodes[index].leaf = static_cast<std::int32_t>(tree.leaves.size());
      tree.leaves.push_back(std::move(leaf));
      return index;
    }
    if (tag != 0) throw DataError("model file: bad node tag");
    FeatureId f;
    const auto kind = r.get<std::uint8_t>();
    if (kind > 1) throw DataError("model file: bad feature kind");
    f.kind = static_cast<FeatureId::Kind>(kind);
    f.channel = r.get<std::uint8_t>();
    f.dx1 = r.get<std::int8_t>();
    f.dy1 = r.get<std::int8_t>();
    f.dx2 = r.get<std::int8_t>();
    f.dy2 = r.get<std::int8_t>();
    tree.nodes[index].feature = f;
    tree.nodes[index].threshold = r.get<float>();
    parse(depth + 1);
    const std::int32_t right = parse(depth + 1);
    tree.nodes[index].right = right;
    return index;
  }
};

}  // namespace

void save_forest(const Forest& f, const std::filesystem::path& path,
                 const SaveOptions& options) {
  const bool posteriors = options.posteriors && f.has_posteriors;
  Writer w;
  for (char c : kMagic) w.put<char>(c);
  w.put<std::uint32_t>(kForestFormatVersion);
  w.put<std::uint32_t>(posteriors ? kFlagPosteriors : 0u);
  const ForestConfig& c = f.config;
  w.put<std::int32_t>(c.labels.patch_size);
  w.put<std::int32_t>(c.labels.n_dist_bins);
  w.put<std::int32_t>(c.labels.n_orient_bins);
  w.put<std::int32_t>(c.n_channels);
  w.put<std::int32_t>(c.hyper.max_depth);
  w.put<std::int32_t>(c.hyper.min_leaf_count);
  w.put<std::int32_t>(c.hyper.n_features_per_node);
  w.put<std::int32_t>(c.hyper.n_thresholds);
  w.put<std::int32_t>(c.pool.n_single);
  w.put<std::int32_t>(c.pool.n_pairdiff);
  w.put<std::uint64_t>(c.pool.seed);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.trees.size()));
  for (const auto& tree : f.trees) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tree.nodes.size()));
    write_node(w, tree, 0, posteriors);
  }
  auto& bytes = w.bytes();
  const std::uint64_t checksum = fnv1a(bytes.data(), bytes.size());
  w.put<std::uint64_t>(checksum);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

Forest load_forest(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 12) throw DataError("model file is truncated: " + path.string());
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError("not a forest model file: " + path.string());
  }
  Reader header(bytes.data() + 4, bytes.size() - 4);
  const auto version = header.get<std::uint32_t>();
  if (version != kForestFormatVersion) {
    throw ConfigError("model format version " + std::to_string(version) +
                      " is not supported (expected " +
                      std::to_string(kForestFormatVersion) + ")");
  }
  if (bytes.size() < 4 + 8 + sizeof(std::uint64_t)) throw DataError("model file is truncated");
  const size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));
  if (stored != fnv1a(bytes.data(), body)) {
    throw DataError("model file is corrupt or truncated (checksum mismatch): " + path.string());
  }

  Reader r(bytes.data(), body);
  for (int i = 0; i < 4; ++i) r.get<char>();
  r.get<std::uint32_t>();
  const auto flags = r.get<std::uint32_t>();
  Forest f;
  ForestConfig& c = f.config;
  c.labels.patch_size = r.get<std::int32_t>();
  c.labels.n_dist_bins = r.get<std::int32_t>();
  c.labels.n_orient_bins = r.get<std::int32_t>();
  try {
    c.labels.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
  c.n_channels = r.get<std::int32_t>();
  c.hyper.max_depth = r.get<std::int32_t>();
  c.hyper.min_leaf_count = r.get<std::int32_t>();
  c.hyper.n_features_per_node = r.get<std::int32_t>();
  c.hyper.n_thresholds = r.get<std::int32_t>();
  c.pool.n_single = r.get<std::int32_t>();
  c.pool.n_pairdiff = r.get<std::int32_t>();
  c.pool.seed = r.get<std::uint64_t>();
  const bool file_posteriors = flags & kFlagPosteriors;
  f.has_posteriors = file_posteriors && !options.skip_posteriors;
  const auto n_trees = r.get<std::uint32_t>();
  if (n_trees == 0) throw DataError("model file has no trees");
  f.trees.resize(n_trees);
  for (auto& tree : f.trees) {
    const auto n_nodes = r.get<std::uint32_t>();
    if (n_nodes == 0 || n_nodes > body) throw DataError("model file: bad node count");
    tree.nodes.reserve(n_nodes);
    NodeParser parser{r, tree, file_posteriors, f.has_posteriors,
                      c.labels.num_classes(), n_nodes};
    parser.parse(0);
    if (parser.remaining != 0) throw DataError("model file: node count mismatch");
  }
  if (r.position() != body) throw DataError("model file has trailing bytes");
  return f;
}

}  // namespace oef
