#include "mcbnav/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

namespace mcbnav::sac {
namespace {

constexpr char kMagic[8] = {'M', 'C', 'B', 'N', 'A', 'V', 'C', 'K'};

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void put(const T& v) {
    const char* p = reinterpret_cast<const char*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  std::vector<char> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<char>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > end_) throw CheckpointError("checkpoint is truncated");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<char>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

void write_network(Writer& w, const Mlp& net) {
  const std::vector<int> sizes = net.sizes();
  w.put(static_cast<std::uint32_t>(net.layers.size()));
  for (int s : sizes) w.put(static_cast<std::uint32_t>(s));
  for (double v : net.flatten()) w.put(v);
}

Mlp read_network(Reader& r) {
  const auto layers = r.get<std::uint32_t>();
  if (layers == 0 || layers > 64) throw CheckpointError("checkpoint has an invalid layer count");
  std::vector<int> sizes;
  for (std::uint32_t i = 0; i <= layers; ++i) {
    const auto s = r.get<std::uint32_t>();
    if (s == 0 || s > (1u << 20)) throw CheckpointError("checkpoint has an invalid layer size");
    sizes.push_back(static_cast<int>(s));
  }
  Mlp net;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    net.layers.push_back({nn::Matrix(sizes[k + 1], sizes[k]), nn::Vector(sizes[k + 1])});
  }
  std::vector<double> values(net.parameter_count());
  for (double& v : values) v = r.get<double>();
  net.unflatten(values);
  return net;
}

}  // namespace

std::vector<char> serialize_checkpoint(const SacParams& p) {
  Writer w;
  w.bytes.insert(w.bytes.end(), std::begin(kMagic), std::end(kMagic));
  w.put(kCheckpointVersion);
  w.put(static_cast<std::int64_t>(p.step));
  w.put(p.offset);
  w.put(p.log_alpha);
  w.put(std::uint32_t{5});
  for (const Mlp* net : {&p.actor, &p.q1, &p.q2, &p.q1_target, &p.q2_target}) write_network(w, *net);
  w.put(fnv1a(w.bytes.data(), w.bytes.size()));
  return w.bytes;
}

SacParams deserialize_checkpoint(const std::vector<char>& bytes) {
  constexpr std::size_t kHashSize = sizeof(std::uint64_t);
  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint32_t) + kHashSize ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic or too short)");
  }
  std::uint32_t version = 0;
  std::memcpy(&version, bytes.data() + sizeof(kMagic), sizeof(version));
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t body = bytes.size() - kHashSize;
  std::uint64_t stored_hash = 0;
  std::memcpy(&stored_hash, bytes.data() + body, kHashSize);
  if (fnv1a(bytes.data(), body) != stored_hash) {
    throw CheckpointError("checkpoint is corrupt or truncated (hash mismatch)");
  }

  Reader r(bytes, body);
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.get<char>();
  r.get<std::uint32_t>();
  SacParams p;
  p.step = r.get<std::int64_t>();
  p.offset = r.get<double>();
  p.log_alpha = r.get<double>();
  if (r.get<std::uint32_t>() != 5) throw CheckpointError("checkpoint must hold five networks");
  p.actor = read_network(r);
  p.q1 = read_network(r);
  p.q2 = read_network(r);
  p.q1_target = read_network(r);
  p.q2_target = read_network(r);
  if (r.pos() != body) throw CheckpointError("checkpoint has trailing bytes");
  return p;
}

void save_checkpoint(const SacParams& params, const std::string& path) {
  const std::vector<char> bytes = serialize_checkpoint(params);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot open '" + tmp + "' for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CheckpointError("failed writing checkpoint '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

SacParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace mcbnav::sac
