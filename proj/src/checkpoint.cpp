#include "bepal/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "bepal/error.hpp"

namespace bepal::io {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'B', 'E', 'P', 'A', 'L', 'C', 'K', 'P'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("checkpoint: unexpected end of data");
  return v;
}

std::string get_string(std::istream& is, std::uint64_t len) {
  if (len > (1ULL << 32)) throw std::runtime_error("checkpoint: implausible string length");
  std::string s(len, '\0');
  if (len > 0 && !is.read(s.data(), static_cast<std::streamsize>(len)))
    throw std::runtime_error("checkpoint: unexpected end of data");
  return s;
}

}  // namespace

void write_tensor(std::ostream& os, const num::Tensor& t) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(t.ndim()));
  for (auto d : t.shape()) put<std::uint64_t>(os, d);
  os.write(reinterpret_cast<const char*>(t.values().data()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

num::Tensor read_tensor(std::istream& is) {
  const auto ndim = get<std::uint32_t>(is);
  if (ndim == 0 || ndim > 8) throw std::runtime_error("checkpoint: bad tensor rank");
  num::Shape shape(ndim);
  for (auto& d : shape) d = get<std::uint64_t>(is);
  std::vector<double> values(num::shape_numel(shape));
  if (!is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double))))
    throw std::runtime_error("checkpoint: truncated tensor data");
  return num::Tensor::from(std::move(shape), std::move(values));
}

void save_checkpoint_file(const std::string& path, const Checkpoint& ckpt) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot write " + tmp);
    os.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(os, ckpt.version);
    put<std::uint64_t>(os, ckpt.metadata.size());
    os.write(ckpt.metadata.data(), static_cast<std::streamsize>(ckpt.metadata.size()));
    put<std::uint64_t>(os, ckpt.tensors.size());
    for (const auto& [name, t] : ckpt.tensors) {
      put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
      os.write(name.data(), static_cast<std::streamsize>(name.size()));
      write_tensor(os, t);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw std::runtime_error("checkpoint: cannot move into " + path);
}

Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: " + path + " is not a checkpoint file");
  Checkpoint c;
  c.version = get<std::uint32_t>(is);
  if (c.version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(c.version));
  c.metadata = get_string(is, get<std::uint64_t>(is));
  const auto n = get<std::uint64_t>(is);
  for (std::uint64_t i = 0; i < n; ++i) {
    std::string name = get_string(is, get<std::uint32_t>(is));
    c.tensors.emplace_back(std::move(name), read_tensor(is));
  }
  return c;
}

std::vector<std::pair<std::string, num::Tensor>> collect_tensors(const train::TrainerState& state) {
  auto named = state.params.named_parameters();
  std::vector<std::pair<std::string, num::Tensor>> out = named;
  for (std::size_t i = 0; i < named.size(); ++i) {
    out.emplace_back("rmsprop." + named[i].first,
                     num::Tensor::from(named[i].second.shape(), state.optimizer.mean_square.at(i)));
  }
  return out;
}

void restore_tensors(const Checkpoint& ckpt, train::TrainerState& state) {
  auto find = [&](const std::string& name) -> const num::Tensor& {
    for (const auto& [n, t] : ckpt.tensors)
      if (n == name) return t;
    throw std::runtime_error("checkpoint: missing tensor " + name);
  };
  auto named = state.params.named_parameters();
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto& [name, param] = named[i];
    const auto& saved = find(name);
    if (saved.shape() != param.shape())
      throw ShapeError("checkpoint: tensor " + name + " has shape " + num::shape_str(saved.shape()) + ", model expects " +
                       num::shape_str(param.shape()));
    std::copy(saved.values().begin(), saved.values().end(), param.mutable_values().begin());
    const auto& acc = find("rmsprop." + name);
    if (acc.numel() != param.numel()) throw ShapeError("checkpoint: optimizer state size mismatch for " + name);
    state.optimizer.mean_square.at(i).assign(acc.values().begin(), acc.values().end());
  }
}

std::uint64_t file_fingerprint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("fingerprint: cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace bepal::io
