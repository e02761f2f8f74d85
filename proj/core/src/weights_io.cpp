#include "desnow/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "desnow/error.hpp"

namespace desnow::io {

namespace {

constexpr char kMagic[4] = {'W', 'D', 'S', 'N'};
constexpr const char* kConfigName = "meta.net_config";

template <class U>
void put(std::ostream& out, U v) {
  char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, sizeof(U));
}

template <class U>
U get(std::istream& in, const char* what) {
  unsigned char b[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(U)))
    throw DataError(std::string("weights file truncated while reading ") + what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

Tensor config_tensor(const net::NetConfig& c) {
  return Tensor({5}, {double(c.base_channels), double(c.n_parallel_kernels), double(c.conv_kernel),
                      double(c.rdn_layers), double(c.toy_scale_factor)});
}

}  // namespace

void write_tensors(std::ostream& out, const std::vector<NamedTensor>& tensors) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kWeightsVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (t.name.size() > std::numeric_limits<std::uint16_t>::max())
      throw DataError("tensor name too long: " + t.name.substr(0, 32) + "...");
    if (t.value.rank() > 255) throw DataError("tensor rank too large for " + t.name);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.value.rank()));
    for (std::size_t e : t.value.shape()) put<std::uint32_t>(out, static_cast<std::uint32_t>(e));
    for (double v : t.value.data()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw DataError("failed writing weights stream");
}

std::vector<NamedTensor> read_tensors(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("not a weights file (bad magic)");
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kWeightsVersion)
    throw DataError("unsupported weights file version " + std::to_string(version));
  const auto count = get<std::uint32_t>(in, "tensor count");
  std::vector<NamedTensor> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = get<std::uint16_t>(in, "name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw DataError("weights file truncated in tensor name");
    const auto rank = get<std::uint8_t>(in, "rank");
    if (rank == 0) throw DataError("tensor '" + name + "' has rank 0");
    Shape shape(rank);
    for (auto& e : shape) {
      e = get<std::uint32_t>(in, "extent");
      if (e == 0) throw DataError("tensor '" + name + "' has a zero extent");
    }
    std::vector<double> data(shape_numel(shape));
    for (double& v : data) v = std::bit_cast<double>(get<std::uint64_t>(in, "payload"));
    out.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  return out;
}

void save_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path.string() + "' for writing");
  write_tensors(f, tensors);
}

std::vector<NamedTensor> load_tensors(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open weights file '" + path.string() + "'");
  try {
    return read_tensors(f);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_model(const std::filesystem::path& path, const net::ModelWeights& weights) {
  std::vector<NamedTensor> ts{{kConfigName, config_tensor(weights.config())}};
  for (const auto& p : weights.params()) ts.push_back({p.name, p.value});
  save_tensors(path, ts);
}

net::ModelWeights load_model(const std::filesystem::path& path) {
  auto ts = load_tensors(path);
  if (ts.empty() || ts[0].name != kConfigName || ts[0].value.numel() != 5)
    throw DataError(path.string() + ": missing " + kConfigName + " header tensor");
  const auto& c = ts[0].value;
  net::NetConfig cfg;
  cfg.base_channels = int(c[0]);
  cfg.n_parallel_kernels = int(c[1]);
  cfg.conv_kernel = int(c[2]);
  cfg.rdn_layers = int(c[3]);
  cfg.toy_scale_factor = int(c[4]);
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw DataError(path.string() + ": invalid stored network config: " + e.what());
  }
  net::ModelWeights w(cfg);
  if (ts.size() - 1 != w.params().size())
    throw DataError(path.string() + ": expected " + std::to_string(w.params().size()) + " parameters, found " +
                    std::to_string(ts.size() - 1));
  for (std::size_t i = 1; i < ts.size(); ++i) {
    if (!w.contains(ts[i].name)) throw DataError(path.string() + ": unknown parameter '" + ts[i].name + "'");
    auto& p = w.get(ts[i].name);
    if (p.value.shape() != ts[i].value.shape())
      throw DataError(path.string() + ": parameter '" + ts[i].name + "' has shape " +
                      to_string(ts[i].value.shape()) + ", expected " + to_string(p.value.shape()));
    p.value = std::move(ts[i].value);
  }
  return w;
}

}  // namespace desnow::io
