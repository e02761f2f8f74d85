#include "desnow_cli/pyramid_file.hpp"

#include <map>

#include "desnow/error.hpp"
#include "desnow/image_io.hpp"
#include "desnow/weights_io.hpp"

namespace desnow::cli {

namespace {

constexpr const char* kMeta = "meta.pyramid";

std::string level_key(int l) { return "level" + std::to_string(l + 1) + "."; }

}  // namespace

void save_pyramid(const std::filesystem::path& path, const StoredPyramid& p) {
  std::vector<io::NamedTensor> ts;
  if (const auto* d = std::get_if<wavelet::Pyramid>(&p.pyramid)) {
    ts.push_back({kMeta, Tensor({4}, {0.0, double(d->levels()), double(p.height), double(p.width)})});
    ts.push_back({"lowpass", d->lowpass});
    for (int l = 0; l < d->levels(); ++l)
      for (const auto& s : d->highpass[l]) {
        const std::string k = level_key(l) + std::string(wavelet::name(s.direction));
        ts.push_back({k + ".real", s.real});
        ts.push_back({k + ".imag", s.imag});
      }
  } else {
    const auto& w = std::get<wavelet::DwtPyramid>(p.pyramid);
    ts.push_back({kMeta, Tensor({4}, {1.0, double(w.levels()), double(p.height), double(p.width)})});
    ts.push_back({"ll", w.ll});
    for (int l = 0; l < w.levels(); ++l) {
      ts.push_back({level_key(l) + "lh", w.detail[l].lh});
      ts.push_back({level_key(l) + "hl", w.detail[l].hl});
      ts.push_back({level_key(l) + "hh", w.detail[l].hh});
    }
  }
  io::save_tensors(path, ts);
}

StoredPyramid load_pyramid(const std::filesystem::path& path) {
  const auto ts = io::load_tensors(path);
  std::map<std::string, Tensor> by_name;
  for (const auto& t : ts) by_name[t.name] = t.value;
  const auto take = [&](const std::string& k) {
    const auto it = by_name.find(k);
    if (it == by_name.end()) throw DataError(path.string() + ": missing tensor '" + k + "'");
    return it->second;
  };
  const Tensor meta = take(kMeta);
  if (meta.numel() != 4) throw DataError(path.string() + ": malformed " + kMeta);
  const int levels = int(meta[1]);
  if (levels < 1 || levels > 16) throw DataError(path.string() + ": bad level count");
  StoredPyramid out;
  out.height = std::size_t(meta[2]);
  out.width = std::size_t(meta[3]);
  if (meta[0] == 0.0) {
    wavelet::Pyramid p;
    p.lowpass = take("lowpass");
    p.highpass.resize(levels);
    for (int l = 0; l < levels; ++l)
      for (std::size_t k = 0; k < 6; ++k) {
        const auto dir = wavelet::kDirections[k];
        const std::string key = level_key(l) + std::string(wavelet::name(dir));
        p.highpass[l][k] = {dir, take(key + ".real"), take(key + ".imag")};
      }
    out.pyramid = std::move(p);
  } else if (meta[0] == 1.0) {
    wavelet::DwtPyramid p;
    p.ll = take("ll");
    for (int l = 0; l < levels; ++l)
      p.detail.push_back({take(level_key(l) + "lh"), take(level_key(l) + "hl"), take(level_key(l) + "hh")});
    out.pyramid = std::move(p);
  } else {
    throw DataError(path.string() + ": unknown transform id");
  }
  return out;
}

Tensor reconstruct(const StoredPyramid& p) {
  Tensor full = std::holds_alternative<wavelet::Pyramid>(p.pyramid)
                    ? wavelet::idtcwt(std::get<wavelet::Pyramid>(p.pyramid))
                    : wavelet::idwt2(std::get<wavelet::DwtPyramid>(p.pyramid));
  return io::crop(full, p.height, p.width);
}

}  // namespace desnow::cli
