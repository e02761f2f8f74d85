#include "desnow/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <vector>

#include "desnow/error.hpp"

namespace desnow::config {

using nlohmann::json;

namespace {

json range(const data::Range& r) { return json::array({r.lo, r.hi}); }

std::string norm_name(priors::LossNorm n) { return n == priors::LossNorm::kL1 ? "l1" : "l2"; }

// Reads known keys out of one JSON object and records every problem.
class Reader {
 public:
  Reader(const json& obj, std::string path, std::vector<std::string>& errors)
      : obj_(obj), path_(std::move(path)), errors_(errors) {
    if (!obj_.is_object()) errors_.push_back(path_ + ": expected an object");
  }

  template <class T>
  void field(const char* key, T& dst) {
    known_.push_back(key);
    if (!obj_.is_object() || !obj_.contains(key)) return;
    const json& v = obj_.at(key);
    try {
      if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_unsigned() || v.get<long long>() >= 0) {
            dst = v.get<T>();
            return;
          }
          throw std::invalid_argument("expected a non-negative integer");
        } else {
          dst = v.get<T>();
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
        dst = v.get<T>();
      } else if constexpr (std::is_same_v<T, data::Range>) {
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
          throw std::invalid_argument("expected [lo, hi]");
        dst = {v[0].get<double>(), v[1].get<double>()};
      } else if constexpr (std::is_same_v<T, priors::LossNorm>) {
        if (v == "l1") dst = priors::LossNorm::kL1;
        else if (v == "l2") dst = priors::LossNorm::kL2;
        else throw std::invalid_argument("expected \"l1\" or \"l2\"");
      }
    } catch (const std::exception& e) {
      errors_.push_back(path_ + "." + key + ": " + e.what());
    }
  }

  const json* object(const char* key) {
    known_.push_back(key);
    if (!obj_.is_object() || !obj_.contains(key)) return nullptr;
    return &obj_.at(key);
  }

  void reject_unknown() {
    if (!obj_.is_object()) return;
    for (const auto& [k, _] : obj_.items())
      if (std::find(known_.begin(), known_.end(), k) == known_.end())
        errors_.push_back(path_ + "." + k + ": unknown key");
  }

 private:
  const json& obj_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::vector<std::string> known_;
};

}  // namespace

void RunConfig::validate() const {
  net.validate();
  train.validate();
  snow.validate();
}

RunConfig paper_preset() { return RunConfig{}; }

RunConfig desk_preset() {
  RunConfig c;
  c.net.toy_scale_factor = 8;
  c.train.batch_size = 4;
  c.train.epochs = 500;
  c.train.lr_schedule = train::compressed_schedule(500, 2e-3);
  c.train.crop_size = 32;
  return c;
}

RunConfig preset(const std::string& name) {
  if (name == "paper") return paper_preset();
  if (name == "desk") return desk_preset();
  throw ConfigError("unknown preset '" + name + "' (expected paper or desk)");
}

json to_json(const RunConfig& c) {
  json schedule = json::array();
  for (const auto& p : c.train.lr_schedule)
    schedule.push_back({{"first_epoch", p.first_epoch}, {"last_epoch", p.last_epoch}, {"lr", p.lr}});
  return {
      {"net",
       {{"base_channels", c.net.base_channels},
        {"n_parallel_kernels", c.net.n_parallel_kernels},
        {"conv_kernel", c.net.conv_kernel},
        {"rdn_layers", c.net.rdn_layers},
        {"toy_scale_factor", c.net.toy_scale_factor}}},
      {"train",
       {{"batch_size", c.train.batch_size},
        {"epochs", c.train.epochs},
        {"lr_schedule", schedule},
        {"lambda_ccl", c.train.lambda_ccl},
        {"ccl_norm", norm_name(c.train.ccl_norm)},
        {"patch", c.train.patch.size},
        {"seed", c.train.seed},
        {"checkpoint_every", c.train.checkpoint_every},
        {"crop_size", c.train.crop_size}}},
      {"snow",
       {{"streak_count", c.snow.streak_count},
        {"streak_length", range(c.snow.streak_length)},
        {"streak_angle", range(c.snow.streak_angle)},
        {"streak_width", range(c.snow.streak_width)},
        {"transparency", range(c.snow.transparency)},
        {"blur_sigma", c.snow.blur_sigma},
        {"flake_count", c.snow.flake_count},
        {"flake_radius", range(c.snow.flake_radius)},
        {"veil_strength", c.snow.veil_strength},
        {"atmospheric_light", c.snow.atmospheric_light},
        {"rng_seed", c.snow.rng_seed}}},
  };
}

RunConfig apply_json(RunConfig c, const json& doc) {
  std::vector<std::string> errors;
  Reader root(doc, "config", errors);
  if (const json* n = root.object("net")) {
    Reader r(*n, "net", errors);
    r.field("base_channels", c.net.base_channels);
    r.field("n_parallel_kernels", c.net.n_parallel_kernels);
    r.field("conv_kernel", c.net.conv_kernel);
    r.field("rdn_layers", c.net.rdn_layers);
    r.field("toy_scale_factor", c.net.toy_scale_factor);
    r.reject_unknown();
  }
  if (const json* t = root.object("train")) {
    Reader r(*t, "train", errors);
    r.field("batch_size", c.train.batch_size);
    r.field("epochs", c.train.epochs);
    r.field("lambda_ccl", c.train.lambda_ccl);
    r.field("ccl_norm", c.train.ccl_norm);
    r.field("patch", c.train.patch.size);
    r.field("seed", c.train.seed);
    r.field("checkpoint_every", c.train.checkpoint_every);
    r.field("crop_size", c.train.crop_size);
    if (const json* s = r.object("lr_schedule")) {
      if (!s->is_array()) {
        errors.push_back("train.lr_schedule: expected an array");
      } else {
        c.train.lr_schedule.clear();
        for (std::size_t i = 0; i < s->size(); ++i) {
          train::LrPhase p;
          Reader pr((*s)[i], "train.lr_schedule[" + std::to_string(i) + "]", errors);
          pr.field("first_epoch", p.first_epoch);
          pr.field("last_epoch", p.last_epoch);
          pr.field("lr", p.lr);
          pr.reject_unknown();
          c.train.lr_schedule.push_back(p);
        }
      }
    }
    r.reject_unknown();
  }
  if (const json* s = root.object("snow")) {
    Reader r(*s, "snow", errors);
    r.field("streak_count", c.snow.streak_count);
    r.field("streak_length", c.snow.streak_length);
    r.field("streak_angle", c.snow.streak_angle);
    r.field("streak_width", c.snow.streak_width);
    r.field("transparency", c.snow.transparency);
    r.field("blur_sigma", c.snow.blur_sigma);
    r.field("flake_count", c.snow.flake_count);
    r.field("flake_radius", c.snow.flake_radius);
    r.field("veil_strength", c.snow.veil_strength);
    r.field("atmospheric_light", c.snow.atmospheric_light);
    r.field("rng_seed", c.snow.rng_seed);
    r.reject_unknown();
  }
  root.reject_unknown();
  if (!errors.empty()) {
    std::ostringstream os;
    os << "invalid configuration (" << errors.size() << " problem" << (errors.size() > 1 ? "s" : "") << "):";
    for (const auto& e : errors) os << "\n  " << e;
    throw ConfigError(os.str());
  }
  return c;
}

RunConfig load_json_file(RunConfig base, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return apply_json(std::move(base), doc);
}

}  // namespace desnow::config
