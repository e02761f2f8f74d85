#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "desnow/network.hpp"
#include "desnow/synth_snow.hpp"
#include "desnow/training.hpp"

namespace desnow::config {

struct RunConfig {
  net::NetConfig net;
  train::TrainConfig train;
  data::SnowParams snow;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

/// Full-scale settings: 64 channels, batch 16, 100 epochs, 1e-4/1e-5/1e-6.
RunConfig paper_preset();
/// Desk-scale settings: 8 channels, batch 4, 32x32 crops, compressed schedule.
RunConfig desk_preset();
/// "paper" or "desk"; anything else is a ConfigError.
RunConfig preset(const std::string& name);

nlohmann::json to_json(const RunConfig& config);

/// Overlay `doc` onto `base`. Unknown keys and type errors are all collected
/// and reported together in one ConfigError.
RunConfig apply_json(RunConfig base, const nlohmann::json& doc);
RunConfig load_json_file(RunConfig base, const std::string& path);

}  // namespace desnow::config
