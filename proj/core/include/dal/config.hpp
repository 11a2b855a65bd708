#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "dal/synthetic.hpp"
#include "dal/trainer.hpp"

namespace dal {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  GenSpec gen;
  TrainConfig train;
  double test_fraction = 0.2;
};

// Flat `key = value` text with `#` comments. Unknown keys are hard
// errors: a silent typo in a loss weight would invalidate an experiment.
RunConfig parse_config(std::istream& in);
RunConfig parse_config_file(const std::string& path);

void write_config(const RunConfig& cfg, std::ostream& out);

}  // namespace dal
