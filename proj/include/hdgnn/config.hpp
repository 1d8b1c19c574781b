#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hdgnn/cascade.hpp"
#include "hdgnn/dataset.hpp"
#include "hdgnn/encoder.hpp"
#include "hdgnn/sampler.hpp"
#include "hdgnn/synth.hpp"

namespace hdgnn {

// Everything a run needs, with working defaults; one master seed fans out to
// every module so a single --seed reproduces the whole pipeline.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string task = "paper";  // paper | author
  SynthConfig synth;
  WalkConfig walk;
  ObservationConfig obs;
  EncoderConfig enc;
  PretrainConfig pretrain;
  ModelConfig model;
  TrainConfig train;
  std::vector<double> lr_grid = {1.0, 0.1, 0.01, 0.001, 0.0001, 0.00001};
};

// Flat `key = value` lines grouped under [section] headers; '#' starts a
// comment; unknown sections or keys raise ConfigError with the line number.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

void apply_seed(RunConfig& cfg, std::uint64_t seed);

}  // namespace hdgnn
