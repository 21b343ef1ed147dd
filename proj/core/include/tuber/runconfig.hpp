#pragma once

#include <string>

#include "tuber/config.hpp"
#include "tuber/optim.hpp"
#include "tuber/synth.hpp"

namespace tuber {

struct TrainSchedule {
    int64_t epochs = 10;
    int64_t batch_size = 4;       // gradient-accumulation clips per step
    double grad_clip = 1.0;       // global L2 norm bound
    double val_fraction = 0.2;    // trailing samples held out for validation
    int64_t plateau_patience = 3;
    double plateau_min_delta = 1e-4;

    friend bool operator==(const TrainSchedule&, const TrainSchedule&) = default;
};

// One training run, fully specified: model, data generator, optimizer and
// schedule, plus default paths and the training seed (the data seed lives in
// the generator settings).
struct RunConfig {
    TubeRConfig model;
    SynthConfig data;
    AdamWConfig optim;
    TrainSchedule train;
    std::string data_dir;
    std::string out_dir;
    uint64_t seed = 0;

    // ConfigError on inconsistency; the label space must cover the generator
    // classes plus background, and clip geometry must agree.
    void validate() const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

std::string run_config_to_json(const RunConfig& cfg);
// Strict schema: unknown keys and missing keys are ConfigErrors, at every
// nesting level.
RunConfig run_config_from_json(const std::string& text);
// ConfigError names the path when the file cannot be read.
RunConfig load_run_config(const std::string& path);

}  // namespace tuber
