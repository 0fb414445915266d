#pragma once

// Flat key=value run configuration. One file describes the dataset, the
// architecture, both training stages, and the scoring blend; the canonical
// snapshot (every key, defaults filled in) goes into the run manifest so a
// run is reproducible from its artifacts alone.

#include <cstdint>
#include <string>

#include "tend/data.hpp"
#include "tend/model.hpp"
#include "tend/rng.hpp"
#include "tend/scoring.hpp"
#include "tend/training.hpp"

namespace tend {

struct RunConfig {
    DatasetSpec data;        // data.root "synthetic" selects the generator
    SyntheticParams synth;
    ArchitectureSpec arch;
    int stage1_epochs = 30;
    int stage2_epochs = 30;
    double learning_rate = 1e-3;
    int batch_size = 16;
    int warmup_epochs = 10;
    double margin_r = 250.0;
    MarginReduction margin_reduction = MarginReduction::MEAN_DIM;
    bool supervised = false;
    double lambda = 0.5;
    ScoreMode mode = ScoreMode::TEND;
    uint64_t seed = 0;

    bool synthetic() const { return data.root == "synthetic"; }

    // Derived per-purpose seeds so the stages never share a stream.
    uint64_t data_seed() const { return derive_seed(seed, 1); }
    uint64_t init_seed() const { return derive_seed(seed, 2); }
    uint64_t train_seed() const { return derive_seed(seed, 3); }

    // Fully seeded copies for the modules; the raw fields keep whatever the
    // config file said, the accessors fill in sizes and derived seeds.
    DatasetSpec dataset_spec() const;
    SyntheticParams synthetic_params() const;
    TrainConfig stage1_config() const;
    TrainConfig stage2_config() const;

    void validate() const;
    std::string to_text() const;  // canonical snapshot, sorted keys
};

// Key=value lines, '#' comments, '=' separated. Unknown or repeated keys are
// config errors.
RunConfig parse_run_config_text(const std::string& text);
RunConfig load_run_config(const std::string& path);

}  // namespace tend
