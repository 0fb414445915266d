#pragma once

// Versioned model persistence: a text header describing the architecture,
// stage tag, seeds, and named parameter arrays, followed by the raw
// little-endian doubles. Files are written to a temp name and renamed so a
// failed run never leaves a partial checkpoint behind.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tend/model.hpp"

namespace tend {

inline constexpr const char* kCheckpointMagic = "TENDCKPT-v1";

enum class Stage { STAGE1, STAGE2 };

const char* stage_name(Stage s);
Stage stage_from_name(const std::string& s);

struct CheckpointMeta {
    Stage stage = Stage::STAGE1;
    uint64_t init_seed = 0;
    uint64_t train_seed = 0;
    double margin_r = 0.0;                     // stage 2 only
    std::string margin_reduction = "mean_dim";
    std::vector<double> center;                // stage 2 only, length K
    int center_epoch = -1;
};

void save_checkpoint(const std::string& path, TendModel& model, const CheckpointMeta& meta);

struct LoadedCheckpoint {
    ArchitectureSpec arch;
    CheckpointMeta meta;
    std::unique_ptr<TendModel> model;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace tend
