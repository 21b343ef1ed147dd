#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "tuber/nn.hpp"
#include "tuber/optim.hpp"

namespace tuber {

// Progress carried across save/resume so an interrupted run continues as if
// it had never stopped.
struct TrainerState {
    int64_t step = 0;
    int64_t epoch = 0;
    double lr_scale = 1.0;
    double best_val_loss = std::numeric_limits<double>::infinity();
    double best_val_map = 0.0;
    int64_t plateau_wait = 0;

    friend bool operator==(const TrainerState&, const TrainerState&) = default;
};

struct Checkpoint {
    std::string config_json;
    std::vector<std::pair<std::string, Tensor>> params;
    bool has_optimizer = false;
    int64_t opt_step = 0;
    std::vector<AdamW::Slot> opt_slots;  // ordered like params
    TrainerState state;
    std::string rng_state;
};

// Fixed little-endian binary layout with no timestamps: saving the same
// state twice gives byte-identical files. Pass optim = nullptr to omit
// optimizer state (inference-only checkpoints).
void save_checkpoint(const std::string& path, const std::string& config_json,
                     const ParamMap& params, const AdamW* optim, const TrainerState& state,
                     const std::string& rng_state);

// DataError on bad magic, version, or truncation.
Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint values into identically named parameters. DataError when
// names or shapes disagree in either direction.
void restore_params(ParamMap& params, const Checkpoint& ckpt);
// DataError when the checkpoint carries no optimizer state or sizes disagree.
void restore_optimizer(AdamW& optim, const Checkpoint& ckpt);

}  // namespace tuber
