#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tuber/checkpoint.hpp"
#include "tuber/dataset_io.hpp"
#include "tuber/model.hpp"
#include "tuber/optim.hpp"
#include "tuber/rng.hpp"
#include "tuber/runconfig.hpp"

namespace tuber {

// One metrics.csv row. lr is the transformer rate after plateau decay.
struct EpochLog {
    int64_t step = 0;
    int64_t epoch = 0;
    double train_loss = 0;
    double val_frame_map = 0;
    double lr = 0;
};

// Single-process training loop over a generated dataset. The trailing
// val_fraction of samples is held out; the rest is shuffled each epoch.
// Writes metrics.csv, best.ckpt (highest validation frame mAP) and last.ckpt
// (every epoch) under out_dir. Resuming from last.ckpt reproduces the
// uninterrupted run bit for bit.
class Trainer {
public:
    // DataError when the dataset was generated with settings other than
    // cfg.data, or when the split leaves either side empty.
    Trainer(const RunConfig& cfg, const Dataset& data, std::string out_dir);

    // DataError when the checkpoint was written under a different run config.
    void resume(const std::string& ckpt_path);

    // Runs epochs state().epoch+1 .. cfg.train.epochs (capped at until_epoch
    // when positive, for staged runs). Returns the rows appended by this
    // call.
    const std::vector<EpochLog>& train(int64_t until_epoch = 0);

    // Invoked after every metrics row (baseline included); progress hook.
    void set_epoch_callback(std::function<void(const EpochLog&)> cb) { on_epoch_ = std::move(cb); }

    TubeRModelT<float>& model() { return model_; }
    const TrainerState& state() const { return state_; }
    int64_t train_count() const { return train_count_; }
    int64_t val_count() const { return val_count_; }

private:
    Tensor long_context(const Tensor& clip);
    double sample_loss(const SynthSample& sample, bool training);
    std::pair<double, double> validate_pass();
    void optimizer_step();
    void save(const std::string& name);
    void append_csv(const EpochLog& row) const;

    RunConfig cfg_;
    const Dataset* data_;
    std::string out_dir_;
    TubeRModelT<float> model_;
    AdamW opt_;
    Rng rng_;
    TrainerState state_;
    std::vector<EpochLog> logs_;
    std::function<void(const EpochLog&)> on_epoch_;
    int64_t train_count_ = 0;
    int64_t val_count_ = 0;
    bool resumed_ = false;
};

}  // namespace tuber
