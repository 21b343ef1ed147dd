#include "tuber/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <utility>

#include "tuber/errors.hpp"
#include "tuber/heads.hpp"
#include "tuber/inference.hpp"
#include "tuber/matching.hpp"
#include "tuber/ops.hpp"
#include "tuber/postprocess.hpp"
#include "tuber/tape.hpp"

namespace tuber {

namespace {

const RunConfig& validated(const RunConfig& cfg) {
    cfg.validate();
    return cfg;
}

// Sum of final and auxiliary losses; the breakdown weights are inside
// compute_set_loss already.
Tensor objective(const ModelOutputT<float>& out, const std::vector<GroundTruthTube>& tubes,
                 const TubeRConfig& cfg) {
    Tensor total = compute_set_loss(out.final, tubes, cfg).total;
    for (const auto& aux : out.aux) {
        total = add(total, compute_set_loss(aux, tubes, cfg).total);
    }
    return total;
}

}  // namespace

Trainer::Trainer(const RunConfig& cfg, const Dataset& data, std::string out_dir)
    : cfg_(validated(cfg)),
      data_(&data),
      out_dir_(std::move(out_dir)),
      model_(cfg_.model, mix_seed(cfg_.seed, 1)),
      opt_(model_.params(), cfg_.optim),
      rng_(mix_seed(cfg_.seed, 2)) {
    if (!(data.config() == cfg_.data)) {
        throw DataError("dataset settings do not match run config");
    }
    val_count_ = std::llround(static_cast<double>(data.size()) * cfg_.train.val_fraction);
    train_count_ = data.size() - val_count_;
    if (train_count_ < 1 || val_count_ < 1) {
        throw DataError("dataset too small for the requested split");
    }
    std::filesystem::create_directories(out_dir_);
}

void Trainer::resume(const std::string& ckpt_path) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    if (ckpt.config_json != run_config_to_json(cfg_)) {
        throw DataError("resume checkpoint config mismatch");
    }
    restore_params(model_.params(), ckpt);
    if (!ckpt.has_optimizer) {
        throw DataError("resume checkpoint lacks optimizer state");
    }
    restore_optimizer(opt_, ckpt);
    state_ = ckpt.state;
    opt_.set_lr_scale(state_.lr_scale);
    rng_.set_state(ckpt.rng_state);
    resumed_ = true;
}

Tensor Trainer::long_context(const Tensor& clip) {
    if (cfg_.model.class_head != ClassHeadKind::long_term) return {};
    NoGradGuard guard;
    LongTermBufferT<float> buf(cfg_.model.context_window);
    buf.push(0, model_.backbone_features(clip));
    return buf.f_long(0);
}

double Trainer::sample_loss(const SynthSample& sample, bool training) {
    const Tensor f_long = long_context(sample.clip);
    if (!training) {
        NoGradGuard guard;
        ForwardCtx ctx;
        const auto out = model_.forward(sample.clip, ctx, cfg_.model.aux_loss, f_long);
        return objective(out, sample.tubes, cfg_.model).item();
    }
    TapeScope<float> scope;
    ForwardCtx ctx{&rng_, true};
    const auto out = model_.forward(sample.clip, ctx, cfg_.model.aux_loss, f_long);
    const Tensor total = objective(out, sample.tubes, cfg_.model);
    const double value = total.item();
    // Constant 1/batch scale; the epoch-end remainder batch keeps it too.
    const Tensor scaled =
        mul_scalar(total, static_cast<float>(1.0 / static_cast<double>(cfg_.train.batch_size)));
    scope.tape().backward_from(scaled);
    return value;
}

std::pair<double, double> Trainer::validate_pass() {
    NoGradGuard guard;
    double loss = 0;
    std::vector<TubeletDetection> dets;
    std::vector<FrameGroundTruth> fgts;
    for (int64_t i = 0; i < val_count_; ++i) {
        const int64_t index = train_count_ + i;
        const SynthSample sample = data_->sample(index);
        const Tensor f_long = long_context(sample.clip);
        ForwardCtx ctx;
        const auto out = model_.forward(sample.clip, ctx, cfg_.model.aux_loss, f_long);
        loss += objective(out, sample.tubes, cfg_.model).item();
        const auto decoded = extract_tubelets(out.final, cfg_.model, true, 0, index);
        dets.insert(dets.end(), decoded.begin(), decoded.end());
        const auto fg = frame_gts(sample, index);
        fgts.insert(fgts.end(), fg.begin(), fg.end());
    }
    loss /= static_cast<double>(val_count_);
    const EvalReport report = frame_map(frame_detections(dets), fgts);
    return {loss, report.map};
}

void Trainer::optimizer_step() {
    opt_.clip_grad_norm(cfg_.train.grad_clip);
    opt_.step();
    opt_.zero_grad();
    ++state_.step;
}

void Trainer::save(const std::string& name) {
    save_checkpoint(out_dir_ + "/" + name, run_config_to_json(cfg_), model_.params(), &opt_,
                    state_, rng_.state());
}

void Trainer::append_csv(const EpochLog& row) const {
    std::ofstream csv(out_dir_ + "/metrics.csv", std::ios::app);
    char line[200];
    std::snprintf(line, sizeof line, "%lld,%lld,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(row.step), static_cast<long long>(row.epoch),
                  row.train_loss, row.val_frame_map, row.lr);
    csv << line;
    if (!csv) throw DataError("cannot write metrics file in " + out_dir_);
}

const std::vector<EpochLog>& Trainer::train(int64_t until_epoch) {
    logs_.clear();
    int64_t last_epoch = cfg_.train.epochs;
    if (until_epoch > 0) last_epoch = std::min(last_epoch, until_epoch);
    const bool fresh = !resumed_ && state_.step == 0 && state_.epoch == 0;
    if (fresh) {
        {
            std::ofstream csv(out_dir_ + "/metrics.csv", std::ios::trunc);
            csv << "step,epoch,train_loss,val_frame_map,lr\n";
            if (!csv) throw DataError("cannot write metrics file in " + out_dir_);
        }
        // Pre-training baseline over a fixed probe of the train split.
        const int64_t probe = std::min<int64_t>(train_count_, 32);
        double base = 0;
        for (int64_t i = 0; i < probe; ++i) {
            base += sample_loss(data_->sample(i), false);
        }
        base /= static_cast<double>(probe);
        const auto [vloss, vmap] = validate_pass();
        (void)vloss;
        state_.best_val_map = vmap;
        save("best.ckpt");
        save("last.ckpt");
        const EpochLog row{0, 0, base, vmap, opt_.transformer_lr()};
        append_csv(row);
        logs_.push_back(row);
        if (on_epoch_) on_epoch_(row);
    }
    std::vector<int64_t> order(static_cast<size_t>(train_count_));
    for (int64_t epoch = state_.epoch + 1; epoch <= last_epoch; ++epoch) {
        std::iota(order.begin(), order.end(), int64_t{0});
        for (int64_t i = train_count_ - 1; i > 0; --i) {
            const int64_t j = rng_.uniform_int(0, i);
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
        }
        double total = 0;
        int64_t pending = 0;
        for (int64_t k = 0; k < train_count_; ++k) {
            total += sample_loss(data_->sample(order[static_cast<size_t>(k)]), true);
            if (++pending == cfg_.train.batch_size) {
                optimizer_step();
                pending = 0;
            }
        }
        if (pending > 0) optimizer_step();
        state_.epoch = epoch;
        const auto [vloss, vmap] = validate_pass();
        if (vmap > state_.best_val_map) {
            state_.best_val_map = vmap;
            save("best.ckpt");
        }
        if (vloss < state_.best_val_loss - cfg_.train.plateau_min_delta) {
            state_.best_val_loss = vloss;
            state_.plateau_wait = 0;
        } else if (++state_.plateau_wait >= cfg_.train.plateau_patience) {
            state_.lr_scale *= 0.1;
            opt_.set_lr_scale(state_.lr_scale);
            state_.plateau_wait = 0;
        }
        save("last.ckpt");
        const EpochLog row{state_.step, epoch, total / static_cast<double>(train_count_), vmap,
                           opt_.transformer_lr()};
        append_csv(row);
        logs_.push_back(row);
        if (on_epoch_) on_epoch_(row);
    }
    return logs_;
}

}  // namespace tuber
