#include "tuber/runconfig.hpp"

#include <json.hpp>

#include <fstream>
#include <initializer_list>

#include "tuber/dataset_io.hpp"
#include "tuber/errors.hpp"

namespace tuber {

using nlohmann::json;

namespace {

void require_keys(const json& j, const char* scope,
                  std::initializer_list<const char*> known) {
    if (!j.is_object())
        throw ConfigError(std::string("run config: '") + scope + "' must be an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok)
            throw ConfigError(std::string("run config: unknown key '") + key + "' in " + scope);
    }
    for (const char* k : known)
        if (!j.contains(k))
            throw ConfigError(std::string("run config: missing key '") + k + "' in " + scope);
}

json model_json(const TubeRConfig& m) {
    return {
        {"tubelet_count", m.tubelet_count},
        {"t_in", m.t_in},
        {"t_out", m.t_out},
        {"label_count", m.label_count},
        {"model_dim", m.model_dim},
        {"encoder_layers", m.encoder_layers},
        {"decoder_layers", m.decoder_layers},
        {"head_count", m.head_count},
        {"lambda_switch", m.lambda_switch},
        {"lambda_class", m.lambda_class},
        {"lambda_box", m.lambda_box},
        {"lambda_iou", m.lambda_iou},
        {"switch_threshold", m.switch_threshold},
        {"score_threshold", m.score_threshold},
        {"context_window", m.context_window},
        {"compress_tokens0", m.compress_tokens0},
        {"compress_tokens1", m.compress_tokens1},
        {"temporal_downsample", m.temporal_downsample},
        {"pos_on_value", m.pos_on_value},
        {"backbone_channels", m.backbone_channels},
        {"class_head", to_string(m.class_head)},
        {"single_query", m.single_query},
        {"share_ta_params", m.share_ta_params},
        {"aux_loss", m.aux_loss},
        {"switch_in_match_cost", m.switch_in_match_cost},
        {"dropout", m.dropout},
        {"background_weight", m.background_weight},
    };
}

TubeRConfig model_from(const json& j) {
    require_keys(j, "model",
                 {"tubelet_count", "t_in", "t_out", "label_count", "model_dim",
                  "encoder_layers", "decoder_layers", "head_count", "lambda_switch",
                  "lambda_class", "lambda_box", "lambda_iou", "switch_threshold",
                  "score_threshold", "context_window", "compress_tokens0", "compress_tokens1",
                  "temporal_downsample", "pos_on_value", "backbone_channels", "class_head",
                  "single_query", "share_ta_params", "aux_loss", "switch_in_match_cost",
                  "dropout", "background_weight"});
    TubeRConfig m;
    try {
        m.tubelet_count = j.at("tubelet_count").get<int64_t>();
        m.t_in = j.at("t_in").get<int64_t>();
        m.t_out = j.at("t_out").get<int64_t>();
        m.label_count = j.at("label_count").get<int64_t>();
        m.model_dim = j.at("model_dim").get<int64_t>();
        m.encoder_layers = j.at("encoder_layers").get<int64_t>();
        m.decoder_layers = j.at("decoder_layers").get<int64_t>();
        m.head_count = j.at("head_count").get<int64_t>();
        m.lambda_switch = j.at("lambda_switch").get<double>();
        m.lambda_class = j.at("lambda_class").get<double>();
        m.lambda_box = j.at("lambda_box").get<double>();
        m.lambda_iou = j.at("lambda_iou").get<double>();
        m.switch_threshold = j.at("switch_threshold").get<double>();
        m.score_threshold = j.at("score_threshold").get<double>();
        m.context_window = j.at("context_window").get<int64_t>();
        m.compress_tokens0 = j.at("compress_tokens0").get<int64_t>();
        m.compress_tokens1 = j.at("compress_tokens1").get<int64_t>();
        m.temporal_downsample = j.at("temporal_downsample").get<bool>();
        m.pos_on_value = j.at("pos_on_value").get<bool>();
        m.backbone_channels = j.at("backbone_channels").get<std::vector<int64_t>>();
        m.class_head = class_head_from_string(j.at("class_head").get<std::string>());
        m.single_query = j.at("single_query").get<bool>();
        m.share_ta_params = j.at("share_ta_params").get<bool>();
        m.aux_loss = j.at("aux_loss").get<bool>();
        m.switch_in_match_cost = j.at("switch_in_match_cost").get<bool>();
        m.dropout = j.at("dropout").get<double>();
        m.background_weight = j.at("background_weight").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run config model section: ") + e.what());
    }
    return m;
}

json optim_json(const AdamWConfig& o) {
    return {
        {"backbone_lr", o.backbone_lr},   {"transformer_lr", o.transformer_lr},
        {"weight_decay", o.weight_decay}, {"beta1", o.beta1},
        {"beta2", o.beta2},               {"eps", o.eps},
    };
}

AdamWConfig optim_from(const json& j) {
    require_keys(j, "optimizer",
                 {"backbone_lr", "transformer_lr", "weight_decay", "beta1", "beta2", "eps"});
    AdamWConfig o;
    try {
        o.backbone_lr = j.at("backbone_lr").get<double>();
        o.transformer_lr = j.at("transformer_lr").get<double>();
        o.weight_decay = j.at("weight_decay").get<double>();
        o.beta1 = j.at("beta1").get<double>();
        o.beta2 = j.at("beta2").get<double>();
        o.eps = j.at("eps").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run config optimizer section: ") + e.what());
    }
    return o;
}

json train_json(const TrainSchedule& t) {
    return {
        {"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"grad_clip", t.grad_clip},
        {"val_fraction", t.val_fraction},
        {"plateau_patience", t.plateau_patience},
        {"plateau_min_delta", t.plateau_min_delta},
    };
}

TrainSchedule train_from(const json& j) {
    require_keys(j, "train",
                 {"epochs", "batch_size", "grad_clip", "val_fraction", "plateau_patience",
                  "plateau_min_delta"});
    TrainSchedule t;
    try {
        t.epochs = j.at("epochs").get<int64_t>();
        t.batch_size = j.at("batch_size").get<int64_t>();
        t.grad_clip = j.at("grad_clip").get<double>();
        t.val_fraction = j.at("val_fraction").get<double>();
        t.plateau_patience = j.at("plateau_patience").get<int64_t>();
        t.plateau_min_delta = j.at("plateau_min_delta").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run config train section: ") + e.what());
    }
    return t;
}

}  // namespace

void RunConfig::validate() const {
    model.validate();
    data.validate();
    if (model.label_count != data.class_count + 1)
        throw ConfigError("run config: label_count must equal data class_count + 1");
    if (model.t_in != data.t_in || model.t_out != data.t_out)
        throw ConfigError("run config: model and data clip geometry disagree");
    if (train.epochs < 1) throw ConfigError("run config: epochs must be positive");
    if (train.batch_size < 1) throw ConfigError("run config: batch_size must be positive");
    if (train.grad_clip <= 0) throw ConfigError("run config: grad_clip must be positive");
    if (train.val_fraction < 0 || train.val_fraction >= 1)
        throw ConfigError("run config: val_fraction must lie in [0, 1)");
    if (train.plateau_patience < 1)
        throw ConfigError("run config: plateau_patience must be positive");
    if (train.plateau_min_delta < 0)
        throw ConfigError("run config: plateau_min_delta must be non-negative");
}

std::string run_config_to_json(const RunConfig& cfg) {
    const json j = {
        {"model", model_json(cfg.model)},
        {"data", json::parse(synth_config_to_json(cfg.data))},
        {"optimizer", optim_json(cfg.optim)},
        {"train", train_json(cfg.train)},
        {"data_dir", cfg.data_dir},
        {"out_dir", cfg.out_dir},
        {"seed", cfg.seed},
    };
    return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    }
    require_keys(j, "run config",
                 {"model", "data", "optimizer", "train", "data_dir", "out_dir", "seed"});
    RunConfig cfg;
    cfg.model = model_from(j.at("model"));
    cfg.data = synth_config_from_json(j.at("data").dump());
    cfg.optim = optim_from(j.at("optimizer"));
    cfg.train = train_from(j.at("train"));
    try {
        cfg.data_dir = j.at("data_dir").get<std::string>();
        cfg.out_dir = j.at("out_dir").get<std::string>();
        cfg.seed = j.at("seed").get<uint64_t>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run config: ") + e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read run config file: " + path);
    std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return run_config_from_json(text);
}

}  // namespace tuber
