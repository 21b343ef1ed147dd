#include "tuber/config.hpp"

#include "tuber/errors.hpp"

namespace tuber {

ClassHeadKind class_head_from_string(const std::string& s) {
    if (s == "plain") return ClassHeadKind::plain;
    if (s == "short_term") return ClassHeadKind::short_term;
    if (s == "long_term") return ClassHeadKind::long_term;
    throw ConfigError("unknown class_head '" + s + "' (plain | short_term | long_term)");
}

std::string to_string(ClassHeadKind k) {
    switch (k) {
        case ClassHeadKind::plain: return "plain";
        case ClassHeadKind::short_term: return "short_term";
        case ClassHeadKind::long_term: return "long_term";
    }
    return "plain";
}

void TubeRConfig::validate() const {
    if (tubelet_count < 1) throw ConfigError("tubelet_count must be >= 1");
    if (label_count < 2) throw ConfigError("label_count must include background, >= 2");
    if (model_dim < 6) throw ConfigError("model_dim must be >= 6");
    if (head_count < 1 || model_dim % head_count != 0)
        throw ConfigError("model_dim must be divisible by head_count");
    if (t_in < 1 || t_out < 1) throw ConfigError("t_in and t_out must be >= 1");
    if (temporal_downsample) {
        if (t_in % 2 != 0) throw ConfigError("temporal_downsample requires even t_in");
        if (t_out > t_prime())
            throw ConfigError("t_out must be <= t_in / temporal stride (sparse tubelets)");
    } else if (t_out != t_in) {
        throw ConfigError("dense tubelets require t_out == t_in");
    }
    if (t_prime() % t_out != 0)
        throw ConfigError("t_prime must be a multiple of t_out for frame alignment");
    if (encoder_layers < 0 || decoder_layers < 0) throw ConfigError("layer counts must be >= 0");
    if (lambda_switch < 0 || lambda_class < 0 || lambda_box < 0 || lambda_iou < 0)
        throw ConfigError("loss weights must be non-negative");
    if (switch_threshold < 0 || switch_threshold > 1 || score_threshold < 0 || score_threshold > 1)
        throw ConfigError("thresholds must lie in [0, 1]");
    if (context_window < 0) throw ConfigError("context_window must be >= 0");
    if (compress_tokens1 < 1 || compress_tokens0 < compress_tokens1)
        throw ConfigError("need compress_tokens0 >= compress_tokens1 >= 1");
    if (backbone_channels.size() != 2)
        throw ConfigError("backbone_channels must list the two intermediate widths");
    for (int64_t c : backbone_channels)
        if (c < 1) throw ConfigError("backbone channel widths must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
    if (background_weight <= 0.0) throw ConfigError("background_weight must be positive");
}

std::pair<int64_t, int64_t> interaction_count(int64_t n, int64_t t) {
    if (n < 1 || t < 1) throw ConfigError("interaction_count requires n, t >= 1");
    return {t * n * n + n * t * t, (n * t) * (n * t)};
}

}  // namespace tuber
