#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tuber {

enum class ClassHeadKind { plain, short_term, long_term };

ClassHeadKind class_head_from_string(const std::string& s);
std::string to_string(ClassHeadKind k);

struct TubeRConfig {
    int64_t tubelet_count = 8;       // N
    int64_t t_in = 16;
    int64_t t_out = 8;
    int64_t label_count = 5;         // L, last slot is background
    int64_t model_dim = 64;          // C'
    int64_t encoder_layers = 2;
    int64_t decoder_layers = 2;
    int64_t head_count = 4;
    double lambda_switch = 1.0;      // lambda1
    double lambda_class = 5.0;       // lambda2
    double lambda_box = 2.0;         // lambda3
    double lambda_iou = 2.0;         // lambda4
    double switch_threshold = 0.5;
    double score_threshold = 0.05;
    int64_t context_window = 3;      // w
    int64_t compress_tokens0 = 64;   // n0
    int64_t compress_tokens1 = 16;   // n1
    bool temporal_downsample = true;
    bool pos_on_value = false;
    std::vector<int64_t> backbone_channels = {16, 32};  // third layer outputs model_dim
    ClassHeadKind class_head = ClassHeadKind::short_term;
    bool single_query = false;       // ablation: one box embedding broadcast over T_out
    bool share_ta_params = false;    // one tubelet-attention parameter set across decoder layers
    bool aux_loss = true;            // supervise intermediate decoder layers
    bool switch_in_match_cost = true;
    double dropout = 0.0;
    double background_weight = 0.1;  // CE weight on unmatched (background) predictions

    friend bool operator==(const TubeRConfig&, const TubeRConfig&) = default;

    int64_t background_class() const { return label_count - 1; }
    int64_t temporal_stride() const { return temporal_downsample ? 2 : 1; }
    int64_t t_prime() const { return t_in / temporal_stride(); }

    // Throws ConfigError on an inconsistent configuration.
    void validate() const;
};

// Attention-score element counts for factorized tubelet attention vs. full
// joint attention over N*T tokens: (T*N^2 + N*T^2, (N*T)^2).
std::pair<int64_t, int64_t> interaction_count(int64_t n, int64_t t);

}  // namespace tuber
