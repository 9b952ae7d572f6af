#pragma once

#include <vector>

#include "refvid/lstm.hpp"
#include "refvid/synth.hpp"

namespace refvid {

inline constexpr int kQueryLen = 20;

struct TextEncoderConfig {
    int embed_dim = 32; // C_e, must match the dataset's frozen table
    int per_dir = 32;   // d; word states are 4d wide
    // pool hidden states instead of embeddings (requires 4*per_dir == embed_dim)
    bool pool_hidden = false;
};

struct QueryEncoding {
    Tensor embeddings;              // [kQueryLen, C_e], zero rows on padding
    std::vector<Value> word_states; // valid_len states, each [4d]
    Value attn_actor, attn_action;  // [valid_len] each, sums to 1
    Tensor gamma_actor, gamma_action; // [kQueryLen], zero on padding
    Value q_actor, q_action;        // pooled query vectors
    int valid_len = 0;
};

/// Look up the frozen table; pads/truncates to kQueryLen rows. No gradient
/// flows to the table.
Tensor embed_tokens(const std::vector<int>& ids, const Vocab& vocab);

/// Query side of the model: frozen embeddings, two-layer BiLSTM over the
/// valid positions, one attention head per module pooling the embeddings.
struct TextEncoder {
    TextEncoderConfig cfg;
    BiLstm bilstm;
    ParamPtr w_actor;  // [1, 4d]
    ParamPtr w_action; // [1, 4d]
    ParamStore params;

    static TextEncoder create(const TextEncoderConfig& cfg, Rng& rng);

    QueryEncoding encode(const std::vector<int>& ids, const Vocab& vocab) const;
};

} // namespace refvid
