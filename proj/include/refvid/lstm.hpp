#pragma once

#include <string>
#include <vector>

#include "refvid/graph.hpp"

namespace refvid {

/// Standard LSTM cell with packed gates [input, forget, cell, output].
/// Forget-gate bias segment is initialized to +1.
struct LstmCell {
    ParamPtr wx; // [4H, In]
    ParamPtr wh; // [4H, H]
    ParamPtr b;  // [4H]
    int in = 0;
    int hidden = 0;

    static LstmCell create(const std::string& name, int in, int hidden, Rng& rng,
                           ParamStore& store);
};

/// Cell parameters bound into one graph; reuse across time steps.
struct BoundLstmCell {
    Value wx, wh, b;
    int hidden = 0;
};

BoundLstmCell bind(const LstmCell& cell);

/// One recurrence step; h is returned, the new cell state is written to c_out.
Value lstm_step(const BoundLstmCell& cell, const Value& x, const Value& h_prev,
                const Value& c_prev, Value& c_out);

/// Encode a sequence from zero initial state; returns one hidden state per step.
std::vector<Value> lstm_encode(const LstmCell& cell, const std::vector<Value>& seq);

/// Two-layer bidirectional LSTM. Output per step is [h1_fwd, h1_bwd, h2_fwd, h2_bwd],
/// width 4*per_dir; layer 2 consumes layer 1's concatenated states.
struct BiLstm {
    LstmCell fwd1, bwd1, fwd2, bwd2;
    int per_dir = 0;

    static BiLstm create(const std::string& name, int in, int per_dir, Rng& rng,
                         ParamStore& store);

    std::vector<Value> encode(const std::vector<Value>& seq) const;
};

} // namespace refvid
