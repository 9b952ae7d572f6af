#include "refvid/lstm.hpp"

#include "refvid/error.hpp"

namespace refvid {

LstmCell LstmCell::create(const std::string& name, int in, int hidden, Rng& rng,
                          ParamStore& store) {
    LstmCell c;
    c.in = in;
    c.hidden = hidden;
    c.wx = store.add(make_weight(name + ".wx", {4 * hidden, in}, in, rng));
    c.wh = store.add(make_weight(name + ".wh", {4 * hidden, hidden}, hidden, rng));
    c.b = store.add(make_bias(name + ".b", 4 * hidden));
    for (int i = hidden; i < 2 * hidden; ++i) c.b->value[i] = 1.0; // forget gate
    return c;
}

BoundLstmCell bind(const LstmCell& cell) {
    return BoundLstmCell{leaf(cell.wx), leaf(cell.wh), leaf(cell.b), cell.hidden};
}

Value lstm_step(const BoundLstmCell& cell, const Value& x, const Value& h_prev,
                const Value& c_prev, Value& c_out) {
    const int hh = cell.hidden;
    Value z = add(add(matvec(cell.wx, x), matvec(cell.wh, h_prev)), cell.b);
    Value i = sigmoid(slice(z, 0, hh));
    Value f = sigmoid(slice(z, hh, hh));
    Value g = tanh_act(slice(z, 2 * hh, hh));
    Value o = sigmoid(slice(z, 3 * hh, hh));
    c_out = add(mul(f, c_prev), mul(i, g));
    return mul(o, tanh_act(c_out));
}

std::vector<Value> lstm_encode(const LstmCell& cell, const std::vector<Value>& seq) {
    if (seq.empty()) throw ArgumentError("lstm_encode: empty sequence");
    for (const auto& x : seq)
        if (x->val.rank() != 1 || x->val.dim(0) != cell.in)
            throw DimensionError("lstm_encode: element " + shape_str(x->val.shape) +
                                 " vs cell input width " + std::to_string(cell.in));
    BoundLstmCell bc = bind(cell);
    Value h = input(Tensor::zeros({cell.hidden}));
    Value c = input(Tensor::zeros({cell.hidden}));
    std::vector<Value> hs;
    hs.reserve(seq.size());
    for (const auto& x : seq) {
        Value c_next;
        h = lstm_step(bc, x, h, c, c_next);
        c = c_next;
        hs.push_back(h);
    }
    return hs;
}

BiLstm BiLstm::create(const std::string& name, int in, int per_dir, Rng& rng,
                      ParamStore& store) {
    BiLstm b;
    b.per_dir = per_dir;
    b.fwd1 = LstmCell::create(name + ".l1f", in, per_dir, rng, store);
    b.bwd1 = LstmCell::create(name + ".l1b", in, per_dir, rng, store);
    b.fwd2 = LstmCell::create(name + ".l2f", 2 * per_dir, per_dir, rng, store);
    b.bwd2 = LstmCell::create(name + ".l2b", 2 * per_dir, per_dir, rng, store);
    return b;
}

namespace {
std::vector<Value> reversed(std::vector<Value> v) {
    std::reverse(v.begin(), v.end());
    return v;
}
} // namespace

std::vector<Value> BiLstm::encode(const std::vector<Value>& seq) const {
    if (seq.empty()) throw ArgumentError("bilstm_encode: empty sequence");
    const size_t t_len = seq.size();
    std::vector<Value> f1 = lstm_encode(fwd1, seq);
    std::vector<Value> b1 = reversed(lstm_encode(bwd1, reversed(seq)));
    std::vector<Value> h1(t_len);
    for (size_t t = 0; t < t_len; ++t) h1[t] = concat({f1[t], b1[t]});
    std::vector<Value> f2 = lstm_encode(fwd2, h1);
    std::vector<Value> b2 = reversed(lstm_encode(bwd2, reversed(h1)));
    std::vector<Value> out(t_len);
    for (size_t t = 0; t < t_len; ++t) out[t] = concat({h1[t], concat({f2[t], b2[t]})});
    return out;
}

} // namespace refvid
