#include "refvid/text_encoder.hpp"

#include "refvid/error.hpp"

namespace refvid {

Tensor embed_tokens(const std::vector<int>& ids, const Vocab& vocab) {
    const int dim = vocab.table.dim(1);
    Tensor out({kQueryLen, dim});
    const int n = std::min<int>(static_cast<int>(ids.size()), kQueryLen);
    for (int t = 0; t < n; ++t) {
        const int id = ids[static_cast<size_t>(t)];
        if (id < 0 || id >= vocab.size())
            throw VocabError("token id " + std::to_string(id) + " outside vocabulary of " +
                             std::to_string(vocab.size()));
        for (int cdim = 0; cdim < dim; ++cdim)
            out[static_cast<int64_t>(t) * dim + cdim] =
                vocab.table[static_cast<int64_t>(id) * dim + cdim];
    }
    return out;
}

TextEncoder TextEncoder::create(const TextEncoderConfig& cfg, Rng& rng) {
    if (cfg.pool_hidden && 4 * cfg.per_dir != cfg.embed_dim)
        throw ConfigError("pool_hidden requires the word-state width 4d to equal C_e");
    TextEncoder enc;
    enc.cfg = cfg;
    enc.bilstm = BiLstm::create("text.bilstm", cfg.embed_dim, cfg.per_dir, rng, enc.params);
    const int ch = 4 * cfg.per_dir;
    enc.w_actor = enc.params.add(make_weight("text.attn_actor.w", {1, ch}, ch, rng));
    enc.w_action = enc.params.add(make_weight("text.attn_action.w", {1, ch}, ch, rng));
    return enc;
}

QueryEncoding TextEncoder::encode(const std::vector<int>& ids, const Vocab& vocab) const {
    QueryEncoding q;
    q.embeddings = embed_tokens(ids, vocab);
    // id 0 is the padding token; trailing pads carry no state or attention
    int len = std::min<int>(static_cast<int>(ids.size()), kQueryLen);
    while (len > 0 && ids[static_cast<size_t>(len - 1)] == 0) --len;
    q.valid_len = len;
    if (q.valid_len < 1) throw ArgumentError("encode: empty query");
    if (q.embeddings.dim(1) != cfg.embed_dim)
        throw ConfigError("vocab embedding width " + std::to_string(q.embeddings.dim(1)) +
                          " does not match configured C_e " + std::to_string(cfg.embed_dim));

    // recurrence and attention run over valid positions only; padding carries
    // no state and no attention mass
    std::vector<Value> emb(static_cast<size_t>(q.valid_len));
    for (int t = 0; t < q.valid_len; ++t) {
        Tensor row({cfg.embed_dim});
        for (int cdim = 0; cdim < cfg.embed_dim; ++cdim)
            row[cdim] = q.embeddings[static_cast<int64_t>(t) * cfg.embed_dim + cdim];
        emb[static_cast<size_t>(t)] = input(std::move(row));
    }
    q.word_states = bilstm.encode(emb);

    auto attend = [&](const ParamPtr& wm) {
        Value w = leaf(wm);
        std::vector<Value> logits(q.word_states.size());
        for (size_t t = 0; t < q.word_states.size(); ++t)
            logits[t] = matvec(w, q.word_states[t]);
        return softmax(concat(logits));
    };
    q.attn_actor = attend(w_actor);
    q.attn_action = attend(w_action);

    auto pool = [&](const Value& attn) {
        const std::vector<Value>& basis = cfg.pool_hidden ? q.word_states : emb;
        Value acc;
        for (int t = 0; t < q.valid_len; ++t) {
            Value term = scale_by(basis[static_cast<size_t>(t)], slice(attn, t, 1));
            acc = t == 0 ? term : add(acc, term);
        }
        return acc;
    };
    q.q_actor = pool(q.attn_actor);
    q.q_action = pool(q.attn_action);

    q.gamma_actor = Tensor::zeros({kQueryLen});
    q.gamma_action = Tensor::zeros({kQueryLen});
    for (int t = 0; t < q.valid_len; ++t) {
        q.gamma_actor[t] = q.attn_actor->val[t];
        q.gamma_action[t] = q.attn_action->val[t];
    }
    return q;
}

} // namespace refvid
