#pragma once

// Internal function entry prediction: tokenized reachable blocks are fed
// through an instruction-level bi-LSTM over the flat token stream, block
// features (mean token embedding + captured directional states at the block
// edges) go through a block-level bi-LSTM, a linear layer produces per-block
// emissions, and a CRF decodes the entry labels.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "febi/crf.hpp"
#include "febi/evm.hpp"
#include "febi/nn.hpp"
#include "febi/segment.hpp"

namespace febi::fsi {

using nn::Mat;
using nn::Vec;

struct EmptyContract : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DivergedTraining : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ModelFormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Vocabulary: closed and fixed. PUSH operands are dropped unless the operand
// is a jump destination, which keeps a DEST-marked token.

class Vocabulary {
public:
    Vocabulary() {
        add("UNK");
        for (int op = 0; op < 256; ++op) {
            if (evm::is_push(std::uint8_t(op))) continue;
            const auto& oi = evm::info(std::uint8_t(op));
            if (oi.known) add(oi.name);
        }
        add("INVALID");  // unknown bytes share the INVALID token
        for (int k = 1; k <= 32; ++k) {
            add("PUSH" + std::to_string(k));
            add("PUSH" + std::to_string(k) + "_DEST");
        }
    }

    int index(const std::string& token) const {
        auto it = map_.find(token);
        return it == map_.end() ? 0 : it->second;  // 0 = UNK
    }
    const std::string& token(int idx) const { return tokens_.at(idx); }
    int size() const { return int(tokens_.size()); }

    std::uint64_t hash() const {  // FNV-1a over the joined token list
        std::uint64_t h = 1469598103934665603ULL;
        for (const auto& t : tokens_) {
            for (char c : t) {
                h ^= std::uint8_t(c);
                h *= 1099511628211ULL;
            }
            h ^= std::uint8_t('\n');
            h *= 1099511628211ULL;
        }
        return h;
    }

private:
    void add(const std::string& t) {
        if (map_.emplace(t, int(tokens_.size())).second) tokens_.push_back(t);
    }
    std::vector<std::string> tokens_;
    std::map<std::string, int> map_;
};

inline const Vocabulary& vocabulary() {
    static const Vocabulary v;
    return v;
}

struct BlockTokens {
    std::size_t entry_offset = 0;
    bool starts_with_jumpdest = false;
    std::vector<int> tokens;
};

inline std::string token_of(const evm::Program& p, const evm::Instruction& ins) {
    if (evm::is_push(ins.opcode)) {
        std::string t = "PUSH" + std::to_string(evm::push_width(ins.opcode));
        if (p.is_jumpdest(*ins.push_operand)) t += "_DEST";
        return t;
    }
    return ins.known ? ins.mnemonic() : "INVALID";
}

inline std::vector<BlockTokens> preprocess(const evm::Program& p) {
    std::vector<BlockTokens> out;
    for (const auto& b : seg::reachable_blocks(p)) {
        BlockTokens bt;
        bt.entry_offset = b.entry_offset;
        bt.starts_with_jumpdest =
            p.instructions[b.first].opcode == evm::JUMPDEST &&
            p.instructions[b.first].known;
        for (std::size_t i = b.first; i <= b.last; ++i)
            bt.tokens.push_back(vocabulary().index(token_of(p, p.instructions[i])));
        out.push_back(std::move(bt));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parameters

struct Dims {
    int emb = 32;
    int h1 = 64;
    int h2 = 64;
};

struct FsiModelParams {
    Dims dims;
    Mat embedding;               // emb x vocab
    nn::LstmParams inst_fwd, inst_bwd;    // input emb, hidden h1
    nn::LstmParams block_fwd, block_bwd;  // input emb + 2*h1, hidden h2
    Mat proj_w;                  // 2 x (2*h2)
    Vec proj_b;                  // 2
    crf::Transitions transitions;

    static FsiModelParams init(Dims dims, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        FsiModelParams p;
        p.dims = dims;
        std::uniform_real_distribution<double> dist(-0.1, 0.1);
        p.embedding.resize(dims.emb, vocabulary().size());
        for (int i = 0; i < p.embedding.rows(); ++i)
            for (int j = 0; j < p.embedding.cols(); ++j)
                p.embedding(i, j) = dist(rng);
        p.inst_fwd = nn::LstmParams::init(dims.emb, dims.h1, rng);
        p.inst_bwd = nn::LstmParams::init(dims.emb, dims.h1, rng);
        int block_in = dims.emb + 2 * dims.h1;
        p.block_fwd = nn::LstmParams::init(block_in, dims.h2, rng);
        p.block_bwd = nn::LstmParams::init(block_in, dims.h2, rng);
        p.proj_w.resize(2, 2 * dims.h2);
        for (int i = 0; i < p.proj_w.rows(); ++i)
            for (int j = 0; j < p.proj_w.cols(); ++j) p.proj_w(i, j) = dist(rng);
        p.proj_b = Vec::Zero(2);
        p.transitions.setZero();
        return p;
    }

    template <class F>
    void for_each_param(F&& f) {
        f(embedding);
        for (auto* l : {&inst_fwd, &inst_bwd, &block_fwd, &block_bwd}) {
            f(l->wx);
            f(l->wh);
            f(l->b);
        }
        f(proj_w);
        f(proj_b);
        f(transitions);
    }

    bool finite() const {
        bool ok = true;
        const_cast<FsiModelParams*>(this)->for_each_param(
            [&](const auto& m) { ok = ok && m.allFinite(); });
        return ok;
    }
};

struct FsiGrads {
    Mat embedding;
    nn::LstmGrads inst_fwd, inst_bwd, block_fwd, block_bwd;
    Mat proj_w;
    Vec proj_b;
    Mat transitions;

    static FsiGrads zero_like(const FsiModelParams& p) {
        FsiGrads g;
        g.embedding = Mat::Zero(p.embedding.rows(), p.embedding.cols());
        g.inst_fwd = nn::LstmGrads::zero_like(p.inst_fwd);
        g.inst_bwd = nn::LstmGrads::zero_like(p.inst_bwd);
        g.block_fwd = nn::LstmGrads::zero_like(p.block_fwd);
        g.block_bwd = nn::LstmGrads::zero_like(p.block_bwd);
        g.proj_w = Mat::Zero(2, p.proj_w.cols());
        g.proj_b = Vec::Zero(2);
        g.transitions = Mat::Zero(2, 2);
        return g;
    }
    void add(const FsiGrads& o) {
        embedding += o.embedding;
        inst_fwd.add(o.inst_fwd);
        inst_bwd.add(o.inst_bwd);
        block_fwd.add(o.block_fwd);
        block_bwd.add(o.block_bwd);
        proj_w += o.proj_w;
        proj_b += o.proj_b;
        transitions += o.transitions;
    }

    template <class F>
    void for_each(F&& f) {
        f(embedding);
        for (auto* l : {&inst_fwd, &inst_bwd, &block_fwd, &block_bwd}) {
            f(l->wx);
            f(l->wh);
            f(l->b);
        }
        f(proj_w);
        f(proj_b);
        f(transitions);
    }
};

// ---------------------------------------------------------------------------
// Forward pass with caches for backpropagation

struct ForwardResult {
    crf::Emissions emissions;  // L x 2
    crf::Transitions transitions;

    // caches
    std::vector<int> flat_tokens;
    std::vector<std::size_t> block_first, block_last;  // flat indices
    nn::LstmCache inst_fwd_cache, inst_bwd_cache;
    nn::LstmCache block_fwd_cache, block_bwd_cache;
    std::vector<Vec> block_inputs;  // concatenated block features
    std::vector<Vec> block_outputs;  // [g_fwd; g_bwd] per block
};

inline ForwardResult forward(const FsiModelParams& p,
                             const std::vector<BlockTokens>& blocks) {
    if (blocks.empty()) throw EmptyContract("contract has no reachable blocks");
    ForwardResult r;
    r.transitions = p.transitions;
    for (const auto& b : blocks) {
        r.block_first.push_back(r.flat_tokens.size());
        r.flat_tokens.insert(r.flat_tokens.end(), b.tokens.begin(),
                             b.tokens.end());
        r.block_last.push_back(r.flat_tokens.size() - 1);
    }

    std::size_t n = r.flat_tokens.size();
    std::vector<Vec> xs(n);
    for (std::size_t t = 0; t < n; ++t) xs[t] = p.embedding.col(r.flat_tokens[t]);

    std::vector<Vec> hf = nn::lstm_forward(p.inst_fwd, xs, r.inst_fwd_cache);
    std::vector<Vec> xs_rev(xs.rbegin(), xs.rend());
    std::vector<Vec> hb_rev =
        nn::lstm_forward(p.inst_bwd, xs_rev, r.inst_bwd_cache);

    std::size_t nblocks = blocks.size();
    r.block_inputs.resize(nblocks);
    for (std::size_t i = 0; i < nblocks; ++i) {
        Vec mean = Vec::Zero(p.dims.emb);
        for (std::size_t t = r.block_first[i]; t <= r.block_last[i]; ++t)
            mean += xs[t];
        mean /= double(r.block_last[i] - r.block_first[i] + 1);
        Vec feat(p.dims.emb + 2 * p.dims.h1);
        feat << mean, hf[r.block_last[i]], hb_rev[n - 1 - r.block_first[i]];
        r.block_inputs[i] = std::move(feat);
    }

    std::vector<Vec> gf =
        nn::lstm_forward(p.block_fwd, r.block_inputs, r.block_fwd_cache);
    std::vector<Vec> in_rev(r.block_inputs.rbegin(), r.block_inputs.rend());
    std::vector<Vec> gb_rev =
        nn::lstm_forward(p.block_bwd, in_rev, r.block_bwd_cache);

    r.emissions.resize(Eigen::Index(nblocks), 2);
    r.block_outputs.resize(nblocks);
    for (std::size_t i = 0; i < nblocks; ++i) {
        Vec u(2 * p.dims.h2);
        u << gf[i], gb_rev[nblocks - 1 - i];
        r.emissions.row(Eigen::Index(i)) = (p.proj_w * u + p.proj_b).transpose();
        r.block_outputs[i] = std::move(u);
    }
    return r;
}

// Backward pass from a CRF emission/transition gradient.
inline FsiGrads backward(const FsiModelParams& p, const ForwardResult& r,
                         const crf::Emissions& d_emissions,
                         const crf::Transitions& d_transitions) {
    FsiGrads g = FsiGrads::zero_like(p);
    g.transitions = d_transitions;

    std::size_t nblocks = r.block_outputs.size();
    std::vector<Vec> d_gf(nblocks, Vec::Zero(p.dims.h2));
    std::vector<Vec> d_gb_rev(nblocks, Vec::Zero(p.dims.h2));
    for (std::size_t i = 0; i < nblocks; ++i) {
        Vec d_e = d_emissions.row(Eigen::Index(i)).transpose();
        g.proj_w += d_e * r.block_outputs[i].transpose();
        g.proj_b += d_e;
        Vec d_u = p.proj_w.transpose() * d_e;
        d_gf[i] = d_u.segment(0, p.dims.h2);
        d_gb_rev[nblocks - 1 - i] = d_u.segment(p.dims.h2, p.dims.h2);
    }

    std::vector<Vec> d_in_fwd =
        nn::lstm_backward(p.block_fwd, r.block_fwd_cache, d_gf, g.block_fwd);
    std::vector<Vec> d_in_bwd_rev =
        nn::lstm_backward(p.block_bwd, r.block_bwd_cache, d_gb_rev, g.block_bwd);

    std::size_t n = r.flat_tokens.size();
    std::vector<Vec> d_hf(n, Vec::Zero(p.dims.h1));
    std::vector<Vec> d_hb_rev(n, Vec::Zero(p.dims.h1));
    // token-level gradient from mean pooling, accumulated directly into the
    // embedding below
    std::vector<Vec> d_mean(nblocks);
    for (std::size_t i = 0; i < nblocks; ++i) {
        Vec d_feat = d_in_fwd[i] + d_in_bwd_rev[nblocks - 1 - i];
        d_mean[i] = d_feat.segment(0, p.dims.emb);
        d_hf[r.block_last[i]] += d_feat.segment(p.dims.emb, p.dims.h1);
        d_hb_rev[n - 1 - r.block_first[i]] +=
            d_feat.segment(p.dims.emb + p.dims.h1, p.dims.h1);
    }

    std::vector<Vec> d_x_fwd =
        nn::lstm_backward(p.inst_fwd, r.inst_fwd_cache, d_hf, g.inst_fwd);
    std::vector<Vec> d_x_bwd_rev =
        nn::lstm_backward(p.inst_bwd, r.inst_bwd_cache, d_hb_rev, g.inst_bwd);

    for (std::size_t t = 0; t < n; ++t) {
        g.embedding.col(r.flat_tokens[t]) +=
            d_x_fwd[t] + d_x_bwd_rev[n - 1 - t];
    }
    for (std::size_t i = 0; i < nblocks; ++i) {
        double len = double(r.block_last[i] - r.block_first[i] + 1);
        for (std::size_t t = r.block_first[i]; t <= r.block_last[i]; ++t)
            g.embedding.col(r.flat_tokens[t]) += d_mean[i] / len;
    }
    return g;
}

inline double loss_and_grads(const FsiModelParams& p,
                             const std::vector<BlockTokens>& blocks,
                             const std::vector<int>& labels, FsiGrads& out) {
    ForwardResult r = forward(p, blocks);
    double loss = crf::nll(r.emissions, r.transitions, labels);
    crf::Gradients cg = crf::nll_gradients(r.emissions, r.transitions, labels);
    out = backward(p, r, cg.d_emissions, cg.d_transitions);
    return loss;
}

// ---------------------------------------------------------------------------
// Training

struct LabeledSequence {
    std::string id;
    std::vector<BlockTokens> blocks;
    std::vector<int> labels;  // 1 = function entry (internal or public body)
};

struct TrainConfig {
    Dims dims;
    std::uint64_t seed = 1;
    int epochs = 20;
    int batch_size = 8;
    double learning_rate = 0.01;
    double momentum = 0.9;
    double clip_norm = 5.0;
    double plateau_decay = 0.5;      // lr multiplier when loss stops improving
    int plateau_patience = 3;        // epochs without improvement
    std::size_t token_cap = 50000;   // training truncation
    int pretrain_epochs = 0;         // optional next-token language model
    double pretrain_lr = 0.05;
};

struct TrainHistory {
    std::vector<double> epoch_loss;
};

namespace detail {

inline void clip_global_norm(FsiGrads& g, double clip) {
    double sq = 0;
    g.for_each([&](const auto& m) { sq += m.squaredNorm(); });
    double norm = std::sqrt(sq);
    if (norm > clip && norm > 0) {
        double s = clip / norm;
        g.for_each([&](auto& m) { m *= s; });
    }
}

inline std::vector<BlockTokens> truncate_blocks(
    const std::vector<BlockTokens>& blocks, std::size_t token_cap) {
    std::vector<BlockTokens> out;
    std::size_t total = 0;
    for (const auto& b : blocks) {
        if (!out.empty() && total + b.tokens.size() > token_cap) break;
        total += b.tokens.size();
        out.push_back(b);
    }
    return out;
}

// Next-token prediction over the flat stream, used to warm up the
// instruction-level layers before joint training.
inline void pretrain_language_model(FsiModelParams& p,
                                    const std::vector<LabeledSequence>& corpus,
                                    const TrainConfig& cfg,
                                    std::mt19937_64& rng) {
    int V = vocabulary().size();
    std::uniform_real_distribution<double> dist(-0.1, 0.1);
    Mat out_w(V, p.dims.h1);
    for (int i = 0; i < V; ++i)
        for (int j = 0; j < p.dims.h1; ++j) out_w(i, j) = dist(rng);
    Vec out_b = Vec::Zero(V);

    for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        for (const auto& seq : corpus) {
            std::vector<int> flat;
            for (const auto& b : seq.blocks)
                flat.insert(flat.end(), b.tokens.begin(), b.tokens.end());
            if (flat.size() < 2) continue;
            if (flat.size() > cfg.token_cap) flat.resize(cfg.token_cap);

            std::vector<Vec> xs(flat.size());
            for (std::size_t t = 0; t < flat.size(); ++t)
                xs[t] = p.embedding.col(flat[t]);
            nn::LstmCache cache;
            std::vector<Vec> hs = nn::lstm_forward(p.inst_fwd, xs, cache);

            std::vector<Vec> d_h(flat.size(), Vec::Zero(p.dims.h1));
            Mat d_out_w = Mat::Zero(V, p.dims.h1);
            Vec d_out_b = Vec::Zero(V);
            for (std::size_t t = 0; t + 1 < flat.size(); ++t) {
                Vec logits = out_w * hs[t] + out_b;
                double mx = logits.maxCoeff();
                Vec soft = (logits.array() - mx).exp();
                soft /= soft.sum();
                soft[flat[t + 1]] -= 1.0;
                d_out_w += soft * hs[t].transpose();
                d_out_b += soft;
                d_h[t] = out_w.transpose() * soft;
            }
            nn::LstmGrads g = nn::LstmGrads::zero_like(p.inst_fwd);
            std::vector<Vec> d_x =
                nn::lstm_backward(p.inst_fwd, cache, d_h, g);
            double lr = cfg.pretrain_lr / double(flat.size());
            p.inst_fwd.wx -= lr * g.wx;
            p.inst_fwd.wh -= lr * g.wh;
            p.inst_fwd.b -= lr * g.b;
            out_w -= lr * d_out_w;
            out_b -= lr * d_out_b;
            for (std::size_t t = 0; t < flat.size(); ++t)
                p.embedding.col(flat[t]) -= lr * d_x[t];
        }
    }
}

}  // namespace detail

inline FsiModelParams train(const std::vector<LabeledSequence>& corpus,
                            const TrainConfig& cfg,
                            TrainHistory* history = nullptr) {
    if (corpus.empty()) throw std::invalid_argument("empty training corpus");
    FsiModelParams p = FsiModelParams::init(cfg.dims, cfg.seed);
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    if (cfg.pretrain_epochs > 0)
        detail::pretrain_language_model(p, corpus, cfg, rng);

    FsiGrads velocity = FsiGrads::zero_like(p);
    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    double lr = cfg.learning_rate;
    double best_loss = std::numeric_limits<double>::infinity();
    int stall = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0;
        std::size_t counted = 0;
        for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
            FsiGrads batch = FsiGrads::zero_like(p);
            int in_batch = 0;
            for (std::size_t k = at;
                 k < order.size() && k < at + cfg.batch_size; ++k) {
                const LabeledSequence& seq = corpus[order[k]];
                std::vector<BlockTokens> blocks =
                    detail::truncate_blocks(seq.blocks, cfg.token_cap);
                std::vector<int> labels(seq.labels.begin(),
                                        seq.labels.begin() + blocks.size());
                FsiGrads g = FsiGrads::zero_like(p);
                double loss = loss_and_grads(p, blocks, labels, g);
                if (!std::isfinite(loss))
                    throw DivergedTraining("non-finite loss");
                double scale = 1.0 / double(blocks.size());
                g.for_each([&](auto& m) { m *= scale; });
                batch.add(g);
                epoch_loss += loss * scale;
                ++counted;
                ++in_batch;
            }
            double inv = 1.0 / double(in_batch);
            batch.for_each([&](auto& m) { m *= inv; });
            detail::clip_global_norm(batch, cfg.clip_norm);

            // momentum SGD, fixed parameter order for determinism
            auto step = [&](auto& vel, const auto& grad, auto& param) {
                vel = cfg.momentum * vel - lr * grad;
                param += vel;
            };
            step(velocity.embedding, batch.embedding, p.embedding);
            auto step_lstm = [&](nn::LstmGrads& vel, const nn::LstmGrads& grad,
                                 nn::LstmParams& param) {
                step(vel.wx, grad.wx, param.wx);
                step(vel.wh, grad.wh, param.wh);
                step(vel.b, grad.b, param.b);
            };
            step_lstm(velocity.inst_fwd, batch.inst_fwd, p.inst_fwd);
            step_lstm(velocity.inst_bwd, batch.inst_bwd, p.inst_bwd);
            step_lstm(velocity.block_fwd, batch.block_fwd, p.block_fwd);
            step_lstm(velocity.block_bwd, batch.block_bwd, p.block_bwd);
            step(velocity.proj_w, batch.proj_w, p.proj_w);
            step(velocity.proj_b, batch.proj_b, p.proj_b);
            Mat trans_grad = batch.transitions;
            velocity.transitions =
                cfg.momentum * velocity.transitions - lr * trans_grad;
            p.transitions += velocity.transitions;
        }
        epoch_loss /= double(counted);
        if (history) history->epoch_loss.push_back(epoch_loss);
        if (!p.finite()) throw DivergedTraining("non-finite parameters");

        if (epoch_loss < best_loss - 1e-6) {
            best_loss = epoch_loss;
            stall = 0;
        } else if (++stall >= cfg.plateau_patience) {
            lr *= cfg.plateau_decay;
            stall = 0;
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Prediction

struct EntryPrediction {
    std::size_t offset = 0;
    double probability = 0;
    int viterbi = 0;
};

struct PredictOptions {
    double threshold = 0.5;
    std::size_t token_cap = 50000;  // sliding-window width at inference
    std::set<std::size_t> excluded;  // interface entries
};

// Per-block marginals and Viterbi labels; long contracts are processed in
// sliding windows with one block of overlap, overlapped blocks keep their
// maximum marginal.
inline std::vector<EntryPrediction> analyze(const FsiModelParams& p,
                                            const std::vector<BlockTokens>& blocks,
                                            std::size_t token_cap = 50000) {
    if (blocks.empty()) return {};
    std::vector<EntryPrediction> preds(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i)
        preds[i].offset = blocks[i].entry_offset;

    std::size_t start = 0;
    while (start < blocks.size()) {
        std::size_t end = start;
        std::size_t tokens = 0;
        while (end < blocks.size() &&
               (end == start || tokens + blocks[end].tokens.size() <= token_cap)) {
            tokens += blocks[end].tokens.size();
            ++end;
        }
        std::vector<BlockTokens> window(blocks.begin() + start,
                                        blocks.begin() + end);
        ForwardResult r = forward(p, window);
        Eigen::VectorXd m = crf::marginals(r.emissions, r.transitions);
        std::vector<int> vit = crf::viterbi(r.emissions, r.transitions);
        for (std::size_t i = start; i < end; ++i) {
            double prob = m(Eigen::Index(i - start));
            if (prob > preds[i].probability) {
                preds[i].probability = prob;
                preds[i].viterbi = vit[i - start];
            }
        }
        if (end >= blocks.size()) break;
        // one-block overlap, unless the window held a single oversized block
        start = end - start > 1 ? end - 1 : end;
    }
    return preds;
}

inline std::vector<EntryPrediction> predict(const FsiModelParams& p,
                                            const evm::Program& program,
                                            const PredictOptions& opt) {
    std::vector<BlockTokens> blocks = preprocess(program);
    std::vector<EntryPrediction> all = analyze(p, blocks, opt.token_cap);
    std::vector<EntryPrediction> out;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const auto& b = blocks[i];
        if (!b.starts_with_jumpdest && b.entry_offset != 0) continue;
        if (opt.excluded.count(b.entry_offset)) continue;
        if (all[i].probability >= opt.threshold) out.push_back(all[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Baseline: the prior-work call-site heuristic. An entry is detected when a
// basic block direct-jumps to a JUMPDEST and the same block leaves another
// jump-destination constant (the return address) on its local stack.
inline std::set<std::size_t> baseline_entries(
    const evm::Program& p, const std::vector<seg::BasicBlock>& blocks) {
    std::set<std::size_t> entries;
    for (const auto& b : blocks) {
        if (b.terminator != seg::Terminator::Jump &&
            b.terminator != seg::Terminator::CondJump)
            continue;
        seg::JumpKind jk = seg::classify_jump(p, b);
        if (jk.kind != seg::JumpKind::Direct) continue;
        for (const u256& c : seg::surviving_constants(p, b)) {
            if (p.is_jumpdest(c)) {
                entries.insert(jk.target);
                break;
            }
        }
    }
    return entries;
}

// ---------------------------------------------------------------------------
// Serialization: versioned binary container, bit-exact round-trip.

namespace detail {

constexpr char kMagic[8] = {'F', 'E', 'B', 'I', 'F', 'S', 'I', '1'};
constexpr std::uint32_t kVersion = 1;

inline void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
inline void write_mat(std::ostream& os, const Mat& m) {
    write_u64(os, std::uint64_t(m.rows()));
    write_u64(os, std::uint64_t(m.cols()));
    os.write(reinterpret_cast<const char*>(m.data()),
             std::streamsize(sizeof(double) * m.size()));
}
inline Mat read_mat(std::istream& is) {
    std::uint64_t r = read_u64(is), c = read_u64(is);
    if (!is || r > (1u << 24) || c > (1u << 24))
        throw ModelFormatError("bad tensor header");
    Mat m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    is.read(reinterpret_cast<char*>(m.data()),
            std::streamsize(sizeof(double) * m.size()));
    if (!is) throw ModelFormatError("truncated tensor data");
    return m;
}

}  // namespace detail

inline void save(const FsiModelParams& p, std::ostream& os) {
    os.write(detail::kMagic, 8);
    detail::write_u64(os, detail::kVersion);
    detail::write_u64(os, vocabulary().hash());
    detail::write_u64(os, std::uint64_t(p.dims.emb));
    detail::write_u64(os, std::uint64_t(p.dims.h1));
    detail::write_u64(os, std::uint64_t(p.dims.h2));
    const_cast<FsiModelParams&>(p).for_each_param([&](const auto& m) {
        Mat as_mat = m;
        detail::write_mat(os, as_mat);
    });
}

inline FsiModelParams load(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, detail::kMagic, 8) != 0)
        throw ModelFormatError("not a model file");
    if (detail::read_u64(is) != detail::kVersion)
        throw ModelFormatError("unsupported model version");
    if (detail::read_u64(is) != vocabulary().hash())
        throw ModelFormatError("vocabulary mismatch");
    Dims dims;
    dims.emb = int(detail::read_u64(is));
    dims.h1 = int(detail::read_u64(is));
    dims.h2 = int(detail::read_u64(is));
    FsiModelParams p = FsiModelParams::init(dims, 0);
    p.for_each_param([&](auto& m) {
        Mat loaded = detail::read_mat(is);
        if (loaded.rows() != m.rows() || loaded.cols() != m.cols())
            throw ModelFormatError("tensor shape mismatch");
        m = loaded;
    });
    return p;
}

inline void save_file(const FsiModelParams& p, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write model file: " + path);
    save(p, os);
}

inline FsiModelParams load_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read model file: " + path);
    return load(is);
}

}  // namespace febi::fsi
