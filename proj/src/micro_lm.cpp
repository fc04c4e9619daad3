#include "kgalign/micro_lm.hpp"

#include <cmath>
#include <limits>

#include "kgalign/projection.hpp"
#include "kgalign/tokenizer.hpp"

namespace kgalign {

void LmConfig::validate() const {
    if (vocab_size < 1) throw ConfigError("lm vocab_size must be >= 1");
    if (model_dim < 1 || layers < 0 || heads < 1 || context_len < 1 || ffn_mult < 1)
        throw ConfigError("lm dimensions must be positive");
    if (model_dim % heads != 0) throw ConfigError("lm model_dim must be divisible by heads");
}

std::vector<std::pair<std::string, Mat*>> LmParams::tensors() {
    std::vector<std::pair<std::string, Mat*>> out{{"token_embedding", &token_embedding},
                                                  {"position_embedding", &position_embedding}};
    for (size_t i = 0; i < blocks.size(); ++i) {
        LmBlock& b = blocks[i];
        const std::string p = "block" + std::to_string(i) + ".";
        out.insert(out.end(), {{p + "ln1_gain", &b.ln1_gain},
                               {p + "ln1_bias", &b.ln1_bias},
                               {p + "attn_w", &b.attn_w},
                               {p + "attn_b", &b.attn_b},
                               {p + "attn_proj_w", &b.attn_proj_w},
                               {p + "attn_proj_b", &b.attn_proj_b},
                               {p + "ln2_gain", &b.ln2_gain},
                               {p + "ln2_bias", &b.ln2_bias},
                               {p + "fc_w", &b.fc_w},
                               {p + "fc_b", &b.fc_b},
                               {p + "fc_proj_w", &b.fc_proj_w},
                               {p + "fc_proj_b", &b.fc_proj_b}});
    }
    out.insert(out.end(), {{"lnf_gain", &lnf_gain}, {"lnf_bias", &lnf_bias}, {"head", &head}});
    return out;
}

std::vector<std::pair<std::string, const Mat*>> LmParams::tensors() const {
    std::vector<std::pair<std::string, const Mat*>> out;
    for (auto& [name, m] : const_cast<LmParams*>(this)->tensors()) out.emplace_back(name, m);
    return out;
}

LmParams LmParams::zeros(const LmConfig& cfg) {
    cfg.validate();
    const int V = cfg.vocab_size, D = cfg.model_dim, F = cfg.model_dim * cfg.ffn_mult;
    LmParams p;
    p.token_embedding = Mat::Zero(V, D);
    p.position_embedding = Mat::Zero(cfg.context_len, D);
    for (int l = 0; l < cfg.layers; ++l) {
        LmBlock b;
        b.ln1_gain = Mat::Zero(1, D);
        b.ln1_bias = Mat::Zero(1, D);
        b.attn_w = Mat::Zero(D, 3 * D);
        b.attn_b = Mat::Zero(1, 3 * D);
        b.attn_proj_w = Mat::Zero(D, D);
        b.attn_proj_b = Mat::Zero(1, D);
        b.ln2_gain = Mat::Zero(1, D);
        b.ln2_bias = Mat::Zero(1, D);
        b.fc_w = Mat::Zero(D, F);
        b.fc_b = Mat::Zero(1, F);
        b.fc_proj_w = Mat::Zero(F, D);
        b.fc_proj_b = Mat::Zero(1, D);
        p.blocks.push_back(std::move(b));
    }
    p.lnf_gain = Mat::Zero(1, D);
    p.lnf_bias = Mat::Zero(1, D);
    p.head = Mat::Zero(D, V);
    return p;
}

void LmParams::set_zero() {
    for (auto& [name, m] : tensors()) m->setZero();
}

LmParams init_lm(const LmConfig& cfg) {
    LmParams p = LmParams::zeros(cfg);
    Rng rng(cfg.seed);
    auto normal = [&](Mat& m, double sd) {
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = sd * rng.normal();
    };
    auto uniform = [&](Mat& m, double fan_in) {
        const double a = 1.0 / std::sqrt(fan_in);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-a, a);
    };
    const double D = cfg.model_dim, F = cfg.model_dim * cfg.ffn_mult;
    normal(p.token_embedding, 0.1);
    normal(p.position_embedding, 0.1);
    for (auto& b : p.blocks) {
        b.ln1_gain.setOnes();
        b.ln2_gain.setOnes();
        uniform(b.attn_w, D);
        uniform(b.attn_b, D);
        uniform(b.attn_proj_w, D);
        uniform(b.attn_proj_b, D);
        uniform(b.fc_w, D);
        uniform(b.fc_b, D);
        uniform(b.fc_proj_w, F);
        uniform(b.fc_proj_b, F);
    }
    p.lnf_gain.setOnes();
    uniform(p.head, D);
    return p;
}

void check_params(const LmConfig& cfg, const LmParams& params) {
    LmParams shape = LmParams::zeros(cfg);
    auto want = shape.tensors();
    auto have = params.tensors();
    if (want.size() != have.size()) throw ContractError("lm params do not match the config layer count");
    for (size_t i = 0; i < want.size(); ++i)
        if (want[i].second->rows() != have[i].second->rows() || want[i].second->cols() != have[i].second->cols())
            throw ContractError("lm tensor " + have[i].first + " has the wrong shape");
}

int find_slot(const std::vector<int>& ids) {
    int slot = -1;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] != Tokenizer::ENT) continue;
        if (slot >= 0) throw ContractError("sequence has more than one ENT slot");
        slot = static_cast<int>(i);
    }
    return slot;
}

namespace {

constexpr double kLnEps = 1e-5;

struct LnCache {
    Mat xhat;
    Vec rstd;
};

void layer_norm(const Mat& x, const Mat& gain, const Mat& bias, Mat& y, LnCache& c) {
    const Eigen::Index T = x.rows(), D = x.cols();
    c.xhat.resize(T, D);
    c.rstd.resize(T);
    for (Eigen::Index t = 0; t < T; ++t) {
        const double mean = x.row(t).mean();
        const double var = (x.row(t).array() - mean).square().mean();
        c.rstd[t] = 1.0 / std::sqrt(var + kLnEps);
        c.xhat.row(t) = (x.row(t).array() - mean) * c.rstd[t];
    }
    y = (c.xhat.array().rowwise() * gain.row(0).array()).rowwise() + bias.row(0).array();
}

void layer_norm_backward(const Mat& dy, const LnCache& c, const Mat& gain, Mat& dx, Mat* dgain, Mat* dbias) {
    const Eigen::Index T = dy.rows();
    const Mat dxhat = dy.array().rowwise() * gain.row(0).array();
    dx.resize(dy.rows(), dy.cols());
    for (Eigen::Index t = 0; t < T; ++t) {
        const double m1 = dxhat.row(t).mean();
        const double m2 = (dxhat.row(t).array() * c.xhat.row(t).array()).mean();
        dx.row(t) = c.rstd[t] * (dxhat.row(t).array() - m1 - c.xhat.row(t).array() * m2);
    }
    if (dgain) *dgain += (dy.array() * c.xhat.array()).colwise().sum().matrix();
    if (dbias) *dbias += dy.colwise().sum();
}

struct BlockCache {
    Mat x_in, ln1_out, qkv, att, x_mid, ln2_out, fc_pre, fc_act;
    LnCache ln1, ln2;
    std::vector<Mat> probs;
};

struct Trace {
    std::vector<BlockCache> blocks;
    LnCache lnf;
    Mat hf;  // final normed hidden states, T x D
    int slot = -1;
};

void check_input(const LmConfig& cfg, const std::vector<int>& ids, const Vec* prefix) {
    if (static_cast<int>(ids.size()) > cfg.context_len)
        throw ContractError("sequence of " + std::to_string(ids.size()) + " tokens exceeds context " +
                            std::to_string(cfg.context_len));
    for (int id : ids)
        if (id < 0 || id >= cfg.vocab_size) throw ContractError("token id " + std::to_string(id) + " outside vocabulary");
    if (prefix && prefix->size() != cfg.model_dim)
        throw ContractError("prefix has length " + std::to_string(prefix->size()) + ", model_dim is " +
                            std::to_string(cfg.model_dim));
}

void run_forward(const LmConfig& cfg, const LmParams& P, const std::vector<int>& ids, const Vec* prefix,
                 const ForwardOptions& opts, Trace& tr) {
    check_input(cfg, ids, prefix);
    const int T = static_cast<int>(ids.size());
    const int D = cfg.model_dim, H = cfg.heads, dh = D / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    tr.slot = -1;
    if (prefix) {
        tr.slot = find_slot(ids);
        if (tr.slot < 0) throw ContractError("prefix given but the sequence has no ENT slot");
    }
    Mat x(T, D);
    for (int t = 0; t < T; ++t) {
        if (t == tr.slot)
            x.row(t) = prefix->transpose();
        else
            x.row(t) = P.token_embedding.row(ids[static_cast<size_t>(t)]);
    }
    x += P.position_embedding.topRows(T);

    tr.blocks.resize(P.blocks.size());
    for (size_t l = 0; l < P.blocks.size(); ++l) {
        const LmBlock& b = P.blocks[l];
        BlockCache& c = tr.blocks[l];
        c.x_in = x;
        layer_norm(x, b.ln1_gain, b.ln1_bias, c.ln1_out, c.ln1);
        c.qkv.noalias() = c.ln1_out * b.attn_w;
        c.qkv.rowwise() += b.attn_b.row(0);
        c.att.resize(T, D);
        c.probs.resize(static_cast<size_t>(H));
        for (int h = 0; h < H; ++h) {
            const auto q = c.qkv.middleCols(h * dh, dh);
            const auto k = c.qkv.middleCols(D + h * dh, dh);
            const auto v = c.qkv.middleCols(2 * D + h * dh, dh);
            Mat& p = c.probs[static_cast<size_t>(h)];
            p.noalias() = (q * k.transpose()) * scale;
            for (int i = 0; i < T; ++i) {
                double mx = -std::numeric_limits<double>::infinity();
                for (int j = 0; j <= i; ++j)
                    if (j != opts.blocked_key || j == i) mx = std::max(mx, p(i, j));
                double sum = 0.0;
                for (int j = 0; j < T; ++j) {
                    if (j > i || (j == opts.blocked_key && j != i)) {
                        p(i, j) = 0.0;
                    } else {
                        p(i, j) = std::exp(p(i, j) - mx);
                        sum += p(i, j);
                    }
                }
                p.row(i) /= sum;
            }
            c.att.middleCols(h * dh, dh).noalias() = p * v;
        }
        x.noalias() += c.att * b.attn_proj_w;
        x.rowwise() += b.attn_proj_b.row(0);
        c.x_mid = x;
        layer_norm(x, b.ln2_gain, b.ln2_bias, c.ln2_out, c.ln2);
        c.fc_pre.noalias() = c.ln2_out * b.fc_w;
        c.fc_pre.rowwise() += b.fc_b.row(0);
        c.fc_act = c.fc_pre.unaryExpr([](double v) { return gelu(v); });
        x.noalias() += c.fc_act * b.fc_proj_w;
        x.rowwise() += b.fc_proj_b.row(0);
    }
    layer_norm(x, P.lnf_gain, P.lnf_bias, tr.hf, tr.lnf);
}

// Back-propagates dhf (T x D) through the body. Weight gradients only when
// grads is non-null.
void run_backward(const LmConfig& cfg, const LmParams& P, const std::vector<int>& ids, const Trace& tr, const Mat& dhf,
                  LmParams* grads, Vec* dprefix) {
    const int T = static_cast<int>(ids.size());
    const int D = cfg.model_dim, H = cfg.heads, dh = D / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Mat dx;
    layer_norm_backward(dhf, tr.lnf, P.lnf_gain, dx, grads ? &grads->lnf_gain : nullptr,
                        grads ? &grads->lnf_bias : nullptr);
    Mat tmp, dqkv(T, 3 * D);
    for (size_t l = P.blocks.size(); l-- > 0;) {
        const LmBlock& b = P.blocks[l];
        const BlockCache& c = tr.blocks[l];
        LmBlock* g = grads ? &grads->blocks[l] : nullptr;

        // x_out = x_mid + gelu(ln2(x_mid) W1 + b1) W2 + b2
        Mat dfc = dx * b.fc_proj_w.transpose();
        if (g) {
            g->fc_proj_w.noalias() += c.fc_act.transpose() * dx;
            g->fc_proj_b += dx.colwise().sum();
        }
        dfc.array() *= c.fc_pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
        const Mat dln2 = dfc * b.fc_w.transpose();
        if (g) {
            g->fc_w.noalias() += c.ln2_out.transpose() * dfc;
            g->fc_b += dfc.colwise().sum();
        }
        layer_norm_backward(dln2, c.ln2, b.ln2_gain, tmp, g ? &g->ln2_gain : nullptr, g ? &g->ln2_bias : nullptr);
        dx += tmp;

        // x_mid = x_in + attn(ln1(x_in)) Wo + bo
        const Mat datt = dx * b.attn_proj_w.transpose();
        if (g) {
            g->attn_proj_w.noalias() += c.att.transpose() * dx;
            g->attn_proj_b += dx.colwise().sum();
        }
        for (int h = 0; h < H; ++h) {
            const auto q = c.qkv.middleCols(h * dh, dh);
            const auto k = c.qkv.middleCols(D + h * dh, dh);
            const auto v = c.qkv.middleCols(2 * D + h * dh, dh);
            const Mat& p = c.probs[static_cast<size_t>(h)];
            const auto dout = datt.middleCols(h * dh, dh);
            Mat dp = dout * v.transpose();
            dqkv.middleCols(2 * D + h * dh, dh).noalias() = p.transpose() * dout;
            for (int i = 0; i < T; ++i) {
                const double dot = p.row(i).dot(dp.row(i));
                dp.row(i) = p.row(i).array() * (dp.row(i).array() - dot);
            }
            dqkv.middleCols(h * dh, dh).noalias() = (dp * k) * scale;
            dqkv.middleCols(D + h * dh, dh).noalias() = (dp.transpose() * q) * scale;
        }
        const Mat dln1 = dqkv * b.attn_w.transpose();
        if (g) {
            g->attn_w.noalias() += c.ln1_out.transpose() * dqkv;
            g->attn_b += dqkv.colwise().sum();
        }
        layer_norm_backward(dln1, c.ln1, b.ln1_gain, tmp, g ? &g->ln1_gain : nullptr, g ? &g->ln1_bias : nullptr);
        dx += tmp;
    }
    if (grads) {
        grads->position_embedding.topRows(T) += dx;
        for (int t = 0; t < T; ++t)
            if (t != tr.slot) grads->token_embedding.row(ids[static_cast<size_t>(t)]) += dx.row(t);
    }
    if (dprefix && tr.slot >= 0) *dprefix = dx.row(tr.slot).transpose();
}

double log_softmax_at(const Eigen::Ref<const Eigen::RowVectorXd>& row, int target, Eigen::RowVectorXd* probs) {
    const double mx = row.maxCoeff();
    const Eigen::RowVectorXd e = (row.array() - mx).unaryExpr([](double v) { return std::exp(v); });  // scalar exp underflows to exact 0
    const double sum = e.sum();
    if (probs) *probs = e / sum;
    return row(target) - mx - std::log(sum);
}

void check_example(const LmConfig& cfg, const LmExample& ex) {
    if (ex.loss_positions.empty()) throw ContractError("example has an empty loss mask");
    for (int pos : ex.loss_positions)
        if (pos < 1 || pos >= static_cast<int>(ex.ids.size())) throw ContractError("loss position out of range");
    if (ex.prefix.size() != 0 && ex.prefix.size() != cfg.model_dim) throw ContractError("prefix has the wrong length");
}

// Forward + loss (+ backward when grads or dprefix requested) for one example.
double example_pass(const LmConfig& cfg, const LmParams& P, const LmExample& ex, const ForwardOptions& opts,
                    const GradRequest& req, double scale, LmParams* grads, Vec* dprefix) {
    check_example(cfg, ex);
    const Vec* prefix = ex.prefix.size() ? &ex.prefix : nullptr;
    Trace tr;
    run_forward(cfg, P, ex.ids, prefix, opts, tr);
    const int n = static_cast<int>(ex.loss_positions.size());
    const int D = cfg.model_dim;
    Mat rows(n, D);
    for (int i = 0; i < n; ++i) rows.row(i) = tr.hf.row(ex.loss_positions[static_cast<size_t>(i)] - 1);
    Mat logits = rows * P.head;
    const bool want_grad = grads || dprefix;
    double total = 0.0;
    Eigen::RowVectorXd probs;
    for (int i = 0; i < n; ++i) {
        const int target = ex.ids[static_cast<size_t>(ex.loss_positions[static_cast<size_t>(i)])];
        total -= log_softmax_at(logits.row(i), target, want_grad ? &probs : nullptr);
        if (want_grad) {
            probs(target) -= 1.0;
            logits.row(i) = probs * (scale / n);  // reuse storage as dlogits
        }
    }
    const double l = total / n;
    if (!want_grad) return l;
    if (grads && req.head) grads->head.noalias() += rows.transpose() * logits;
    if (!(req.body || req.prefix)) return l;
    const Mat drows = logits * P.head.transpose();
    Mat dhf = Mat::Zero(tr.hf.rows(), D);
    for (int i = 0; i < n; ++i) dhf.row(ex.loss_positions[static_cast<size_t>(i)] - 1) += drows.row(i);
    run_backward(cfg, P, ex.ids, tr, dhf, (grads && req.body) ? grads : nullptr, req.prefix ? dprefix : nullptr);
    return l;
}

}  // namespace

Mat forward(const LmConfig& cfg, const LmParams& params, const std::vector<int>& ids, const Vec* prefix,
            const ForwardOptions& opts) {
    Trace tr;
    run_forward(cfg, params, ids, prefix, opts, tr);
    return tr.hf * params.head;
}

double loss(const Mat& logits, const std::vector<int>& targets, const std::vector<int>& mask) {
    if (static_cast<Eigen::Index>(targets.size()) != logits.rows() || targets.size() != mask.size())
        throw ContractError("loss: logits, targets and mask disagree in length");
    double total = 0.0;
    int n = 0;
    for (size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        if (targets[i] < 0 || targets[i] >= logits.cols()) throw ContractError("loss: target outside vocabulary");
        total -= log_softmax_at(logits.row(static_cast<Eigen::Index>(i)), targets[i], nullptr);
        ++n;
    }
    if (n == 0) throw ContractError("loss: empty mask");
    return total / n;
}

BackwardResult backward(const LmConfig& cfg, const LmParams& params, const std::vector<LmExample>& batch,
                        const GradRequest& req, const ForwardOptions& opts) {
    if (batch.empty()) throw ContractError("backward: empty batch");
    BackwardResult r;
    r.grads = LmParams::zeros(cfg);
    r.prefix_grads.resize(batch.size());
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
        Vec* dp = batch[i].prefix.size() ? &r.prefix_grads[i] : nullptr;
        const double l = example_pass(cfg, params, batch[i], opts, req, scale, &r.grads, dp);
        r.example_losses.push_back(l);
        r.loss += l * scale;
    }
    return r;
}

double batch_loss(const LmConfig& cfg, const LmParams& params, const std::vector<LmExample>& batch,
                  const ForwardOptions& opts) {
    if (batch.empty()) throw ContractError("batch_loss: empty batch");
    double total = 0.0;
    for (const auto& ex : batch) total += example_pass(cfg, params, ex, opts, GradRequest{}, 1.0, nullptr, nullptr);
    return total / static_cast<double>(batch.size());
}

std::vector<int> generate(const LmConfig& cfg, const LmParams& params, const std::vector<int>& prompt_ids,
                          const Vec* prefix, int max_new_tokens) {
    if (prompt_ids.empty()) throw ContractError("generate: empty prompt");
    std::vector<int> ids = prompt_ids;
    std::vector<int> out;
    Trace tr;
    for (int step = 0; step < max_new_tokens; ++step) {
        if (static_cast<int>(ids.size()) >= cfg.context_len) break;
        run_forward(cfg, params, ids, prefix, ForwardOptions{}, tr);
        const Eigen::RowVectorXd logits = tr.hf.row(tr.hf.rows() - 1) * params.head;
        int best = 0;
        for (int v = 1; v < logits.size(); ++v)
            if (logits(v) > logits(best)) best = v;  // strict: lowest id wins ties
        out.push_back(best);
        if (best == Tokenizer::STOP) break;
        ids.push_back(best);
    }
    return out;
}

uint64_t hash_tensors(const std::vector<std::pair<std::string, const Mat*>>& tensors) {
    uint64_t h = fnv1a("tensors");
    for (const auto& [name, m] : tensors) {
        h = fnv1a(name, h);
        const int64_t dims[2] = {m->rows(), m->cols()};
        h = fnv1a(std::string_view(reinterpret_cast<const char*>(dims), sizeof dims), h);
        h = fnv1a(m->data(), static_cast<size_t>(m->size()), h);
    }
    return h;
}

}  // namespace kgalign
