#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <tuple>

using namespace kgalign;

namespace oracle {

namespace {

using Words = std::vector<std::string>;

std::vector<Words> grams(const Words& w, int n) {
    std::vector<Words> out;
    for (int i = 0; i + n <= static_cast<int>(w.size()); ++i) out.emplace_back(w.begin() + i, w.begin() + i + n);
    return out;
}

// Each reference n-gram can be claimed once.
int matched(const std::vector<Words>& pred, const std::vector<Words>& ref) {
    std::vector<bool> used(ref.size(), false);
    int m = 0;
    for (const auto& g : pred)
        for (size_t j = 0; j < ref.size(); ++j)
            if (!used[j] && ref[j] == g) {
                used[j] = true;
                ++m;
                break;
            }
    return m;
}

double f(double p, double r) { return p + r == 0 ? 0.0 : 2 * p * r / (p + r); }

// Memoized recursion rather than the bottom-up table.
struct Lcs {
    const Words& a;
    const Words& b;
    std::map<std::pair<int, int>, int> memo;
    int len(int i, int j) {
        if (i == 0 || j == 0) return 0;
        auto key = std::make_pair(i, j);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        int v = a[i - 1] == b[j - 1] ? len(i - 1, j - 1) + 1 : std::max(len(i - 1, j), len(i, j - 1));
        memo[key] = v;
        return v;
    }
    // Positions in a; on ties drop from a unless dropping from b is strictly better.
    std::vector<int> positions() {
        std::vector<int> out;
        int i = static_cast<int>(a.size()), j = static_cast<int>(b.size());
        while (i > 0 && j > 0) {
            if (a[i - 1] == b[j - 1]) {
                out.insert(out.begin(), i - 1);
                --i;
                --j;
            } else if (len(i, j - 1) > len(i - 1, j)) {
                --j;
            } else {
                --i;
            }
        }
        return out;
    }
};

std::vector<Words> lines(const std::string& s) {
    std::vector<Words> out;
    size_t start = 0;
    while (start <= s.size()) {
        size_t end = s.find('\n', start);
        if (end == std::string::npos) end = s.size();
        Words w = answer_tokens(s.substr(start, end - start));
        if (!w.empty()) out.push_back(w);
        start = end + 1;
    }
    return out;
}

double bleu_k(const Words& p, const Words& r, int k) {
    if (p.empty()) return 0.0;
    double prod = 1.0;
    for (int n = 1; n <= k; ++n) {
        const auto pg = grams(p, n);
        const int m = matched(pg, grams(r, n));
        if (m == 0 && n == 1) return 0.0;
        prod *= m > 0 ? double(m) / pg.size() : 1.0 / (pg.size() + 1.0);
    }
    const double c = p.size(), rl = r.size();
    const double bp = c > rl ? 1.0 : std::exp(1.0 - rl / c);
    return bp * std::pow(prod, 1.0 / k);
}

}  // namespace

Scores naive_scores(const std::string& prediction, const std::string& reference) {
    const Words p = answer_tokens(prediction), r = answer_tokens(reference);
    Scores s;
    s.em = join(p, " ") == join(r, " ") ? 1.0 : 0.0;
    if (p.empty() && r.empty()) {
        s.f1 = 1.0;
    } else if (!p.empty() && !r.empty()) {
        const int m = matched(grams(p, 1), grams(r, 1));
        s.f1 = f(double(m) / p.size(), double(m) / r.size());
    }
    auto rouge = [&](int n) {
        const auto pg = grams(p, n), rg = grams(r, n);
        if (pg.empty() || rg.empty()) return 0.0;
        const int m = matched(pg, rg);
        return f(double(m) / pg.size(), double(m) / rg.size());
    };
    s.rouge1 = rouge(1);
    s.rouge2 = rouge(2);
    if (!p.empty() && !r.empty()) {
        Lcs l{r, p, {}};
        const int n = l.len(static_cast<int>(r.size()), static_cast<int>(p.size()));
        s.rougeL = f(double(n) / p.size(), double(n) / r.size());
    }

    const auto ps = lines(prediction), rs = lines(reference);
    std::map<std::string, int> pc, rc;
    int np = 0, nr = 0;
    for (const auto& w : ps)
        for (const auto& t : w) ++pc[t], ++np;
    for (const auto& w : rs)
        for (const auto& t : w) ++rc[t], ++nr;
    if (np > 0 && nr > 0) {
        int hits = 0;
        for (const auto& rw : rs) {
            std::set<int> uni;
            for (const auto& pw : ps) {
                Lcs l{rw, pw, {}};
                for (int i : l.positions()) uni.insert(i);
            }
            for (int i : uni) {
                const auto& t = rw[static_cast<size_t>(i)];
                if (pc[t] > 0 && rc[t] > 0) {
                    ++hits;
                    --pc[t];
                    --rc[t];
                }
            }
        }
        s.rougeLsum = f(double(hits) / np, double(hits) / nr);
    }

    s.bleu1 = bleu_k(p, r, 1);
    s.bleu2 = bleu_k(p, r, 2);
    s.bleu3 = bleu_k(p, r, 3);
    s.bleu4 = bleu_k(p, r, 4);
    s.rwb = 0.4 * s.bleu1 + 0.3 * s.bleu2 + 0.2 * s.bleu3 + 0.1 * s.bleu4;
    return s;
}

std::vector<double> brute_ranks(const KnowledgeGraph& kg_train, const std::vector<Triple>& eval,
                                const EmbeddingTable& table) {
    std::set<std::tuple<int, int, int>> truth;
    for (const auto& t : kg_train.triples()) truth.insert({t.head, t.relation, t.tail});
    for (const auto& t : eval) truth.insert({t.head, t.relation, t.tail});
    const int n = static_cast<int>(table.entity_vectors.rows());
    const int d = table.d_e();
    auto dist = [&](int h, int r, int t) {
        double s = 0;
        for (int k = 0; k < d; ++k) {
            const double x = table.entity_vectors(h, k) + table.relation_vectors(r, k) - table.entity_vectors(t, k);
            s += x * x;
        }
        return std::sqrt(s);
    };
    std::vector<double> ranks;
    for (const auto& t : eval) {
        for (int dir = 0; dir < 2; ++dir) {
            const int truth_id = dir == 0 ? t.tail : t.head;
            std::vector<std::pair<double, int>> cands;
            for (int c = 0; c < n; ++c) {
                const int h = dir == 0 ? t.head : c, tl = dir == 0 ? c : t.tail;
                if (c != truth_id && truth.count({h, t.relation, tl})) continue;
                cands.push_back({dist(h, t.relation, tl), c});
            }
            std::sort(cands.begin(), cands.end());
            // Mean 1-based position of the block of candidates tied with the truth.
            double s_true = 0;
            for (const auto& [s, c] : cands)
                if (c == truth_id) s_true = s;
            int first = -1, last = -1;
            for (int i = 0; i < static_cast<int>(cands.size()); ++i)
                if (cands[static_cast<size_t>(i)].first == s_true) {
                    if (first < 0) first = i;
                    last = i;
                }
            ranks.push_back(1.0 + (first + last) / 2.0);
        }
    }
    return ranks;
}

double rel_err(double a, double n) {
    const double scale = std::max(std::fabs(a), std::fabs(n));
    return scale < 1e-6 ? std::fabs(a - n) : std::fabs(a - n) / scale;
}

FdResult projection_fd(ProjectionVariant variant, uint64_t seed, int in_dim, int out_dim) {
    Rng rng(seed);
    ProjectionSpec spec;
    spec.variant = variant;
    spec.input_dim = in_dim;
    spec.output_dim = variant == ProjectionVariant::identity ? in_dim : out_dim;
    spec.depth = 2;
    spec.final_activation = variant == ProjectionVariant::complex ? Activation::gelu : Activation::none;
    ProjectionParams params = init_projection(spec, seed);
    for (auto& w : params.weights) w = w.unaryExpr([&](double) { return rng.normal(); });
    for (auto& b : params.biases) b = b.unaryExpr([&](double) { return 0.5 * rng.normal(); });
    Vec x(in_dim), up(spec.output_dim);
    for (int i = 0; i < in_dim; ++i) x[i] = rng.normal();
    for (int i = 0; i < spec.output_dim; ++i) up[i] = rng.normal();

    auto objective = [&](const ProjectionParams& p, const Vec& xx) { return up.dot(project(spec, p, xx)); };
    const ProjectionGrads g = project_gradients(spec, params, x, up);
    constexpr double h = 1e-4;  // larger step keeps roundoff below the tiny GELU-tail gradients
    FdResult res;
    auto check = [&](double& slot, double analytic, const std::function<double()>& eval) {
        const double keep = slot;
        slot = keep + h;
        const double lp = eval();
        slot = keep - h;
        const double lm = eval();
        slot = keep;
        res.max_rel_err = std::max(res.max_rel_err, rel_err(analytic, (lp - lm) / (2 * h)));
        ++res.checked;
    };
    for (size_t k = 0; k < params.weights.size(); ++k) {
        for (Eigen::Index i = 0; i < params.weights[k].size(); ++i)
            check(params.weights[k].data()[i], g.weights[k].data()[i], [&] { return objective(params, x); });
        for (Eigen::Index i = 0; i < params.biases[k].size(); ++i)
            check(params.biases[k][i], g.biases[k][i], [&] { return objective(params, x); });
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) check(x[i], g.input[i], [&] { return objective(params, x); });
    return res;
}

LmParams random_lm(const LmConfig& cfg, uint64_t seed, double scale) {
    Rng rng(seed);
    LmParams p = LmParams::zeros(cfg);
    for (auto& [name, m] : p.tensors()) {
        const bool gain = name.find("gain") != std::string::npos;
        for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = (gain ? 1.0 : 0.0) + scale * rng.normal();
    }
    return p;
}

FdResult lm_fd(const LmConfig& cfg, uint64_t seed) {
    Rng rng(seed);
    LmParams params = random_lm(cfg, seed);
    const int V = cfg.vocab_size, T = std::min(cfg.context_len, 7);
    std::vector<LmExample> batch(2);
    for (int b = 0; b < 2; ++b) {
        auto& ex = batch[static_cast<size_t>(b)];
        for (int t = 0; t < T; ++t) ex.ids.push_back(5 + static_cast<int>(rng.below(static_cast<uint64_t>(V - 5))));
        ex.loss_positions = {T - 3, T - 2, T - 1};
    }
    // second example carries an ENT slot with a soft prefix
    batch[1].ids[2] = Tokenizer::ENT;
    batch[1].prefix = Vec(cfg.model_dim);
    for (int i = 0; i < cfg.model_dim; ++i) batch[1].prefix[i] = rng.normal();

    const BackwardResult g = backward(cfg, params, batch);
    constexpr double h = 1e-5;
    FdResult res;
    auto probe = [&](double& slot, double analytic) {
        const double keep = slot;
        slot = keep + h;
        const double lp = batch_loss(cfg, params, batch);
        slot = keep - h;
        const double lm = batch_loss(cfg, params, batch);
        slot = keep;
        res.max_rel_err = std::max(res.max_rel_err, rel_err(analytic, (lp - lm) / (2 * h)));
        ++res.checked;
    };
    auto grads = g.grads;
    auto gt = grads.tensors();
    auto pt = params.tensors();
    for (size_t k = 0; k < pt.size(); ++k)
        for (Eigen::Index i = 0; i < pt[k].second->size(); ++i) probe(pt[k].second->data()[i], gt[k].second->data()[i]);
    for (Eigen::Index i = 0; i < batch[1].prefix.size(); ++i) probe(batch[1].prefix[i], g.prefix_grads[1][i]);
    return res;
}

std::string random_text(Rng& rng, int max_words, bool allow_newlines) {
    static const char* words[] = {"a", "b", "c", "d", "the", "cat", "spa", "X", "B.", "e"};
    const int n = static_cast<int>(rng.below(static_cast<uint64_t>(max_words + 1)));
    std::string s;
    for (int i = 0; i < n; ++i) {
        if (i) s += allow_newlines && rng.below(5) == 0 ? "\n" : " ";
        s += words[rng.below(10)];
    }
    return s;
}

}  // namespace oracle
