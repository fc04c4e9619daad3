#include "kgalign/kge.hpp"

#include <cmath>
#include <unordered_set>

namespace kgalign {

void TranseConfig::validate() const {
    if (dim < 1) throw ConfigError("kge dim must be >= 1");
    if (!(margin > 0)) throw ConfigError("kge margin must be > 0");
    if (!(learning_rate > 0)) throw ConfigError("kge learning_rate must be > 0");
    if (epochs < 1) throw ConfigError("kge epochs must be >= 1");
    if (negatives_per_positive < 1) throw ConfigError("kge negatives_per_positive must be >= 1");
}

double score(EntityId h, RelationId r, EntityId t, const EmbeddingTable& table) {
    if (table.d_e() != table.d_r()) throw ContractError("translation scoring needs d_e == d_r");
    if (h < 0 || t < 0 || h >= table.entity_vectors.rows() || t >= table.entity_vectors.rows())
        throw LookupError("entity id outside table");
    if (r < 0 || r >= table.relation_vectors.rows()) throw LookupError("relation id outside table");
    return (table.entity_vectors.row(h) + table.relation_vectors.row(r) - table.entity_vectors.row(t)).norm();
}

EmbeddingTable empty_table(const KnowledgeGraph& kg, int dim) {
    EmbeddingTable t;
    t.entity_labels = kg.entities.labels();
    t.relation_labels = kg.relations.labels();
    t.entity_vectors = Mat::Zero(kg.entities.size(), dim);
    t.relation_vectors = Mat::Zero(kg.relations.size(), dim);
    return t;
}

MarginTerm margin_term(const Vec& ph, const Vec& pt, const Vec& nh, const Vec& nt, const Vec& rel, double margin) {
    const Vec pd = ph + rel - pt;
    const Vec nd = nh + rel - nt;
    const double ps = pd.norm(), ns = nd.norm();
    MarginTerm m;
    m.loss = std::max(0.0, margin + ps - ns);
    const Eigen::Index d = ph.size();
    m.d_pos_head = m.d_pos_tail = m.d_neg_head = m.d_neg_tail = m.d_relation = Vec::Zero(d);
    if (m.loss <= 0) return m;
    const Vec gp = ps > 0 ? Vec(pd / ps) : Vec::Zero(d);
    const Vec gn = ns > 0 ? Vec(nd / ns) : Vec::Zero(d);
    m.d_pos_head = gp;
    m.d_pos_tail = -gp;
    m.d_neg_head = -gn;
    m.d_neg_tail = gn;
    m.d_relation = gp - gn;
    return m;
}

EmbeddingTable train_transe(const KnowledgeGraph& kg, const TranseConfig& config,
                            const std::function<void(int, double)>& on_epoch) {
    config.validate();
    if (kg.triples().empty()) throw ContractError("train_transe needs at least one triple");
    const int n = kg.entities.size();
    if (n < 2) throw ConfigError("negative sampling needs at least 2 entities");

    Rng rng(config.seed);
    const int d = config.dim;
    const double bound = 6.0 / std::sqrt(static_cast<double>(d));
    EmbeddingTable table = empty_table(kg, d);
    for (Eigen::Index i = 0; i < table.entity_vectors.size(); ++i) table.entity_vectors.data()[i] = rng.uniform(-bound, bound);
    for (Eigen::Index i = 0; i < table.relation_vectors.size(); ++i)
        table.relation_vectors.data()[i] = rng.uniform(-bound, bound);
    // relations start on the unit sphere, entities are projected onto the ball each epoch
    for (Eigen::Index i = 0; i < table.relation_vectors.rows(); ++i)
        table.relation_vectors.row(i) /= table.relation_vectors.row(i).norm();
    if (config.norm_entities) {
        for (Eigen::Index i = 0; i < table.entity_vectors.rows(); ++i) {
            const double nr = table.entity_vectors.row(i).norm();
            if (nr > 1.0) table.entity_vectors.row(i) /= nr;
        }
    }

    Mat& E = table.entity_vectors;
    Mat& R = table.relation_vectors;
    std::vector<size_t> order(kg.triples().size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    const double lr = config.learning_rate;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double total = 0.0;
        long terms = 0;
        for (size_t idx : order) {
            const Triple pos = kg.triples()[idx];
            for (int k = 0; k < config.negatives_per_positive; ++k) {
                Triple neg = pos;
                const bool corrupt_head = rng.coin();
                bool found = false;
                // bounded rejection: a node fully connected to everything has no negative
                for (int attempt = 0; attempt < 64; ++attempt) {
                    const EntityId e = static_cast<EntityId>(rng.below(static_cast<uint64_t>(n)));
                    neg = pos;
                    (corrupt_head ? neg.head : neg.tail) = e;
                    if (!kg.contains(neg)) {
                        found = true;
                        break;
                    }
                }
                if (!found) continue;
                const MarginTerm m = margin_term(E.row(pos.head).transpose(), E.row(pos.tail).transpose(),
                                                 E.row(neg.head).transpose(), E.row(neg.tail).transpose(),
                                                 R.row(pos.relation).transpose(), config.margin);
                total += m.loss;
                ++terms;
                if (m.loss <= 0) continue;
                E.row(pos.head) -= lr * m.d_pos_head.transpose();
                E.row(pos.tail) -= lr * m.d_pos_tail.transpose();
                E.row(neg.head) -= lr * m.d_neg_head.transpose();
                E.row(neg.tail) -= lr * m.d_neg_tail.transpose();
                R.row(pos.relation) -= lr * m.d_relation.transpose();
            }
        }
        if (config.norm_entities) {
            for (Eigen::Index i = 0; i < E.rows(); ++i) {
                const double nr = E.row(i).norm();
                if (nr > 1.0) E.row(i) /= nr;
            }
        }
        if (on_epoch) on_epoch(epoch, terms ? total / static_cast<double>(terms) : 0.0);
    }
    table.validate();
    return table;
}

RankingReport evaluate_ranking(const KnowledgeGraph& kg_train, const std::vector<Triple>& kg_eval,
                               const EmbeddingTable& table) {
    if (kg_eval.empty()) throw ContractError("evaluate_ranking needs a non-empty evaluation set");
    const int n = static_cast<int>(table.entity_vectors.rows());
    if (kg_train.entities.size() > n) throw LookupError("graph has entities missing from the table");
    for (const Triple& t : kg_eval) {
        if (t.head < 0 || t.tail < 0 || t.head >= n || t.tail >= n || t.relation < 0 ||
            t.relation >= table.relation_vectors.rows())
            throw LookupError("evaluation triple does not resolve in the table");
    }
    auto pack = [](const Triple& t) {
        return (static_cast<uint64_t>(t.head) << 38) | (static_cast<uint64_t>(t.relation) << 26) |
               static_cast<uint64_t>(t.tail);
    };
    std::unordered_set<uint64_t> truth_set;
    for (const Triple& t : kg_train.triples()) truth_set.insert(pack(t));
    for (const Triple& t : kg_eval) truth_set.insert(pack(t));
    auto known = [&](const Triple& t) { return truth_set.count(pack(t)) != 0; };
    std::vector<double> scores(static_cast<size_t>(n));
    RankingReport rep;
    double rr_sum = 0.0, h1 = 0.0, h10 = 0.0;
    for (const Triple& t : kg_eval) {
        for (int dir = 0; dir < 2; ++dir) {
            for (int c = 0; c < n; ++c) {
                Triple cand = t;
                (dir == 0 ? cand.tail : cand.head) = c;
                scores[static_cast<size_t>(c)] = score(cand.head, cand.relation, cand.tail, table);
            }
            const int truth = dir == 0 ? t.tail : t.head;
            const double s_true = scores[static_cast<size_t>(truth)];
            int lower = 0, ties = 0;
            for (int c = 0; c < n; ++c) {
                if (c == truth) continue;
                Triple cand = t;
                (dir == 0 ? cand.tail : cand.head) = c;
                if (known(cand)) continue;
                const double s = scores[static_cast<size_t>(c)];
                if (s < s_true) ++lower;
                else if (s == s_true) ++ties;
            }
            const double rank = 1.0 + lower + 0.5 * ties;
            rep.ranks.push_back(rank);
            rr_sum += 1.0 / rank;
            if (rank <= 1.0) h1 += 1;
            if (rank <= 10.0) h10 += 1;
        }
    }
    const double m = static_cast<double>(rep.ranks.size());
    rep.mrr = rr_sum / m;
    rep.hits_at_1 = h1 / m;
    rep.hits_at_10 = h10 / m;
    rep.evaluated_triples = static_cast<int>(kg_eval.size());
    return rep;
}

}  // namespace kgalign
