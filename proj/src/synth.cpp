#include <algorithm>
#include <map>
#include <set>

#include "kgalign/qa_gen.hpp"

namespace kgalign {

namespace {

const char* const kSyllables[] = {"BOR", "SAN", "TI", "LO", "MA", "RI", "NE", "VI", "CO", "DA",
                                  "GAL", "PER", "FON", "ZA", "MO", "RE", "LU", "CA", "BEL", "TOR"};
const char* const kForms[] = {"SPA", "S.R.L.", "GROUP", "E FIGLI"};
const char* const kFirstNames[] = {"MILO", "ANNA", "LUCA", "SARA", "PIETRO", "GIULIA", "MARCO", "ELENA"};

template <typename T, size_t N>
const T& pick(Rng& rng, const T (&arr)[N]) {
    return arr[rng.below(N)];
}

struct Namer {
    Rng& rng;
    std::set<std::string> used;

    std::string surname() {
        while (true) {
            std::string s;
            const int syl = rng.coin() ? 2 : 3;
            for (int i = 0; i < syl; ++i) s += pick(rng, kSyllables);
            if (used.insert(s).second) return s;
        }
    }
};

// Preferential attachment: weight 1 + number of holdings already owned.
std::vector<int> pick_owners(Rng& rng, const std::vector<int>& candidates, const std::map<int, int>& out_degree, int k) {
    std::vector<int> pool = candidates, chosen;
    for (int i = 0; i < k && !pool.empty(); ++i) {
        double total = 0;
        for (int c : pool) total += 1.0 + (out_degree.count(c) ? out_degree.at(c) : 0);
        double u = rng.uniform() * total;
        size_t j = 0;
        for (; j + 1 < pool.size(); ++j) {
            u -= 1.0 + (out_degree.count(pool[j]) ? out_degree.at(pool[j]) : 0);
            if (u < 0) break;
        }
        chosen.push_back(pool[j]);
        pool.erase(pool.begin() + static_cast<long>(j));
    }
    return chosen;
}

}  // namespace

std::vector<std::pair<int, int>> derive_control(const std::vector<std::string>& labels,
                                                const std::vector<Shareholding>& shares) {
    std::map<std::string, int> id;
    for (size_t i = 0; i < labels.size(); ++i) id[labels[i]] = static_cast<int>(i);
    const int n = static_cast<int>(labels.size());
    std::vector<std::vector<std::pair<int, int>>> owners(static_cast<size_t>(n));  // owned -> (owner, pct)
    for (const auto& s : shares) owners[static_cast<size_t>(id.at(s.owned))].push_back({id.at(s.owner), s.percent});
    std::vector<std::pair<int, int>> out;
    for (int x = 0; x < n; ++x) {
        std::vector<bool> ctrl(static_cast<size_t>(n), false);
        bool changed = true;
        while (changed) {
            changed = false;
            for (int y = 0; y < n; ++y) {
                if (y == x || ctrl[static_cast<size_t>(y)]) continue;
                int total = 0;
                for (auto [o, pct] : owners[static_cast<size_t>(y)])
                    if (o == x || ctrl[static_cast<size_t>(o)]) total += pct;
                if (total > 50) {
                    ctrl[static_cast<size_t>(y)] = true;
                    changed = true;
                }
            }
        }
        for (int y = 0; y < n; ++y)
            if (ctrl[static_cast<size_t>(y)]) out.push_back({x, y});
    }
    return out;
}

SynthGraph synth_co_graph(const SynthConfig& config) {
    if (config.n_components < 1) throw ConfigError("n_components must be >= 1");
    if (config.collision_pairs < 0) throw ConfigError("collision_pairs must be >= 0");
    Rng rng(config.seed);
    Namer namer{rng, {}};

    std::vector<std::string> labels;
    std::vector<std::pair<int, int>> role_edges;
    struct Holding {
        int owner, owned, pct;
    };
    std::vector<Holding> holdings;
    std::vector<std::vector<int>> component_companies;

    for (int c = 0; c < config.n_components; ++c) {
        const int n_co = static_cast<int>(rng.range(4, 7));
        const int n_pe = static_cast<int>(rng.range(1, 2));
        std::vector<int> cos, pes;
        for (int i = 0; i < n_co; ++i) {
            cos.push_back(static_cast<int>(labels.size()));
            labels.push_back(namer.surname() + " " + pick(rng, kForms));
        }
        for (int i = 0; i < n_pe; ++i) {
            pes.push_back(static_cast<int>(labels.size()));
            labels.push_back(std::string(pick(rng, kFirstNames)) + " " + namer.surname());
        }
        std::map<int, int> out_degree;
        // persons hold the root company
        int rem = 100;
        for (int p : pes) {
            const int pct = static_cast<int>(rng.range(10, std::min(60, rem)));
            holdings.push_back({p, cos[0], pct});
            ++out_degree[p];
            rem -= pct;
        }
        // company i is owned by earlier companies and the persons (a DAG)
        const int owner_counts[] = {1, 1, 2, 2, 3};
        for (int i = 1; i < n_co; ++i) {
            std::vector<int> cands(cos.begin(), cos.begin() + i);
            cands.insert(cands.end(), pes.begin(), pes.end());
            const int k = std::min(static_cast<int>(cands.size()), pick(rng, owner_counts));
            const auto owners = pick_owners(rng, cands, out_degree, k);
            int left = 100;
            for (size_t j = 0; j < owners.size(); ++j) {
                const int others = static_cast<int>(owners.size() - j - 1);
                int pct = others == 0 ? static_cast<int>(rng.range(std::max(1, left / 3), left))
                                      : static_cast<int>(rng.range(5, std::max(6, left - 10 * others)));
                pct = std::min(pct, left);
                left -= pct;
                if (pct <= 0) continue;
                holdings.push_back({owners[j], cos[static_cast<size_t>(i)], pct});
                ++out_degree[owners[j]];
            }
        }
        for (int p : pes) {
            std::vector<int> pool = cos;
            rng.shuffle(pool);
            for (size_t j = 0; j < std::min<size_t>(2, pool.size()); ++j) role_edges.push_back({p, pool[j]});
        }
        component_companies.push_back(cos);
    }

    // Collision pairs: two non-root companies from different components; the
    // second takes a spacing variant of the first's label.
    SynthGraph g;
    std::vector<std::pair<int, int>> nonroot;
    for (size_t c = 0; c < component_companies.size(); ++c)
        for (size_t i = 1; i < component_companies[c].size(); ++i) nonroot.push_back({static_cast<int>(c), component_companies[c][i]});
    rng.shuffle(nonroot);
    std::set<int> used;
    for (size_t i = 0; i < nonroot.size() && static_cast<int>(g.collision_pairs.size()) < config.collision_pairs; ++i) {
        if (used.count(nonroot[i].second)) continue;
        for (size_t j = i + 1; j < nonroot.size(); ++j) {
            if (nonroot[i].first == nonroot[j].first || used.count(nonroot[j].second)) continue;
            const int a = nonroot[i].second, b = nonroot[j].second;
            std::string variant = labels[static_cast<size_t>(a)];
            variant.insert(variant.find(' '), " ");
            labels[static_cast<size_t>(b)] = variant;
            used.insert(a);
            used.insert(b);
            g.collision_pairs.push_back({labels[static_cast<size_t>(a)], variant});
            break;
        }
    }
    if (static_cast<int>(g.collision_pairs.size()) < config.collision_pairs)
        throw ConfigError("not enough components for " + std::to_string(config.collision_pairs) + " collision pairs");

    for (const auto& h : holdings)
        g.shares.push_back({labels[static_cast<size_t>(h.owner)], labels[static_cast<size_t>(h.owned)], h.pct});

    const int n = static_cast<int>(labels.size());
    const auto control = derive_control(labels, g.shares);
    std::vector<bool> controlled(static_cast<size_t>(n), false);
    for (auto [x, y] : control) controlled[static_cast<size_t>(y)] = true;

    KnowledgeGraph& kg = g.kg;
    auto L = [&](int i) -> const std::string& { return labels[static_cast<size_t>(i)]; };
    for (const auto& h : holdings) {
        kg.add(L(h.owner), "own", L(h.owned));
        if (h.pct >= 10) kg.add(L(h.owner), "qualified_holding", L(h.owned));
        if (h.pct >= 20 && h.pct <= 50) kg.add(L(h.owner), "influence", L(h.owned));
    }
    for (auto [x, y] : control) {
        kg.add(L(x), "control", L(y));
        if (!controlled[static_cast<size_t>(x)]) kg.add(L(x), "ultimate_control", L(y));
    }
    for (auto [p, c] : role_edges) kg.add(L(p), "role", L(c));
    // reachable: directed ownership path of length >= 1
    std::vector<std::vector<int>> owns(static_cast<size_t>(n));
    for (const auto& h : holdings) owns[static_cast<size_t>(h.owner)].push_back(h.owned);
    for (int x = 0; x < n; ++x) {
        std::vector<bool> seen(static_cast<size_t>(n), false);
        std::vector<int> stack = owns[static_cast<size_t>(x)];
        while (!stack.empty()) {
            const int y = stack.back();
            stack.pop_back();
            if (seen[static_cast<size_t>(y)]) continue;
            seen[static_cast<size_t>(y)] = true;
            for (int z : owns[static_cast<size_t>(y)]) stack.push_back(z);
        }
        for (int y = 0; y < n; ++y)
            if (seen[static_cast<size_t>(y)]) kg.add(L(x), "reachable", L(y));
    }
    return g;
}

}  // namespace kgalign
