#include "kgalign/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

namespace kgalign {

const std::array<MetricField, 11> kMetricFields = {{{"EM", &Scores::em},
                                                    {"Rouge1", &Scores::rouge1},
                                                    {"RougeL", &Scores::rougeL},
                                                    {"RWB", &Scores::rwb},
                                                    {"F1", &Scores::f1},
                                                    {"Rouge2", &Scores::rouge2},
                                                    {"RougeLsum", &Scores::rougeLsum},
                                                    {"BLEU-1", &Scores::bleu1},
                                                    {"BLEU-2", &Scores::bleu2},
                                                    {"BLEU-3", &Scores::bleu3},
                                                    {"BLEU-4", &Scores::bleu4}}};

namespace {

bool is_terminal_punct(char c) { return c == '.' || c == ',' || c == ';' || c == ':' || c == '!' || c == '?'; }

using Counts = std::map<std::string, int>;

Counts ngrams(const std::vector<std::string>& toks, int n) {
    Counts c;
    for (size_t i = 0; i + static_cast<size_t>(n) <= toks.size(); ++i) {
        std::string key;
        for (int j = 0; j < n; ++j) {
            if (j) key += '\x1f';
            key += toks[i + static_cast<size_t>(j)];
        }
        ++c[key];
    }
    return c;
}

int total(const Counts& c) {
    int t = 0;
    for (const auto& [k, v] : c) t += v;
    return t;
}

int overlap(const Counts& a, const Counts& b) {
    int o = 0;
    for (const auto& [k, v] : a) {
        auto it = b.find(k);
        if (it != b.end()) o += std::min(v, it->second);
    }
    return o;
}

double fmeasure(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

std::vector<std::vector<int>> lcs_table(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::vector<int>> t(a.size() + 1, std::vector<int>(b.size() + 1, 0));
    for (size_t i = 1; i <= a.size(); ++i)
        for (size_t j = 1; j <= b.size(); ++j)
            t[i][j] = a[i - 1] == b[j - 1] ? t[i - 1][j - 1] + 1 : std::max(t[i - 1][j], t[i][j - 1]);
    return t;
}

// Indices into ref of one LCS of (ref, cand), backtracking preferring to drop
// candidate tokens on ties.
std::vector<size_t> lcs_indices(const std::vector<std::string>& ref, const std::vector<std::string>& cand) {
    const auto t = lcs_table(ref, cand);
    std::vector<size_t> out;
    size_t i = ref.size(), j = cand.size();
    while (i > 0 && j > 0) {
        if (ref[i - 1] == cand[j - 1]) {
            out.push_back(i - 1);
            --i;
            --j;
        } else if (t[i][j - 1] > t[i - 1][j]) {
            --j;
        } else {
            --i;
        }
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<std::vector<std::string>> segments(std::string_view s) {
    std::vector<std::vector<std::string>> out;
    for (const auto& line : split(s, '\n')) {
        auto toks = answer_tokens(line);
        if (!toks.empty()) out.push_back(std::move(toks));
    }
    return out;
}

std::vector<std::string> answer_entities(std::string_view s) {
    std::vector<std::string> out;
    for (const auto& piece : split(s, ',')) {
        std::string n = normalize_answer(piece);
        if (!n.empty()) out.push_back(std::move(n));
    }
    return out;
}

std::string legal_form(const std::string& normalized_entity) {
    const auto toks = split_ws(normalized_entity);
    if (toks.size() >= 2 && toks[toks.size() - 2] == "e" && toks.back() == "figli") return "e figli";
    if (toks.empty()) return "";
    const std::string& last = toks.back();
    if (last == "spa" || last == "s.r.l" || last == "s.r.l." || last == "group") return last == "s.r.l." ? "s.r.l" : last;
    return "";
}

// Integer tenths so that four perfect orders sum to exactly 1 (0.4 + 0.3 + 0.2 + 0.1 does not).
double rwb_combine(double b1, double b2, double b3, double b4) { return (4 * b1 + 3 * b2 + 2 * b3 + b4) / 10; }

}  // namespace

std::string normalize_answer(std::string_view s) {
    std::string lowered;
    lowered.reserve(s.size());
    for (char c : s) lowered += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    std::string out = join(split_ws(lowered), " ");
    while (!out.empty() && (is_terminal_punct(out.back()) || out.back() == ' ')) out.pop_back();
    return out;
}

std::vector<std::string> answer_tokens(std::string_view s) { return split_ws(normalize_answer(s)); }

double exact_match(std::string_view prediction, std::string_view reference) {
    return normalize_answer(prediction) == normalize_answer(reference) ? 1.0 : 0.0;
}

double token_f1(std::string_view prediction, std::string_view reference) {
    const auto p = answer_tokens(prediction), r = answer_tokens(reference);
    if (p.empty() || r.empty()) return p.empty() && r.empty() ? 1.0 : 0.0;
    const int common = overlap(ngrams(p, 1), ngrams(r, 1));
    if (common == 0) return 0.0;
    return fmeasure(static_cast<double>(common) / p.size(), static_cast<double>(common) / r.size());
}

double rouge_n(std::string_view prediction, std::string_view reference, int n) {
    if (n < 1) throw ContractError("rouge_n needs n >= 1");
    const Counts p = ngrams(answer_tokens(prediction), n), r = ngrams(answer_tokens(reference), n);
    const int tp = total(p), tr = total(r);
    if (tp == 0 || tr == 0) return 0.0;
    const int o = overlap(p, r);
    return fmeasure(static_cast<double>(o) / tp, static_cast<double>(o) / tr);
}

double rouge_l(std::string_view prediction, std::string_view reference) {
    const auto p = answer_tokens(prediction), r = answer_tokens(reference);
    if (p.empty() || r.empty()) return 0.0;
    const int l = lcs_table(r, p)[r.size()][p.size()];
    return fmeasure(static_cast<double>(l) / p.size(), static_cast<double>(l) / r.size());
}

double rouge_lsum(std::string_view prediction, std::string_view reference) {
    const auto ps = segments(prediction), rs = segments(reference);
    size_t m = 0, n = 0;
    Counts rc, pc;
    for (const auto& s : rs) {
        m += s.size();
        for (const auto& t : s) ++rc[t];
    }
    for (const auto& s : ps) {
        n += s.size();
        for (const auto& t : s) ++pc[t];
    }
    if (m == 0 || n == 0) return 0.0;
    int hits = 0;
    for (const auto& r : rs) {
        std::set<size_t> uni;
        for (const auto& p : ps)
            for (size_t i : lcs_indices(r, p)) uni.insert(i);
        for (size_t i : uni) {
            const std::string& t = r[i];
            if (pc[t] > 0 && rc[t] > 0) {
                ++hits;
                --pc[t];
                --rc[t];
            }
        }
    }
    return fmeasure(static_cast<double>(hits) / n, static_cast<double>(hits) / m);
}

double bleu(std::string_view prediction, std::string_view reference, int k) {
    if (k < 1 || k > 4) throw ContractError("bleu order must lie in 1..4");
    const auto p = answer_tokens(prediction), r = answer_tokens(reference);
    const double c = static_cast<double>(p.size()), rl = static_cast<double>(r.size());
    if (p.empty()) return 0.0;
    double log_sum = 0.0;
    for (int n = 1; n <= k; ++n) {
        const Counts pn = ngrams(p, n);
        const int tot = total(pn);
        const int matched = overlap(pn, ngrams(r, n));
        double prec;
        if (matched > 0) {
            prec = static_cast<double>(matched) / tot;
        } else if (n == 1) {
            return 0.0;  // no shared token at all
        } else {
            prec = 1.0 / (tot + 1.0);  // add-one on a zero count
        }
        log_sum += std::log(prec);
    }
    const double bp = c > rl ? 1.0 : std::exp(1.0 - rl / c);
    return bp * std::exp(log_sum / k);
}

double rwb(std::string_view prediction, std::string_view reference) {
    return rwb_combine(bleu(prediction, reference, 1), bleu(prediction, reference, 2), bleu(prediction, reference, 3),
                       bleu(prediction, reference, 4));
}

Scores score_pair(std::string_view prediction, std::string_view reference) {
    Scores s;
    s.em = exact_match(prediction, reference);
    s.f1 = token_f1(prediction, reference);
    s.rouge1 = rouge_n(prediction, reference, 1);
    s.rouge2 = rouge_n(prediction, reference, 2);
    s.rougeL = rouge_l(prediction, reference);
    s.rougeLsum = rouge_lsum(prediction, reference);
    s.bleu1 = bleu(prediction, reference, 1);
    s.bleu2 = bleu(prediction, reference, 2);
    s.bleu3 = bleu(prediction, reference, 3);
    s.bleu4 = bleu(prediction, reference, 4);
    s.rwb = rwb_combine(s.bleu1, s.bleu2, s.bleu3, s.bleu4);
    return s;
}

MetricReport aggregate(std::vector<Scores> per_example) {
    MetricReport rep;
    rep.count = static_cast<int>(per_example.size());
    if (rep.count > 0) {
        for (const auto& f : kMetricFields) {
            double sum = 0.0;
            for (const auto& s : per_example) sum += s.*(f.member);
            rep.mean.*(f.member) = sum / rep.count;
        }
    }
    rep.per_example = std::move(per_example);
    return rep;
}

double incomplete_beta(double x, double a, double b) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    // Lentz continued fraction
    auto cf = [](double x, double a, double b) {
        constexpr double tiny = 1e-300, eps = 1e-16;
        const double qab = a + b, qap = a + 1, qam = a - 1;
        double c = 1.0, d = 1.0 - qab * x / qap;
        if (std::fabs(d) < tiny) d = tiny;
        d = 1.0 / d;
        double h = d;
        for (int m = 1; m <= 1000; ++m) {
            const int m2 = 2 * m;
            double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
            d = 1.0 + aa * d;
            if (std::fabs(d) < tiny) d = tiny;
            c = 1.0 + aa / c;
            if (std::fabs(c) < tiny) c = tiny;
            d = 1.0 / d;
            h *= d * c;
            aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
            d = 1.0 + aa * d;
            if (std::fabs(d) < tiny) d = tiny;
            c = 1.0 + aa / c;
            if (std::fabs(c) < tiny) c = tiny;
            d = 1.0 / d;
            const double del = d * c;
            h *= del;
            if (std::fabs(del - 1.0) < eps) break;
        }
        return h;
    };
    const double front =
        std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0)) return front * cf(x, a, b) / a;
    return 1.0 - front * cf(1.0 - x, b, a) / b;
}

double student_t_two_sided(double t, double df) {
    if (!(df > 0)) throw ContractError("degrees of freedom must be positive");
    return incomplete_beta(df / (df + t * t), df / 2.0, 0.5);
}

TTestResult paired_ttest(const std::vector<double>& scores_a, const std::vector<double>& scores_b) {
    if (scores_a.size() != scores_b.size()) throw ContractError("paired t-test needs equal-length samples");
    const size_t n = scores_a.size();
    if (n < 2) throw ContractError("paired t-test needs n >= 2");
    double mean = 0.0;
    for (size_t i = 0; i < n; ++i) mean += scores_a[i] - scores_b[i];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = scores_a[i] - scores_b[i] - mean;
        ss += d * d;
    }
    const double var = ss / static_cast<double>(n - 1);
    if (!(var > 0)) throw DegenerateInputError("zero-variance differences: t statistic undefined");
    TTestResult r;
    r.n = static_cast<int>(n);
    r.mean_difference = mean;
    r.t_statistic = mean / std::sqrt(var / static_cast<double>(n));
    r.p_value = std::clamp(student_t_two_sided(r.t_statistic, static_cast<double>(n - 1)), 0.0, 1.0);
    r.significant = r.p_value < kSignificanceLevel;
    return r;
}

std::string to_string(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Correct: return "Correct";
        case ErrorCategory::CompletelyWrong: return "CompletelyWrong";
        case ErrorCategory::TrueFalseWrong: return "TrueFalseWrong";
        case ErrorCategory::SubsetOfAnswer: return "SubsetOfAnswer";
        case ErrorCategory::SimilarAnswer: return "SimilarAnswer";
        case ErrorCategory::SimilarCompanyType: return "SimilarCompanyType";
        case ErrorCategory::WrongOrder: return "WrongOrder";
    }
    return "?";
}

ErrorCategory classify_error(const QaExample& example, std::string_view prediction) {
    if (exact_match(prediction, example.answer) == 1.0) return ErrorCategory::Correct;
    const std::string gold = normalize_answer(example.answer), pred = normalize_answer(prediction);
    auto is_bool = [](const std::string& s) { return s == "true" || s == "false"; };
    if (is_bool(gold) && is_bool(pred)) return ErrorCategory::TrueFalseWrong;

    const auto g = answer_entities(example.answer), p = answer_entities(prediction);
    if (!p.empty()) {
        auto gs = g, ps = p;
        std::sort(gs.begin(), gs.end());
        std::sort(ps.begin(), ps.end());
        if (gs == ps && g != p) return ErrorCategory::WrongOrder;
    }
    const std::set<std::string> gset(g.begin(), g.end()), pset(p.begin(), p.end());
    int matched = 0, wrong = 0;
    for (const auto& e : pset) (gset.count(e) ? matched : wrong)++;
    if (!pset.empty() && wrong == 0 && pset.size() < gset.size()) return ErrorCategory::SubsetOfAnswer;
    if (matched >= 1 && wrong >= 1) return ErrorCategory::SimilarAnswer;
    std::set<std::string> gforms;
    for (const auto& e : g) {
        const auto f = legal_form(e);
        if (!f.empty()) gforms.insert(f);
    }
    for (const auto& e : p)
        if (gforms.count(legal_form(e))) return ErrorCategory::SimilarCompanyType;
    return ErrorCategory::CompletelyWrong;
}

ErrorBreakdown error_breakdown(const std::vector<QaExample>& examples, const std::vector<std::string>& predictions) {
    if (examples.size() != predictions.size()) throw ContractError("error_breakdown: length mismatch");
    ErrorBreakdown b;
    for (auto c : kErrorCategories) b.counts[c] = 0;
    for (size_t i = 0; i < examples.size(); ++i) ++b.counts[classify_error(examples[i], predictions[i])];
    b.total = static_cast<int>(examples.size());
    return b;
}

}  // namespace kgalign
