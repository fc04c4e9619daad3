#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "kgalign/qa_gen.hpp"

namespace kgalign {

// Lowercase, collapse whitespace, strip trailing punctuation.
std::string normalize_answer(std::string_view s);
std::vector<std::string> answer_tokens(std::string_view s);

double exact_match(std::string_view prediction, std::string_view reference);
double token_f1(std::string_view prediction, std::string_view reference);
double rouge_n(std::string_view prediction, std::string_view reference, int n);
double rouge_l(std::string_view prediction, std::string_view reference);
// Newline-separated segments, union LCS per reference segment.
double rouge_lsum(std::string_view prediction, std::string_view reference);
double bleu(std::string_view prediction, std::string_view reference, int k);
double rwb(std::string_view prediction, std::string_view reference);

constexpr std::array<double, 4> kRwbWeights = {0.4, 0.3, 0.2, 0.1};

struct Scores {
    double em = 0, f1 = 0, rouge1 = 0, rouge2 = 0, rougeL = 0, rougeLsum = 0;
    double bleu1 = 0, bleu2 = 0, bleu3 = 0, bleu4 = 0, rwb = 0;
};

struct MetricField {
    const char* name;
    double Scores::*member;
};
// Column order of the result tables: the headline five, then the rest.
extern const std::array<MetricField, 11> kMetricFields;

Scores score_pair(std::string_view prediction, std::string_view reference);

struct MetricReport {
    std::vector<Scores> per_example;
    Scores mean;  // macro average
    int count = 0;
};

MetricReport aggregate(std::vector<Scores> per_example);

struct TTestResult {
    double t_statistic = 0;
    double p_value = 1;
    bool significant = false;
    int n = 0;
    double mean_difference = 0;
};

constexpr double kSignificanceLevel = 0.05;

// Two-sided paired t-test on a - b. Zero-variance differences throw
// DegenerateInputError.
TTestResult paired_ttest(const std::vector<double>& scores_a, const std::vector<double>& scores_b);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double x, double a, double b);
// P(|T| >= |t|) for Student's t with df degrees of freedom.
double student_t_two_sided(double t, double df);

enum class ErrorCategory {
    Correct,
    CompletelyWrong,
    TrueFalseWrong,
    SubsetOfAnswer,
    SimilarAnswer,
    SimilarCompanyType,
    WrongOrder
};
constexpr std::array<ErrorCategory, 7> kErrorCategories = {
    ErrorCategory::Correct,        ErrorCategory::CompletelyWrong,    ErrorCategory::TrueFalseWrong,
    ErrorCategory::SubsetOfAnswer, ErrorCategory::SimilarAnswer,      ErrorCategory::SimilarCompanyType,
    ErrorCategory::WrongOrder};
std::string to_string(ErrorCategory c);

// Precedence: Correct, TrueFalseWrong, WrongOrder, SubsetOfAnswer,
// SimilarAnswer, SimilarCompanyType, CompletelyWrong.
ErrorCategory classify_error(const QaExample& example, std::string_view prediction);

struct ErrorBreakdown {
    std::map<ErrorCategory, int> counts;
    int total = 0;
};
ErrorBreakdown error_breakdown(const std::vector<QaExample>& examples, const std::vector<std::string>& predictions);

}  // namespace kgalign
