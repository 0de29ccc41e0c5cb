#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace dimabsa::stats {

struct TestResult {
    double statistic = 0.0;
    double p = 1.0;
};

// Shapiro-Wilk normality test using Royston's 1995 approximation
// (Applied Statistics algorithm AS R94), valid for 3 <= n <= 5000.
// Raises DomainError outside that range and DegenerateSampleError when
// every observation is identical.
TestResult shapiro_wilk(std::vector<double> sample);

// One-way fixed-effects analysis of variance. Needs at least two groups
// of at least two observations each. Identical group means give F = 0,
// p = 1 even when the within-group variance is zero.
TestResult anova_oneway(const std::vector<std::vector<double>>& groups);

// Kruskal-Wallis rank test with the standard tie correction. When every
// observation is identical the statistic is 0 and p is 1. Needs at least
// two non-empty groups.
TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

// Two-sample t test, pooled-variance by default, Welch when requested.
// Two-sided p. Raises DegenerateSampleError when the scale estimate is
// zero and DomainError when either sample has fewer than two values.
TestResult t_test_independent(const std::vector<double>& a,
                              const std::vector<double>& b, bool welch = false);

// Two-sided Mann-Whitney U test. The statistic is U of the first sample.
// Exact enumeration of the null distribution when n_a + n_b <= 16 and the
// pooled values are tie-free; otherwise the normal approximation with tie
// correction and a 0.5 continuity correction. All-tied input gives p = 1.
TestResult mann_whitney_u(const std::vector<double>& a,
                          const std::vector<double>& b);

// Holm-Bonferroni step-down adjustment. Monotone, capped at 1, input
// order preserved. Raises DomainError on p outside [0, 1].
std::vector<double> holm_bonferroni(const std::vector<double>& p_values);

// 1-based average ranks in input order; tied values share the mean of the
// rank block they occupy.
std::vector<double> average_ranks(const std::vector<double>& values);

// Number of significance marks earned by an (already adjusted) p-value:
// 3 below 0.001, 2 below 0.01, 1 below 0.05, else 0.
int significance_level(double p);

// `mark` repeated `level` times, e.g. (2, "*") -> "**". Marks may be
// multi-byte sequences such as daggers.
std::string significance_marks(int level, std::string_view mark);

// Scores grouped by experimental condition. All conditions must hold the
// same number of observations (one per repetition seed), at least 3.
struct ScoreTable {
    std::vector<std::string> conditions;
    std::vector<std::vector<double>> scores;
};

struct NormalityEntry {
    std::string condition;
    double w = 0.0;
    double p = 0.0;
    bool normal = false;
    bool degenerate = false;  // constant sample, test undefined
};

struct PairwiseEntry {
    std::size_t first = 0;   // indices into ScoreTable::conditions
    std::size_t second = 0;
    std::string test;        // "t" or "mann-whitney"
    double statistic = 0.0;
    double p_raw = 1.0;
    double p_adjusted = 1.0;
    int level = 0;           // significance_level(p_adjusted)
};

struct SignificanceReport {
    double alpha = 0.05;
    std::vector<std::string> conditions;
    std::vector<NormalityEntry> normality;
    bool all_normal = false;
    std::string omnibus_test;  // "anova" or "kruskal-wallis"
    double omnibus_statistic = 0.0;
    double omnibus_p = 1.0;
    bool pairwise_done = false;
    std::vector<PairwiseEntry> pairwise;  // all (i, j), i < j, in order
};

// The full comparison procedure for one score table:
//   1. Shapiro-Wilk per condition; a condition is normal iff p >= alpha.
//      Constant samples are flagged degenerate and treated as non-normal.
//   2. Omnibus gate: ANOVA when every condition is normal, Kruskal-Wallis
//      otherwise. Pairwise tests run only when the omnibus p < alpha.
//   3. Per pair: t test when both members are normal, Mann-Whitney
//      otherwise. Raw p-values are Holm-adjusted as one family.
SignificanceReport significance_pipeline(const ScoreTable& table,
                                         double alpha = 0.05, bool welch = false);

}  // namespace dimabsa::stats
