#include "dimabsa/stats/tests.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dimabsa/errors.hpp"
#include "dimabsa/stats/special.hpp"

namespace dimabsa::stats {

namespace {

double poly(const double* c, int n, double x) {
    double v = c[0];
    double xn = 1.0;
    for (int i = 1; i < n; ++i) {
        xn *= x;
        v += c[i] * xn;
    }
    return v;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Unbiased sample variance (n - 1 denominator).
double variance_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double ss = 0.0;
    for (const double x : v) ss += (x - m) * (x - m);
    return ss / static_cast<double>(v.size() - 1);
}

// Sum over tie groups of t^3 - t, shared by the rank tests.
double tie_term(std::vector<double> pooled) {
    std::sort(pooled.begin(), pooled.end());
    double total = 0.0;
    size_t i = 0;
    while (i < pooled.size()) {
        size_t j = i;
        while (j < pooled.size() && pooled[j] == pooled[i]) ++j;
        const double t = static_cast<double>(j - i);
        total += t * t * t - t;
        i = j;
    }
    return total;
}

// Null distribution counts for the Mann-Whitney U statistic: the number
// of ways to interleave n1 and n2 tie-free observations so that the first
// sample's U equals u. Classic recurrence
//   c(n1, n2, u) = c(n1-1, n2, u-n2) + c(n1, n2-1, u).
// Counts fit comfortably in doubles for n1 + n2 <= 16.
double mwu_exact_cdf(int n1, int n2, int u_upto) {
    const int umax = n1 * n2;
    // table[a][b][u]
    std::vector<std::vector<std::vector<double>>> c(
        n1 + 1, std::vector<std::vector<double>>(
                    n2 + 1, std::vector<double>(umax + 1, 0.0)));
    for (int b = 0; b <= n2; ++b) c[0][b][0] = 1.0;
    for (int a = 1; a <= n1; ++a) {
        for (int b = 0; b <= n2; ++b) {
            for (int u = 0; u <= a * b; ++u) {
                double v = 0.0;
                if (u - b >= 0) v += c[a - 1][b][u - b];
                if (b >= 1) v += c[a][b - 1][u];
                if (b == 0) v = (u == 0) ? 1.0 : 0.0;
                c[a][b][u] = v;
            }
        }
    }
    double tail = 0.0;
    for (int u = 0; u <= u_upto && u <= umax; ++u) tail += c[n1][n2][u];
    double total = 0.0;
    for (int u = 0; u <= umax; ++u) total += c[n1][n2][u];
    return tail / total;
}

}  // namespace

std::vector<double> average_ranks(const std::vector<double>& values) {
    const size_t n = values.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](size_t a, size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && values[idx[j]] == values[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + 1 + j);  // mean of i+1 .. j
        for (size_t k = i; k < j; ++k) ranks[idx[k]] = avg;
        i = j;
    }
    return ranks;
}

TestResult shapiro_wilk(std::vector<double> x) {
    const int n = static_cast<int>(x.size());
    if (n < 3) throw DomainError("Shapiro-Wilk needs at least 3 observations");
    if (n > 5000) {
        throw DomainError("Shapiro-Wilk approximation is limited to n <= 5000");
    }
    std::sort(x.begin(), x.end());
    if (x.front() == x.back()) {
        throw DegenerateSampleError("Shapiro-Wilk is undefined on a constant sample");
    }

    // Royston (1995): polynomial corrections to the Shapiro-Wilk weights.
    static const double c1[6] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
    static const double c2[6] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
    static const double c3[4] = {0.5440, -0.39978, 0.025054, -6.714e-4};
    static const double c4[4] = {1.3822, -0.77857, 0.062767, -0.0020322};
    static const double c5[4] = {-1.5861, -0.31082, -0.083751, 0.0038915};
    static const double c6[3] = {-0.4803, -0.082676, 0.0030302};
    static const double g[2] = {-2.273, 0.459};

    const int n2 = n / 2;
    std::vector<double> a(n2, 0.0);
    if (n == 3) {
        a[0] = std::sqrt(0.5);
    } else {
        const double an25 = n + 0.25;
        double summ2 = 0.0;
        for (int i = 0; i < n2; ++i) {
            a[i] = normal_ppf((i + 1 - 0.375) / an25);  // lower half, negative
            summ2 += a[i] * a[i];
        }
        summ2 *= 2.0;
        const double ssumm2 = std::sqrt(summ2);
        const double rsn = 1.0 / std::sqrt(static_cast<double>(n));
        const double a1 = poly(c1, 6, rsn) - a[0] / ssumm2;
        int i1;
        double fac;
        if (n > 5) {
            i1 = 2;
            const double a2 = poly(c2, 6, rsn) - a[1] / ssumm2;
            fac = std::sqrt((summ2 - 2.0 * a[0] * a[0] - 2.0 * a[1] * a[1]) /
                            (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
            a[1] = a2;
        } else {
            i1 = 1;
            fac = std::sqrt((summ2 - 2.0 * a[0] * a[0]) / (1.0 - 2.0 * a1 * a1));
        }
        a[0] = a1;
        for (int i = i1; i < n2; ++i) a[i] = -a[i] / fac;
    }

    // W = (sum of weighted symmetric differences)^2 / total sum of squares.
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ssq = 0.0;
    for (const double v : x) ssq += (v - mean) * (v - mean);
    double sa = 0.0;
    for (int i = 0; i < n2; ++i) sa += a[i] * (x[n - 1 - i] - x[i]);
    double w = (sa * sa) / ssq;
    if (w > 1.0) w = 1.0;

    double p;
    if (n == 3) {
        const double stqr = std::asin(std::sqrt(0.75));  // pi / 3
        p = (6.0 / M_PI) * (std::asin(std::sqrt(w)) - stqr);
        p = std::clamp(p, 0.0, 1.0);
    } else {
        const double y = std::log1p(-w);  // log(1 - W)
        double m, s, yy = y;
        if (n <= 11) {
            const double gamma = poly(g, 2, static_cast<double>(n));
            if (y >= gamma) {
                // W too far into the tail for the transform; overwhelming
                // evidence against normality.
                return {w, 0.0};
            }
            yy = -std::log(gamma - y);
            m = poly(c3, 4, static_cast<double>(n));
            s = std::exp(poly(c4, 4, static_cast<double>(n)));
        } else {
            const double lx = std::log(static_cast<double>(n));
            m = poly(c5, 4, lx);
            s = std::exp(poly(c6, 3, lx));
        }
        p = normal_sf((yy - m) / s);
    }
    return {w, p};
}

TestResult anova_oneway(const std::vector<std::vector<double>>& groups) {
    const size_t ng = groups.size();
    if (ng < 2) throw DomainError("ANOVA needs at least two groups");
    size_t n_total = 0;
    for (const auto& grp : groups) {
        if (grp.size() < 2) {
            throw DomainError("each ANOVA group needs at least two observations");
        }
        n_total += grp.size();
    }
    double grand = 0.0;
    for (const auto& grp : groups) grand += std::accumulate(grp.begin(), grp.end(), 0.0);
    grand /= static_cast<double>(n_total);

    double ssb = 0.0, ssw = 0.0;
    for (const auto& grp : groups) {
        const double m = mean_of(grp);
        ssb += static_cast<double>(grp.size()) * (m - grand) * (m - grand);
        for (const double v : grp) ssw += (v - m) * (v - m);
    }
    const double df_b = static_cast<double>(ng - 1);
    const double df_w = static_cast<double>(n_total - ng);
    if (ssb == 0.0) return {0.0, 1.0};
    if (ssw == 0.0) {
        // Distinct means with zero within-group scatter: evidence is
        // unbounded.
        return {std::numeric_limits<double>::infinity(), 0.0};
    }
    const double f = (ssb / df_b) / (ssw / df_w);
    return {f, 1.0 - f_cdf(f, df_b, df_w)};
}

TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
    const size_t ng = groups.size();
    if (ng < 2) throw DomainError("Kruskal-Wallis needs at least two groups");
    std::vector<double> pooled;
    for (const auto& grp : groups) {
        if (grp.empty()) throw DomainError("Kruskal-Wallis groups must be non-empty");
        pooled.insert(pooled.end(), grp.begin(), grp.end());
    }
    const double n = static_cast<double>(pooled.size());
    if (pooled.size() < 3) {
        throw DomainError("Kruskal-Wallis needs at least three observations");
    }

    const std::vector<double> ranks = average_ranks(pooled);
    double h = 0.0;
    size_t offset = 0;
    for (const auto& grp : groups) {
        double rsum = 0.0;
        for (size_t i = 0; i < grp.size(); ++i) rsum += ranks[offset + i];
        h += rsum * rsum / static_cast<double>(grp.size());
        offset += grp.size();
    }
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);

    const double correction = 1.0 - tie_term(pooled) / (n * n * n - n);
    if (correction <= 0.0) return {0.0, 1.0};  // every observation tied
    h /= correction;
    return {h, 1.0 - chi_square_cdf(h, static_cast<double>(ng - 1))};
}

TestResult t_test_independent(const std::vector<double>& a,
                              const std::vector<double>& b, bool welch) {
    if (a.size() < 2 || b.size() < 2) {
        throw DomainError("t test needs at least two observations per sample");
    }
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double ma = mean_of(a), mb = mean_of(b);
    const double va = variance_of(a), vb = variance_of(b);

    double se, df;
    if (welch) {
        const double ea = va / na, eb = vb / nb;
        se = std::sqrt(ea + eb);
        if (se == 0.0) throw DegenerateSampleError("t test on two constant samples");
        df = (ea + eb) * (ea + eb) /
             (ea * ea / (na - 1.0) + eb * eb / (nb - 1.0));
    } else {
        const double pooled =
            ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
        se = std::sqrt(pooled * (1.0 / na + 1.0 / nb));
        if (se == 0.0) throw DegenerateSampleError("t test on two constant samples");
        df = na + nb - 2.0;
    }
    const double t = (ma - mb) / se;
    const double p = 2.0 * (1.0 - student_t_cdf(std::fabs(t), df));
    return {t, std::min(p, 1.0)};
}

TestResult mann_whitney_u(const std::vector<double>& a,
                          const std::vector<double>& b) {
    if (a.empty() || b.empty()) {
        throw DomainError("Mann-Whitney needs non-empty samples");
    }
    const size_t n1 = a.size(), n2 = b.size();
    std::vector<double> pooled(a);
    pooled.insert(pooled.end(), b.begin(), b.end());
    const std::vector<double> ranks = average_ranks(pooled);
    double r1 = 0.0;
    for (size_t i = 0; i < n1; ++i) r1 += ranks[i];
    const double u1 = r1 - static_cast<double>(n1 * (n1 + 1)) / 2.0;
    const double u2 = static_cast<double>(n1 * n2) - u1;

    const bool has_ties = tie_term(pooled) > 0.0;
    if (!has_ties && n1 + n2 <= 16) {
        const int u_min = static_cast<int>(std::lround(std::min(u1, u2)));
        const double p = std::min(
            1.0, 2.0 * mwu_exact_cdf(static_cast<int>(n1), static_cast<int>(n2), u_min));
        return {u1, p};
    }

    const double n = static_cast<double>(n1 + n2);
    const double mu = static_cast<double>(n1 * n2) / 2.0;
    const double tie = tie_term(pooled) / (n * (n - 1.0));
    const double var = static_cast<double>(n1 * n2) / 12.0 * ((n + 1.0) - tie);
    if (var <= 0.0) return {u1, 1.0};  // every observation tied
    const double z = (std::fabs(u1 - mu) - 0.5) / std::sqrt(var);
    const double p = std::min(1.0, 2.0 * normal_sf(std::max(z, 0.0)));
    return {u1, p};
}

std::vector<double> holm_bonferroni(const std::vector<double>& p_values) {
    const size_t m = p_values.size();
    for (const double p : p_values) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw DomainError("p-values must lie in [0, 1]");
        }
    }
    std::vector<size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](size_t x, size_t y) { return p_values[x] < p_values[y]; });
    std::vector<double> adjusted(m, 0.0);
    double running = 0.0;
    for (size_t r = 0; r < m; ++r) {
        const double scaled = static_cast<double>(m - r) * p_values[idx[r]];
        running = std::max(running, scaled);
        adjusted[idx[r]] = std::min(1.0, running);
    }
    return adjusted;
}

int significance_level(double p) {
    if (p < 0.001) return 3;
    if (p < 0.01) return 2;
    if (p < 0.05) return 1;
    return 0;
}

std::string significance_marks(int level, std::string_view mark) {
    std::string out;
    for (int i = 0; i < level; ++i) out += mark;
    return out;
}

SignificanceReport significance_pipeline(const ScoreTable& table, double alpha,
                                         bool welch) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw DomainError("alpha must lie strictly between 0 and 1");
    }
    const size_t nc = table.conditions.size();
    if (nc != table.scores.size()) {
        throw DomainError("condition names and score rows differ in count");
    }
    if (nc < 2) throw DomainError("need at least two conditions to compare");
    const size_t reps = table.scores.front().size();
    for (const auto& row : table.scores) {
        if (row.size() != reps) {
            throw DomainError("every condition needs the same number of scores");
        }
    }
    if (reps < 3) throw DomainError("need at least three scores per condition");

    SignificanceReport report;
    report.alpha = alpha;
    report.conditions = table.conditions;

    report.all_normal = true;
    for (size_t i = 0; i < nc; ++i) {
        NormalityEntry entry;
        entry.condition = table.conditions[i];
        try {
            const TestResult r = shapiro_wilk(table.scores[i]);
            entry.w = r.statistic;
            entry.p = r.p;
            entry.normal = r.p >= alpha;
        } catch (const DegenerateSampleError&) {
            entry.degenerate = true;
            entry.normal = false;
        }
        report.all_normal = report.all_normal && entry.normal;
        report.normality.push_back(std::move(entry));
    }

    if (report.all_normal) {
        const TestResult r = anova_oneway(table.scores);
        report.omnibus_test = "anova";
        report.omnibus_statistic = r.statistic;
        report.omnibus_p = r.p;
    } else {
        const TestResult r = kruskal_wallis(table.scores);
        report.omnibus_test = "kruskal-wallis";
        report.omnibus_statistic = r.statistic;
        report.omnibus_p = r.p;
    }

    report.pairwise_done = report.omnibus_p < alpha;
    if (!report.pairwise_done) return report;

    std::vector<double> raw;
    for (size_t i = 0; i < nc; ++i) {
        for (size_t j = i + 1; j < nc; ++j) {
            PairwiseEntry pair;
            pair.first = i;
            pair.second = j;
            const bool both_normal =
                report.normality[i].normal && report.normality[j].normal;
            const TestResult r =
                both_normal
                    ? t_test_independent(table.scores[i], table.scores[j], welch)
                    : mann_whitney_u(table.scores[i], table.scores[j]);
            pair.test = both_normal ? "t" : "mann-whitney";
            pair.statistic = r.statistic;
            pair.p_raw = r.p;
            raw.push_back(r.p);
            report.pairwise.push_back(std::move(pair));
        }
    }
    const std::vector<double> adjusted = holm_bonferroni(raw);
    for (size_t i = 0; i < adjusted.size(); ++i) {
        report.pairwise[i].p_adjusted = adjusted[i];
        report.pairwise[i].level = significance_level(adjusted[i]);
    }
    return report;
}

}  // namespace dimabsa::stats
