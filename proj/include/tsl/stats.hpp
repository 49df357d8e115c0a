#ifndef TSL_STATS_HPP
#define TSL_STATS_HPP

#include <span>
#include <string>
#include <vector>

namespace tsl {

struct SampleGroup {
    std::string label;
    std::vector<double> samples;
};

struct DescriptiveStats {
    double mean = 0.0;
    double stddev = 0.0; // n-1 denominator
};

// mean and sample standard deviation; throws std::invalid_argument for n < 2
DescriptiveStats descriptive(std::span<const double> xs);

double sample_mean(std::span<const double> xs);

// --- special functions (no external statistics dependency) ---

double log_beta(double a, double b);
// I_x(a, b) via the Lentz continued fraction, ~1e-12 accuracy
double regularized_incomplete_beta(double x, double a, double b);
double f_cdf(double f, double df1, double df2);
double normal_pdf(double z);
double normal_cdf(double z);
// CDF of the studentized range with k groups and df error degrees of freedom,
// evaluated by double numerical integration
double studentized_range_cdf(double q, int k, double df);
// upper-alpha quantile q(alpha; k, df) via bracketing bisection
double studentized_range_quantile(double alpha, int k, double df);

// --- one-way ANOVA ---

struct AnovaResult {
    double f = 0.0;
    int df_between = 0;
    int df_within = 0;
    double p = 1.0;
    double ms_within = 0.0;
    double ss_between = 0.0;
    double ss_within = 0.0;
    bool degenerate = false; // zero within-group variance with unequal means
};

AnovaResult anova_oneway(const std::vector<SampleGroup> &groups);

// distribution-shape summary used to flag questionable test assumptions
struct AssumptionReport {
    double max_abs_skewness = 0.0;
    double max_abs_excess_kurtosis = 0.0;
    double variance_ratio = 1.0; // max group variance / min group variance
    bool flagged = false;
};

AssumptionReport check_assumptions(const std::vector<SampleGroup> &groups);

// --- Tukey HSD ---

struct TukeyRow {
    std::string group_a;
    std::string group_b;
    double diff = 0.0; // mean(a) - mean(b)
    double ci_low = 0.0;
    double ci_high = 0.0;
    bool significant = false;
};

struct TukeyResult {
    double alpha = 0.05;
    double q_critical = 0.0;
    int df_within = 0;
    std::vector<TukeyRow> rows;
};

// Pairwise comparisons after ANOVA. Equal group sizes use the classic HSD
// interval; unequal sizes fall back to the Tukey-Kramer denominator.
TukeyResult tukey_hsd(const std::vector<SampleGroup> &groups, double alpha = 0.05);

// --- kernel density estimation ---

// h = 0.9 * min(sigma, IQR/1.34) * n^(-1/5); throws for zero-spread samples
double silverman_bandwidth(std::span<const double> samples);

// Gaussian KDE with Silverman bandwidth evaluated on `grid`.
std::vector<double> kde(std::span<const double> samples, std::span<const double> grid);
std::vector<double> kde(std::span<const double> samples, std::span<const double> grid, double bandwidth);

// evenly spaced grid covering the samples with 3-bandwidth margins
std::vector<double> kde_grid(std::span<const double> samples, int points = 201);

// linear-interpolation sample quantile, p in [0, 1]
double quantile(std::vector<double> sorted, double p);

} // namespace tsl

#endif
