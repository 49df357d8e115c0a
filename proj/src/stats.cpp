#include "tsl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tsl {

double sample_mean(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean of empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

DescriptiveStats descriptive(std::span<const double> xs) {
    if (xs.size() < 2) throw std::invalid_argument("sample standard deviation needs n >= 2");
    double m = sample_mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

// --- special functions ---

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

namespace {

// modified Lentz evaluation of the textbook continued fraction for I_x(a,b)
double incomplete_beta_cf(double x, double a, double b) {
    constexpr double tiny = 1e-300;
    constexpr double tol = 1e-14;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double result = d;
    for (int m = 1; m <= 100000; ++m) {
        double dm = static_cast<double>(m);
        // even term
        double numer = dm * (b - dm) * x / ((a + 2.0 * dm - 1.0) * (a + 2.0 * dm));
        d = 1.0 + numer * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + numer / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        result *= c * d;
        // odd term
        numer = -(a + dm) * (a + b + dm) * x / ((a + 2.0 * dm) * (a + 2.0 * dm + 1.0));
        d = 1.0 + numer * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + numer / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double mult = c * d;
        result *= mult;
        if (std::fabs(mult - 1.0) <= tol) break;
    }
    return result;
}

} // namespace

double regularized_incomplete_beta(double x, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("incomplete beta requires a, b > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double front = std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta(a, b));
    if (x < (a + 1.0) / (a + b + 2.0)) return front * incomplete_beta_cf(x, a, b) / a;
    return 1.0 - std::exp(b * std::log1p(-x) + a * std::log(x) - log_beta(a, b)) * incomplete_beta_cf(1.0 - x, b, a) / b;
}

double f_cdf(double f, double df1, double df2) {
    if (f <= 0.0) return 0.0;
    double x = df1 * f / (df1 * f + df2);
    return regularized_incomplete_beta(x, df1 / 2.0, df2 / 2.0);
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) * 0.3989422804014327; }

double normal_cdf(double z) { return 0.5 * std::erfc(-z * M_SQRT1_2); }

namespace {

// P(range of k standard normals <= w)
double normal_range_cdf(double w, int k) {
    if (w <= 0.0) return 0.0;
    // integrand phi(z) * (Phi(z) - Phi(z - w))^(k-1) dies off beyond |z| ~ 9
    constexpr double lo = -9.0, hi = 9.0;
    constexpr int n = 512; // Simpson intervals (even)
    double h = (hi - lo) / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        double z = lo + h * i;
        double v = normal_pdf(z) * std::pow(normal_cdf(z) - normal_cdf(z - w), k - 1);
        double coef = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc += coef * v;
    }
    return std::min(1.0, k * acc * h / 3.0);
}

} // namespace

double studentized_range_cdf(double q, int k, double df) {
    if (k < 2) throw std::invalid_argument("studentized range needs k >= 2 groups");
    if (df < 1.0) throw std::invalid_argument("studentized range needs df >= 1");
    if (q <= 0.0) return 0.0;
    if (df > 1e4) return normal_range_cdf(q, k); // scale factor degenerates to 1
    // integrate over the scale s ~ sqrt(chi^2_df / df):
    //   f(s) = C s^(df-1) exp(-df s^2 / 2),  log C = (df/2) log df - lgamma(df/2) - (df/2 - 1) log 2
    double log_c = 0.5 * df * std::log(df) - std::lgamma(df / 2.0) - (df / 2.0 - 1.0) * std::log(2.0);
    constexpr double lo = 1e-8;
    const double hi = 1.0 + 12.0 / std::sqrt(df); // density support shrinks around 1 as df grows
    const int n = 1024;
    double h = (hi - lo) / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        double s = lo + h * i;
        double log_f = log_c + (df - 1.0) * std::log(s) - df * s * s / 2.0;
        double v = std::exp(log_f) * normal_range_cdf(q * s, k);
        double coef = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc += coef * v;
    }
    return std::min(1.0, acc * h / 3.0);
}

double studentized_range_quantile(double alpha, int k, double df) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    double target = 1.0 - alpha;
    double lo = 0.0, hi = 2.0;
    while (studentized_range_cdf(hi, k, df) < target) {
        hi *= 2.0;
        if (hi > 1e4) throw std::runtime_error("studentized range quantile out of supported range");
    }
    for (int i = 0; i < 80 && hi - lo > 1e-10; ++i) {
        double mid = 0.5 * (lo + hi);
        (studentized_range_cdf(mid, k, df) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// --- ANOVA ---

AnovaResult anova_oneway(const std::vector<SampleGroup> &groups) {
    if (groups.size() < 2) throw std::invalid_argument("one-way ANOVA needs at least 2 groups");
    for (const auto &g : groups)
        if (g.samples.size() < 2) throw std::invalid_argument("every ANOVA group needs n >= 2");

    std::size_t total_n = 0;
    double grand_sum = 0.0;
    for (const auto &g : groups) {
        total_n += g.samples.size();
        for (double x : g.samples) grand_sum += x;
    }
    double grand_mean = grand_sum / static_cast<double>(total_n);

    AnovaResult res;
    res.df_between = static_cast<int>(groups.size()) - 1;
    res.df_within = static_cast<int>(total_n - groups.size());
    for (const auto &g : groups) {
        double m = sample_mean(g.samples);
        res.ss_between += static_cast<double>(g.samples.size()) * (m - grand_mean) * (m - grand_mean);
        for (double x : g.samples) res.ss_within += (x - m) * (x - m);
    }
    double ms_between = res.ss_between / res.df_between;
    res.ms_within = res.ss_within / res.df_within;

    if (res.ss_between == 0.0) { // identical group means, nothing to explain
        res.f = 0.0;
        res.p = 1.0;
        res.degenerate = res.ss_within == 0.0;
        return res;
    }
    if (res.ms_within == 0.0) { // perfectly separated constant groups
        res.f = std::numeric_limits<double>::infinity();
        res.p = 0.0;
        res.degenerate = true;
        return res;
    }
    res.f = ms_between / res.ms_within;
    // upper tail through the complemented beta form for accuracy
    double x = res.df_within / (res.df_within + res.df_between * res.f);
    res.p = regularized_incomplete_beta(x, res.df_within / 2.0, res.df_between / 2.0);
    return res;
}

AssumptionReport check_assumptions(const std::vector<SampleGroup> &groups) {
    AssumptionReport rep;
    double min_var = std::numeric_limits<double>::infinity();
    double max_var = 0.0;
    for (const auto &g : groups) {
        double m = sample_mean(g.samples);
        double n = static_cast<double>(g.samples.size());
        double m2 = 0.0, m3 = 0.0, m4 = 0.0;
        for (double x : g.samples) {
            double d = x - m;
            m2 += d * d;
            m3 += d * d * d;
            m4 += d * d * d * d;
        }
        m2 /= n;
        m3 /= n;
        m4 /= n;
        if (m2 > 0.0) {
            rep.max_abs_skewness = std::max(rep.max_abs_skewness, std::fabs(m3 / std::pow(m2, 1.5)));
            rep.max_abs_excess_kurtosis = std::max(rep.max_abs_excess_kurtosis, std::fabs(m4 / (m2 * m2) - 3.0));
        }
        double var = m2 * n / std::max(1.0, n - 1.0);
        min_var = std::min(min_var, var);
        max_var = std::max(max_var, var);
    }
    rep.variance_ratio = min_var > 0.0 ? max_var / min_var : std::numeric_limits<double>::infinity();
    rep.flagged = rep.max_abs_skewness > 2.0 || rep.max_abs_excess_kurtosis > 7.0 || rep.variance_ratio > 10.0;
    return rep;
}

// --- Tukey HSD ---

TukeyResult tukey_hsd(const std::vector<SampleGroup> &groups, double alpha) {
    AnovaResult anova = anova_oneway(groups);
    TukeyResult res;
    res.alpha = alpha;
    res.df_within = anova.df_within;
    res.q_critical = studentized_range_quantile(alpha, static_cast<int>(groups.size()), anova.df_within);
    for (std::size_t i = 0; i < groups.size(); ++i) {
        for (std::size_t j = i + 1; j < groups.size(); ++j) {
            double mi = sample_mean(groups[i].samples);
            double mj = sample_mean(groups[j].samples);
            double ni = static_cast<double>(groups[i].samples.size());
            double nj = static_cast<double>(groups[j].samples.size());
            // equal n: q * sqrt(MSw / n); otherwise the Tukey-Kramer form
            double se = std::sqrt(anova.ms_within / 2.0 * (1.0 / ni + 1.0 / nj));
            double margin = res.q_critical * se;
            TukeyRow row;
            row.group_a = groups[i].label;
            row.group_b = groups[j].label;
            row.diff = mi - mj;
            row.ci_low = row.diff - margin;
            row.ci_high = row.diff + margin;
            row.significant = row.ci_low > 0.0 || row.ci_high < 0.0;
            res.rows.push_back(std::move(row));
        }
    }
    return res;
}

// --- KDE ---

double quantile(std::vector<double> sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
    std::sort(sorted.begin(), sorted.end());
    double idx = p * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(idx));
    std::size_t hi = static_cast<std::size_t>(std::ceil(idx));
    double frac = idx - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

double silverman_bandwidth(std::span<const double> samples) {
    if (samples.size() < 2) throw std::invalid_argument("bandwidth needs n >= 2");
    DescriptiveStats d = descriptive(samples);
    std::vector<double> xs(samples.begin(), samples.end());
    double iqr = quantile(xs, 0.75) - quantile(xs, 0.25);
    double spread = d.stddev;
    if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
    if (spread <= 0.0) throw std::invalid_argument("bandwidth undefined for zero-spread sample");
    return 0.9 * spread * std::pow(static_cast<double>(samples.size()), -0.2);
}

std::vector<double> kde(std::span<const double> samples, std::span<const double> grid, double bandwidth) {
    if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
    std::vector<double> density(grid.size(), 0.0);
    double norm = 1.0 / (static_cast<double>(samples.size()) * bandwidth);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        double acc = 0.0;
        for (double x : samples) acc += normal_pdf((grid[j] - x) / bandwidth);
        density[j] = acc * norm;
    }
    return density;
}

std::vector<double> kde(std::span<const double> samples, std::span<const double> grid) {
    return kde(samples, grid, silverman_bandwidth(samples));
}

std::vector<double> kde_grid(std::span<const double> samples, int points) {
    double h = silverman_bandwidth(samples);
    double lo = *std::min_element(samples.begin(), samples.end()) - 3.0 * h;
    double hi = *std::max_element(samples.begin(), samples.end()) + 3.0 * h;
    std::vector<double> grid(points);
    for (int i = 0; i < points; ++i) grid[i] = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
    return grid;
}

} // namespace tsl
