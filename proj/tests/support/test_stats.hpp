// Test-side statistical machinery: goodness-of-fit p-values and rank
// statistics used by the oracles. Lives in the test tree on purpose --
// production code never depends on it.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "bbmlab/constants.hpp"

namespace teststats {

// Regularized incomplete gamma functions (series + continued fraction).
inline double gamma_p(double a, double x) {
    if (x < 0.0 || a <= 0.0)
        throw std::domain_error("gamma_p: bad arguments");
    if (x == 0.0)
        return 0.0;
    if (x < a + 1.0) {
        double ap = a, sum = 1.0 / a, del = sum;
        for (int n = 0; n < 500; ++n) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-15)
                break;
        }
        return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    // Lentz continued fraction for Q, then P = 1 - Q.
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny)
            d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny)
            c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15)
            break;
    }
    const double q = std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
    return 1.0 - q;
}

inline double chi2_sf(double statistic, double dof) {
    return 1.0 - gamma_p(dof / 2.0, statistic / 2.0);
}

// Chi-square GOF p-value for observed counts against expected
// probabilities; bins with tiny expectation are merged into the previous
// bin.
inline double chi2_gof_pvalue(std::span<const std::uint64_t> observed,
                              std::span<const double> expected_prob, double total,
                              double min_expected = 5.0) {
    if (observed.size() != expected_prob.size())
        throw std::domain_error("chi2_gof_pvalue: size mismatch");
    std::vector<double> exp_merged;
    std::vector<double> obs_merged;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = expected_prob[i] * total;
        if (!exp_merged.empty() && (e < min_expected || exp_merged.back() < min_expected)) {
            exp_merged.back() += e;
            obs_merged.back() += static_cast<double>(observed[i]);
        } else {
            exp_merged.push_back(e);
            obs_merged.push_back(static_cast<double>(observed[i]));
        }
    }
    double stat = 0.0;
    std::size_t bins = 0;
    for (std::size_t i = 0; i < exp_merged.size(); ++i) {
        if (exp_merged[i] <= 0.0)
            continue;
        const double d = obs_merged[i] - exp_merged[i];
        stat += d * d / exp_merged[i];
        ++bins;
    }
    if (bins < 2)
        return 1.0;
    return chi2_sf(stat, static_cast<double>(bins - 1));
}

// Kolmogorov asymptotic survival function.
inline double kolmogorov_sf(double lambda) {
    if (lambda <= 0.0)
        return 1.0;
    double sum = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += (j % 2 == 1 ? 1.0 : -1.0) * term;
        if (term < 1e-16)
            break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

// One-sample KS against a caller CDF.
inline KsResult ks_test(std::vector<double> sample, const std::function<double(double)>& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
        d = std::max(d, std::abs(static_cast<double>(i) / n - f));
    }
    const double sqrt_n = std::sqrt(n);
    return {d, kolmogorov_sf((sqrt_n + 0.12 + 0.11 / sqrt_n) * d)};
}

// Two-sample KS distance (no p-value; used for closeness thresholds).
inline double ks_two_sample_distance(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / static_cast<double>(a.size()) -
                                 static_cast<double>(j) / static_cast<double>(b.size())));
    }
    return d;
}

inline std::vector<double> ranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return xs[a] < xs[b];
    });
    std::vector<double> r(xs.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]])
            ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            r[order[k]] = avg;
        i = j + 1;
    }
    return r;
}

struct SpearmanResult {
    double rho = 0.0;
    double p_one_sided_negative = 1.0; // P(rho this negative | independence)
};

inline SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 3)
        throw std::domain_error("spearman: bad inputs");
    const std::vector<double> rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    SpearmanResult res;
    res.rho = sxy / std::sqrt(sxx * syy);
    const double z = res.rho * std::sqrt(n - 1.0);
    res.p_one_sided_negative = bbmlab::normal_cdf(z);
    return res;
}

inline double mean_of(std::span<const double> xs) {
    double m = 0.0;
    for (double x : xs)
        m += x;
    return m / static_cast<double>(xs.size());
}

inline double std_error_of(std::span<const double> xs) {
    const double m = mean_of(xs);
    double ss = 0.0;
    for (double x : xs)
        ss += (x - m) * (x - m);
    return std::sqrt(ss / (static_cast<double>(xs.size()) - 1.0) /
                     static_cast<double>(xs.size()));
}

// Poisson pmf vector over {0,...,kmax} plus the upper tail folded into the
// last slot.
inline std::vector<double> poisson_pmf_binned(double mean, std::size_t kmax) {
    std::vector<double> pmf(kmax + 2, 0.0);
    double p = std::exp(-mean);
    double cum = 0.0;
    for (std::size_t k = 0; k <= kmax; ++k) {
        pmf[k] = p;
        cum += p;
        p *= mean / static_cast<double>(k + 1);
    }
    pmf[kmax + 1] = std::max(0.0, 1.0 - cum);
    return pmf;
}

} // namespace teststats
