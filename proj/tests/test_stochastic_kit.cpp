#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "bbmlab/constants.hpp"
#include "bbmlab/rng.hpp"
#include "bbmlab/stochastic_kit.hpp"
#include "support/test_stats.hpp"

using namespace bbmlab;

TEST_SUITE_BEGIN("stochastic_kit");

TEST_CASE("rng reproducibility and stream separation") {
    RngStream a(42, 7), b(42, 7), c(42, 8);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    // Distinct streams should not track each other.
    RngStream a2(42, 7);
    int equal = 0;
    for (int i = 0; i < 100; ++i)
        equal += a2.next_u64() == c.next_u64() ? 1 : 0;
    CHECK(equal == 0);

    // split is deterministic and independent of the parent's position.
    RngStream parent(1, 2);
    RngStream child1 = parent.split(5);
    parent.next_u64();
    RngStream child2 = parent.split(5);
    CHECK(child1.next_u64() == child2.next_u64());
}

TEST_CASE("rng uniform and normal moments") {
    RngStream rng(123, 0);
    const int n = 100000;
    double su = 0, suu = 0, sn = 0, snn = 0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        const double z = rng.normal();
        su += u;
        suu += u * u;
        sn += z;
        snn += z * z;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(suu / n == doctest::Approx(1.0 / 3.0).epsilon(0.02));
    CHECK(std::abs(sn / n) < 3.5 / std::sqrt(static_cast<double>(n)));
    CHECK(snn / n == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("rng cross-stream correlation is negligible") {
    RngStream a(9, 1), b(9, 2);
    const int n = 20000;
    double sxy = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
        const double x = a.uniform01(), y = b.uniform01();
        sx += x;
        sy += y;
        sxy += x * y;
        sxx += x * x;
        syy += y * y;
    }
    const double cov = sxy / n - (sx / n) * (sy / n);
    const double corr = cov / std::sqrt((sxx / n - sx / n * sx / n) *
                                        (syy / n - sy / n * sy / n));
    CHECK(std::abs(corr) < 0.05);
}

TEST_CASE("log_sum_exp basics") {
    CHECK(log_sum_exp(std::vector<double>{0.0}) == doctest::Approx(0.0));
    const double a = -1000.0;
    CHECK(log_sum_exp(std::vector<double>{a, a}) ==
          doctest::Approx(a + std::log(2.0)).epsilon(1e-14));
    CHECK_THROWS_AS(log_sum_exp(std::vector<double>{}), std::domain_error);
}

TEST_CASE("log_sum_exp matches the direct sum on small inputs") {
    RngStream rng(7, 0);
    std::vector<double> v(50);
    for (auto& x : v)
        x = -5.0 + 10.0 * rng.uniform01();
    double direct = 0.0;
    for (double x : v)
        direct += std::exp(x);
    const double expected = std::log(direct);
    CHECK(std::abs(log_sum_exp(v) - expected) <= 1e-12 * std::abs(expected) + 1e-14);
}

TEST_CASE("log_sum_exp shift invariance") {
    RngStream rng(8, 0);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform01() * 40);
        std::vector<double> v(n);
        for (auto& x : v)
            x = -50.0 + 100.0 * rng.uniform01();
        const double c = -200.0 + 400.0 * rng.uniform01();
        std::vector<double> shifted(v);
        for (auto& x : shifted)
            x += c;
        const double lhs = log_sum_exp(shifted);
        const double rhs = log_sum_exp(v) + c;
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
    }
}

TEST_CASE("ppp exponential atom counts") {
    RngStream rng(11, 0);
    const int n = 20000;
    double count0 = 0.0;
    for (int i = 0; i < n; ++i)
        count0 += static_cast<double>(sample_ppp_exponential(0.0, rng).size());
    const double mean0 = count0 / n;
    const double expect0 = 1.0 / std::numbers::sqrt2;
    // Poisson: sd = sqrt(mean / n).
    CHECK(std::abs(mean0 - expect0) < 3.0 * std::sqrt(expect0 / n));

    const int n3 = 3000;
    double count3 = 0.0;
    for (int i = 0; i < n3; ++i)
        count3 += static_cast<double>(sample_ppp_exponential(-3.0, rng).size());
    const double mean3 = count3 / n3;
    const double expect3 = std::exp(3.0 * std::numbers::sqrt2) / std::numbers::sqrt2;
    CHECK(std::abs(mean3 - expect3) < 3.0 * std::sqrt(expect3 / n3));
}

TEST_CASE("ppp exponential maximum follows the Gumbel curve") {
    RngStream rng(12, 0);
    std::vector<double> maxima;
    maxima.reserve(10000);
    for (int i = 0; i < 10000; ++i) {
        const auto sample = sample_ppp_exponential(-3.0, rng);
        REQUIRE(!sample.empty());
        CHECK(sample.sorted_nonincreasing);
        maxima.push_back(sample.atoms.front().location);
    }
    const auto ks = teststats::ks_test(maxima, [](double x) {
        return std::exp(-std::exp(-std::numbers::sqrt2 * x) / std::numbers::sqrt2);
    });
    CHECK(ks.p_value > 0.01);
}

TEST_CASE("ppp exponential interval counts: Poisson fit and independence") {
    RngStream rng(13, 0);
    const int n = 10000;
    // Disjoint intervals [0,1) and [1,2) for atoms above lower=0.
    const double sqrt2 = std::numbers::sqrt2;
    auto interval_mean = [&](double a, double b) {
        return (std::exp(-sqrt2 * a) - std::exp(-sqrt2 * b)) / sqrt2;
    };
    std::vector<std::uint64_t> c1(n), c2(n);
    for (int i = 0; i < n; ++i) {
        const auto sample = sample_ppp_exponential(0.0, rng);
        std::uint64_t a = 0, b = 0;
        for (const auto& atom : sample.atoms) {
            if (atom.location < 1.0)
                ++a;
            else if (atom.location < 2.0)
                ++b;
        }
        c1[i] = a;
        c2[i] = b;
    }
    // Correlation between disjoint interval counts.
    double m1 = 0, m2 = 0;
    for (int i = 0; i < n; ++i) {
        m1 += static_cast<double>(c1[i]);
        m2 += static_cast<double>(c2[i]);
    }
    m1 /= n;
    m2 /= n;
    double s11 = 0, s22 = 0, s12 = 0;
    for (int i = 0; i < n; ++i) {
        const double d1 = static_cast<double>(c1[i]) - m1;
        const double d2 = static_cast<double>(c2[i]) - m2;
        s11 += d1 * d1;
        s22 += d2 * d2;
        s12 += d1 * d2;
    }
    CHECK(std::abs(s12 / std::sqrt(s11 * s22)) < 0.05);

    // Chi-square Poisson GOF on the [0,1) counts.
    const double mu = interval_mean(0.0, 1.0);
    const std::size_t kmax = 6;
    std::vector<std::uint64_t> hist(kmax + 2, 0);
    for (int i = 0; i < n; ++i)
        ++hist[std::min<std::uint64_t>(c1[i], kmax + 1)];
    const auto pmf = teststats::poisson_pmf_binned(mu, kmax);
    CHECK(teststats::chi2_gof_pvalue(hist, pmf, n) > 0.01);
}

TEST_CASE("bessel3 path basics") {
    RngStream rng(21, 0);
    CHECK_THROWS_AS(sample_bessel3_path(1.0, 0.0, rng), std::domain_error);
    CHECK_THROWS_AS(sample_bessel3_path(1.0, 2.0, rng), std::domain_error);

    const int n = 10000;
    double sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto path = sample_bessel3_path(1.0, 0.125, rng);
        CHECK(path.front().second == 0.0);
        for (const auto& [t, r] : path)
            CHECK(r >= 0.0);
        sum_sq += path.back().second * path.back().second;
    }
    // E|B_1|^2 = 3.
    CHECK(sum_sq / n == doctest::Approx(3.0).epsilon(0.04));
}

TEST_CASE("bessel3 rarely dominates t^0.6 over a long window") {
    RngStream rng(22, 0);
    const int n = 800;
    int dominating = 0;
    for (int i = 0; i < n; ++i) {
        const auto path = sample_bessel3_path(1000.0, 0.5, rng);
        bool above = true;
        for (const auto& [t, r] : path) {
            if (t < 100.0)
                continue;
            if (r <= std::pow(t, 0.6)) {
                above = false;
                break;
            }
        }
        dominating += above ? 1 : 0;
    }
    CHECK(static_cast<double>(dominating) / n < 0.05);
}

TEST_CASE("bessel3 transition matches the noncentral radial law") {
    // PIT of R_{t+h} given R_t against the |N(r e1, h I3)| radial CDF.
    RngStream rng(23, 0);
    const double t = 1.0, h = 0.5;
    auto cdf = [&](double x, double r) {
        const double sh = std::sqrt(h);
        const double phi_term = normal_cdf((x - r) / sh) - normal_cdf(-(x + r) / sh);
        const double gauss = (std::exp(-(x - r) * (x - r) / (2 * h)) -
                              std::exp(-(x + r) * (x + r) / (2 * h)));
        return phi_term - sh / (r * std::sqrt(2.0 * std::numbers::pi)) * gauss;
    };
    std::vector<double> pit;
    for (int i = 0; i < 4000; ++i) {
        const auto path = sample_bessel3_path(t + h, h / 2.0, rng);
        const double r = path[4].second; // R at time t
        const double x = path[6].second; // R at time t + h
        pit.push_back(cdf(x, r));
    }
    const auto ks = teststats::ks_test(pit, [](double u) { return std::clamp(u, 0.0, 1.0); });
    CHECK(ks.p_value > 0.01);
}

TEST_CASE("gumbel_max_sample frequencies") {
    RngStream rng(31, 0);
    CHECK_THROWS_AS(gumbel_max_sample(std::vector<double>{}, rng), std::domain_error);

    int first = 0;
    const int n = 10000;
    const std::vector<double> even{0.0, 0.0};
    for (int i = 0; i < n; ++i)
        first += gumbel_max_sample(even, rng) == 0 ? 1 : 0;
    CHECK(static_cast<double>(first) / n == doctest::Approx(0.5).epsilon(0.04));

    const std::vector<double> skew{0.0, std::log(3.0)};
    int hi = 0;
    for (int i = 0; i < n; ++i)
        hi += gumbel_max_sample(skew, rng) == 1 ? 1 : 0;
    CHECK(static_cast<double>(hi) / n == doctest::Approx(0.75).epsilon(0.03));
}

TEST_CASE("gumbel_max_sample chi-square against exact probabilities") {
    RngStream rng(32, 0);
    std::vector<double> w(10);
    for (auto& x : w)
        x = 2.0 * rng.normal();
    std::vector<double> p(w.size());
    double z = 0.0;
    const double mx = *std::max_element(w.begin(), w.end());
    for (std::size_t i = 0; i < w.size(); ++i)
        z += std::exp(w[i] - mx);
    for (std::size_t i = 0; i < w.size(); ++i)
        p[i] = std::exp(w[i] - mx) / z;
    const int n = 100000;
    std::vector<std::uint64_t> counts(w.size(), 0);
    for (int i = 0; i < n; ++i)
        ++counts[gumbel_max_sample(w, rng)];
    CHECK(teststats::chi2_gof_pvalue(counts, p, n) > 0.01);
}

TEST_CASE("gumbel_max_sample is shift invariant with shared seeds") {
    std::vector<double> w{0.3, -1.2, 2.0, 0.0, -0.4};
    std::vector<double> shifted(w);
    for (auto& x : shifted)
        x += 17.25;
    RngStream a(5, 5), b(5, 5);
    for (int i = 0; i < 5000; ++i)
        CHECK(gumbel_max_sample(w, a) == gumbel_max_sample(shifted, b));
}

TEST_CASE("gaussian truncated exponential moment") {
    CHECK(gaussian_truncated_exp_moment(0.0, 0.7) == doctest::Approx(normal_cdf(0.7)));
    // Appendix bound instance.
    CHECK(gaussian_truncated_exp_moment(2.0, 1.0) <= std::exp(1.5));

    // Monte Carlo oracle at lambda = 1.5, x = 0.7.
    RngStream rng(41, 0);
    const int n = 1000000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.normal();
        const double v = g <= 0.7 ? std::exp(1.5 * g) : 0.0;
        sum += v;
        sum_sq += v * v;
    }
    const double mc = sum / n;
    const double se = std::sqrt((sum_sq / n - mc * mc) / n);
    CHECK(std::abs(gaussian_truncated_exp_moment(1.5, 0.7) - mc) < 3.0 * se);
}

TEST_CASE("gaussian truncated moment satisfies the bound on a grid") {
    for (int i = 1; i <= 50; ++i) {
        for (int j = 1; j <= 50; ++j) {
            const double lambda = 5.0 * i / 50.0;
            const double x = 5.0 * j / 50.0;
            if (lambda > x)
                CHECK(gaussian_truncated_exp_moment(lambda, x) <=
                      std::exp(lambda * x - 0.5 * x * x) * (1.0 + 1e-12));
        }
    }
}

TEST_CASE("log laplace poisson functional") {
    RngStream rng(51, 0);
    auto one = [](double) { return 1.0; };
    auto unit_a = [](double, RngStream&) { return 1.0; };
    std::vector<double> grid;
    for (int i = 0; i <= 100; ++i)
        grid.push_back(i / 100.0);

    CHECK(log_laplace_poisson_functional(one, one, unit_a, 0.0, grid, 1, rng) == 0.0);
    CHECK_THROWS_AS(log_laplace_poisson_functional(one, one, unit_a, -1.0, grid, 1, rng),
                    std::domain_error);

    // f = A = 1, Lebesgue on [0,1], lambda = 1: phi = 1 - e^{-1} and the
    // integrand is constant so the trapezoid is exact.
    CHECK(log_laplace_poisson_functional(one, one, unit_a, 1.0, grid, 1, rng) ==
          doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("log laplace functional vs direct Poisson simulation") {
    RngStream rng(52, 0);
    auto f = [](double t) { return std::exp(-t); };
    auto one = [](double) { return 1.0; };
    auto unit_a = [](double, RngStream&) { return 1.0; };
    std::vector<double> grid;
    for (int i = 0; i <= 1000; ++i)
        grid.push_back(10.0 * i / 1000.0);

    // phi(lambda)/lambda must decrease in lambda (support-of-zero direction).
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {1.0, 10.0, 100.0, 1000.0}) {
        const double phi = log_laplace_poisson_functional(f, one, unit_a, lambda, grid, 1, rng);
        CHECK(phi / lambda < prev);
        prev = phi / lambda;
    }
    CHECK(prev < 0.02);

    // Direct oracle at lambda = 1: simulate S = sum f(t) over PPP(dt) on
    // [0,10] and estimate -log E[e^{-S}].
    const double lambda = 1.0;
    const int n = 200000;
    double acc = 0.0, acc_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double s = 0.0, t = rng.exponential();
        while (t < 10.0) {
            s += f(t);
            t += rng.exponential();
        }
        const double v = std::exp(-lambda * s);
        acc += v;
        acc_sq += v * v;
    }
    const double mean = acc / n;
    const double se = std::sqrt((acc_sq / n - mean * mean) / n);
    const double phi_mc = -std::log(mean);
    const double phi_quad =
        log_laplace_poisson_functional(f, one, unit_a, lambda, grid, 1, rng);
    // Delta method on the log.
    CHECK(std::abs(phi_mc - phi_quad) < 3.0 * se / mean + 1e-3);
}

TEST_SUITE_END();
