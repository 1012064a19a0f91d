#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "test_support.hpp"

using namespace drsim;

namespace {

Problem three_nodes() {
    FeederModel f({1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}, {0.0, 0.0, 0.0});
    ResponseModel r{{2.0, 1.0, 0.5}, {0.1, 0.2, 0.3}, 1.0, ResponseFamily::gaussian};
    return Problem{f, TariffParams{}, DreTarget{3.0, 0, 0}, r, ObjectiveParams{}};
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    return d;
}

}  // namespace

TEST(MeanResponse, ZeroAdjustmentGivesFullFlexibility) {
    const Problem p = three_nodes();
    EXPECT_EQ(mean_response(p.response, p.feeder, Vector(3, 0.0)), p.feeder.delta());
}

TEST(MeanResponse, LinearLaw) {
    FeederModel f({1.0}, {1.0}, {1.0}, {0.0});
    ResponseModel r{{2.0}, {0.1}, 1.0, ResponseFamily::gaussian};
    EXPECT_DOUBLE_EQ(mean_response(r, f, Vector{0.25})[0], 0.5);
    EXPECT_DOUBLE_EQ(mean_response(r, f, Vector{0.5})[0], 0.0);  // x = delta / beta exhausts flexibility
}

TEST(StdResponse, BaselineAtZeroAndNoDecayWithZeroZeta) {
    Problem p = three_nodes();
    EXPECT_EQ(std_response(p.response, Vector(3, 0.0)), p.response.sigma0);
    p.response.zeta = 0.0;
    EXPECT_EQ(std_response(p.response, Vector{0.3, 0.7, 1.0}), p.response.sigma0);
}

TEST(StdResponse, NonIncreasingInPrice) {
    const Problem p = three_nodes();
    for (int k = 0; k < 100; ++k) {
        const double x = k / 100.0;
        const Vector lo = std_response(p.response, Vector(3, x));
        const Vector hi = std_response(p.response, Vector(3, x + 0.01));
        for (std::size_t n = 0; n < 3; ++n) EXPECT_LE(hi[n], lo[n]);
    }
}

TEST(StdResponse, DeterministicFamilyHasNoSpread) {
    Problem p = three_nodes();
    p.response.family = ResponseFamily::deterministic;
    EXPECT_EQ(std_response(p.response, Vector(3, 0.2)), Vector(3, 0.0));
}

TEST(SampleResponse, DeterministicFamilyReturnsMean) {
    Problem p = three_nodes();
    p.response.family = ResponseFamily::deterministic;
    CounterStream s(1);
    const Vector x{0.1, 0.2, 0.3};
    EXPECT_EQ(sample_response(p.response, p.feeder, x, s), mean_response(p.response, p.feeder, x));
}

TEST(SampleResponse, SameStreamStateSameDraw) {
    const Problem p = three_nodes();
    const CounterStream base = substream(42, 3, 7);
    CounterStream a = base, b = base;
    const Vector x{0.1, 0.2, 0.3};
    EXPECT_EQ(sample_response(p.response, p.feeder, x, a), sample_response(p.response, p.feeder, x, b));
    CounterStream c = substream(42, 3, 8);
    EXPECT_NE(sample_response(p.response, p.feeder, x, a), sample_response(p.response, p.feeder, x, c));
}

TEST(SampleResponse, EmpiricalMeanWithinFourSigma) {
    const Problem p = three_nodes();
    const Vector x{0.2, 0.5, 0.9};
    const Vector mu = mean_response(p.response, p.feeder, x);
    const Vector sigma = std_response(p.response, x);
    const std::size_t M = 100000;
    Vector mean(3, 0.0);
    CounterStream s(5);
    for (std::size_t k = 0; k < M; ++k) {
        const Vector w = sample_response(p.response, p.feeder, x, s);
        for (std::size_t n = 0; n < 3; ++n) mean[n] += w[n] / M;
    }
    for (std::size_t n = 0; n < 3; ++n) EXPECT_NEAR(mean[n], mu[n], 4.0 * sigma[n] / std::sqrt(double(M)));
}

TEST(SampleResponse, SampleMeanErrorShrinksWithSampleSize) {
    // Average |mean - mu| over 40 independent nodes so a single unlucky node
    // cannot break the ordering.
    const std::size_t N = 40;
    FeederModel f(Vector(N, 1.0), Vector(N, 1.0), Vector(N, 2.0), Vector(N, 0.0));
    ResponseModel r{Vector(N, 1.0), Vector(N, 0.5), 1.0, ResponseFamily::gaussian};
    const Vector x(N, 0.3);
    const Vector mu = mean_response(r, f, x);
    std::vector<double> errors;
    for (std::size_t M : {1000u, 10000u, 100000u}) {
        Vector mean(N, 0.0);
        CounterStream s(1234 + M);
        for (std::size_t k = 0; k < M; ++k) {
            const Vector w = sample_response(r, f, x, s);
            for (std::size_t n = 0; n < N; ++n) mean[n] += w[n] / M;
        }
        errors.push_back(distance(mean, mu) / std::sqrt(double(N)));
    }
    EXPECT_GT(errors[0], errors[1]);
    EXPECT_GT(errors[1], errors[2]);
}

TEST(SampleResponse, LocationScaleResidualIsPriceIndependentWithoutDecay) {
    Problem p = three_nodes();
    p.response.zeta = 0.0;
    const Vector xa{0.0, 0.0, 0.0}, xb{0.4, 0.9, 1.0};
    const Vector ma = mean_response(p.response, p.feeder, xa), mb = mean_response(p.response, p.feeder, xb);
    std::vector<double> ra, rb;
    CounterStream sa(17), sb(18);
    const std::size_t M = 5000;
    for (std::size_t k = 0; k < M; ++k) {
        ra.push_back(sample_response(p.response, p.feeder, xa, sa)[1] - ma[1]);
        rb.push_back(sample_response(p.response, p.feeder, xb, sb)[1] - mb[1]);
    }
    const double critical = 1.628 * std::sqrt(2.0 / M);  // two-sample KS, alpha = 0.01
    EXPECT_LT(ks_statistic(ra, rb), critical);
}

TEST(SampleResponse, TruncatedDrawsStayInSupport) {
    Problem p = three_nodes();
    p.response.family = ResponseFamily::truncated_gaussian;
    p.response.sigma0 = {1.0, 1.0, 1.0};
    CounterStream s(3);
    for (int k = 0; k < 2000; ++k) {
        const Vector w = sample_response(p.response, p.feeder, Vector{0.45, 1.0, 0.0}, s);
        for (std::size_t n = 0; n < 3; ++n) {
            EXPECT_GE(w[n], 0.0);
            EXPECT_LE(w[n], p.feeder.delta()[n]);
        }
    }
}

TEST(SampleResponse, TruncatedStandardNormalMatchesExactMean) {
    const auto pdf = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); };
    const auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
    // Straddling, narrow, one-sided tail, far tail and left-side windows.
    const std::vector<std::pair<double, double>> windows{{-1.0, 2.0}, {-0.1, 0.2},  {1.5, 2.0}, {3.0, 9.0},
                                                         {6.0, 6.3},  {-4.0, -2.5}, {-0.3, -0.1}};
    const std::size_t M = 40000;
    for (const auto& [a, b] : windows) {
        const double mass = cdf(b) - cdf(a);
        const double mean = (pdf(a) - pdf(b)) / mass;
        const double var = 1.0 + (a * pdf(a) - b * pdf(b)) / mass - mean * mean;
        CounterStream s(21);
        double sum = 0.0;
        for (std::size_t k = 0; k < M; ++k) {
            const double z = detail::sample_standard_truncated(a, b, s);
            ASSERT_GE(z, a);
            ASSERT_LE(z, b);
            sum += z;
        }
        EXPECT_NEAR(sum / M, mean, 4.0 * std::sqrt(var / M)) << "[" << a << ", " << b << "]";
    }
}

TEST(SampleResponse, WindowFarInTailStaysCheap) {
    // Roughly 74 standard deviations above the mean; the exponential proposal
    // concentrates near a + 1/a.
    CounterStream s(5);
    double sum = 0.0;
    for (int k = 0; k < 10000; ++k) {
        const double z = detail::sample_standard_truncated(74.0, 148.0, s);
        ASSERT_GE(z, 74.0);
        sum += z;
    }
    EXPECT_NEAR(sum / 10000, 74.0 + 1.0 / 74.0, 2e-3);
}

TEST(AbsDeviationBound, OneNodeClosedForm) {
    const Problem p = testing_support::one_node();
    const double bound = abs_deviation_bound(p.response, p.feeder, p.tariff);
    EXPECT_NEAR(bound, 0.07978845608028655, 1e-15);

    // Monte Carlo cross-check of sqrt(2/pi) sigma with 10^6 samples at x = x_min.
    const std::size_t M = 1000000;
    CounterStream s(77);
    double mad = 0.0;
    const double mu = mean_response(p.response, p.feeder, Vector{0.0})[0];
    for (std::size_t k = 0; k < M; ++k) mad += std::abs(sample_response(p.response, p.feeder, Vector{0.0}, s)[0] - mu);
    mad /= M;
    const double sd_of_mad = 0.1 * std::sqrt(1.0 - 2.0 / std::numbers::pi) / std::sqrt(double(M));
    EXPECT_NEAR(mad, bound, 4.0 * sd_of_mad);
}

TEST(AbsDeviationBound, DeterministicIsZero) {
    Problem p = three_nodes();
    p.response.family = ResponseFamily::deterministic;
    EXPECT_EQ(abs_deviation_bound(p.response, p.feeder, p.tariff), 0.0);
}

TEST(AbsDeviationBound, DominatesEmpiricalDeviationOnGrid) {
    for (auto family : {ResponseFamily::gaussian, ResponseFamily::truncated_gaussian}) {
        Problem p = three_nodes();
        p.response.family = family;
        const double bound = abs_deviation_bound(p.response, p.feeder, p.tariff);
        for (double level : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const Vector x(3, level);
            const std::size_t M = 100000;
            std::vector<double> xi(M);
            CounterStream s(100 + static_cast<int>(level * 8));
            double mean = 0.0;
            for (std::size_t k = 0; k < M; ++k) {
                xi[k] = aggregate_power(p.feeder, p.feeder.d_hat(), sample_response(p.response, p.feeder, x, s));
                mean += xi[k] / M;
            }
            double mad = 0.0;
            for (double v : xi) mad += std::abs(v - mean) / M;
            EXPECT_LE(mad, bound) << to_string(family) << " at x = " << level;
        }
    }
}

TEST(ResponseModel, MeanNonnegativeCheck) {
    const Problem p = three_nodes();  // delta / beta = 0.5, 2, 6
    TariffParams t;
    t.x_max = 0.5;
    EXPECT_TRUE(mean_nonnegative_on_box(p.response, p.feeder, t));
    t.x_max = 0.6;
    EXPECT_FALSE(mean_nonnegative_on_box(p.response, p.feeder, t));
}

TEST(ResponseModel, ValidationRejectsBadParameters) {
    ResponseModel r{{0.0}, {0.1}, 1.0, ResponseFamily::gaussian};
    EXPECT_THROW(r.validate(1), ValidationError);
    r.beta = {1.0};
    r.sigma0 = {-0.1};
    EXPECT_THROW(r.validate(1), ValidationError);
    r.sigma0 = {0.1};
    r.zeta = -1.0;
    EXPECT_THROW(r.validate(1), ValidationError);
    r.zeta = 1.0;
    EXPECT_THROW(r.validate(2), SchemaError);
    EXPECT_THROW(parse_response_family("cauchy"), ConfigError);
    EXPECT_EQ(parse_response_family("truncated_gaussian"), ResponseFamily::truncated_gaussian);
}
