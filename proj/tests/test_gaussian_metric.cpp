#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <utility>
#include <vector>

#include "doctest.h"
#include "promet/errors.hpp"
#include "promet/gaussian_metric.hpp"
#include "promet/rng.hpp"

using namespace promet;

namespace {

GaussianEmbedding g1d(double mu, double var) { return {{mu}, {var}}; }

GaussianEmbedding random_gaussian(int d, Rng& rng) {
    GaussianEmbedding g;
    for (int i = 0; i < d; ++i) {
        g.mu.push_back(rng.uniform(-3, 3));
        g.var.push_back(rng.uniform(kVarianceFloor, 4));
    }
    return g;
}

// Numerical-integration oracle for one-dimensional KL: Simpson's rule over
// a wide interval around p0's mass.
double kl_integral_1d(double mu0, double var0, double mu1, double var1) {
    auto log_pdf = [](double x, double mu, double var) {
        return -0.5 * std::log(2 * M_PI * var) - (x - mu) * (x - mu) / (2 * var);
    };
    double half = 14 * std::sqrt(var0) + std::abs(mu1 - mu0);
    double lo = mu0 - half, hi = mu0 + half;
    int n = 40000;
    double h = (hi - lo) / n;
    double acc = 0;
    for (int i = 0; i <= n; ++i) {
        double x = lo + i * h;
        double lp0 = log_pdf(x, mu0, var0);
        double f = std::exp(lp0) * (lp0 - log_pdf(x, mu1, var1));
        double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
        acc += w * f;
    }
    return acc * h / 3;
}

HeadParams random_heads(int in, int d, std::uint64_t seed) {
    HeadParams hp(in, d);
    Rng rng(seed);
    for (double& v : hp.w_mu.data) v = rng.uniform(-0.7, 0.7);
    for (double& v : hp.w_var.data) v = rng.uniform(-0.7, 0.7);
    for (double& v : hp.b_mu) v = rng.uniform(-0.3, 0.3);
    for (double& v : hp.b_var) v = rng.uniform(-0.3, 0.3);
    return hp;
}

}  // namespace

TEST_CASE("zero heads give zero mean and softplus-of-zero variance") {
    HeadParams hp(3, 2);
    std::vector<double> h{0.4, -0.2, 1.0};
    GaussianEmbedding g = project(hp, h);
    for (double m : g.mu) CHECK(m == 0.0);
    for (double v : g.var) CHECK(v == doctest::Approx(std::log(2.0) + kVarianceFloor));
}

TEST_CASE("projected variance stays above the floor") {
    HeadParams hp = random_heads(4, 3, 1);
    Rng rng(2);
    for (int it = 0; it < 1000; ++it) {
        std::vector<double> h{rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50),
                              rng.uniform(-50, 50)};
        GaussianEmbedding g = project(hp, h);
        for (double v : g.var) {
            CHECK(v >= kVarianceFloor);
            CHECK(std::isfinite(v));
        }
    }
}

TEST_CASE("project rejects bad input") {
    HeadParams hp(3, 2);
    std::vector<double> short_h{1.0, 2.0};
    CHECK_THROWS_AS(project(hp, short_h), DataError);
    std::vector<double> bad{1.0, std::nan(""), 0.0};
    CHECK_THROWS_AS(project(hp, bad), NumericError);
}

TEST_CASE("kl closed-form anchors") {
    CHECK(kl(g1d(0, 1), g1d(0, 1)) == 0.0);
    CHECK(kl(g1d(0, 1), g1d(1, 1)) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(kl(g1d(0, 1), g1d(0, 2)) == doctest::Approx(0.5 * (std::log(2.0) - 0.5)));
    CHECK(kl(g1d(0, 2), g1d(0, 1)) == doctest::Approx(0.5 * (1.0 - std::log(2.0))));
}

TEST_CASE("kl is asymmetric for unequal variances") {
    CHECK(kl(g1d(0, 1), g1d(0, 2)) != kl(g1d(0, 2), g1d(0, 1)));
}

TEST_CASE("kl adds over dimensions") {
    GaussianEmbedding a{{0, 0}, {1, 2}};
    GaussianEmbedding b{{1, 0}, {1, 1}};
    CHECK(kl(a, b) ==
          doctest::Approx(kl(g1d(0, 1), g1d(1, 1)) + kl(g1d(0, 2), g1d(0, 1))));
}

TEST_CASE("kl rejects dimension mismatch") {
    GaussianEmbedding a{{0}, {1}};
    GaussianEmbedding b{{0, 0}, {1, 1}};
    CHECK_THROWS_AS(kl(a, b), DataError);
}

TEST_CASE("kl is nonnegative and zero only at identity over random pairs") {
    Rng rng(3);
    for (int it = 0; it < 10000; ++it) {
        GaussianEmbedding a = random_gaussian(4, rng);
        GaussianEmbedding b = random_gaussian(4, rng);
        double d = kl(a, b);
        CHECK(d >= 0.0);
        CHECK(kl(a, a) == 0.0);
    }
}

TEST_CASE("closed form matches numerical integration") {
    Rng rng(4);
    for (int it = 0; it < 50; ++it) {
        double mu0 = rng.uniform(-2, 2), mu1 = rng.uniform(-2, 2);
        double var0 = rng.uniform(0.25, 3), var1 = rng.uniform(0.25, 3);
        double closed = kl(g1d(mu0, var0), g1d(mu1, var1));
        double numeric = kl_integral_1d(mu0, var0, mu1, var1);
        CHECK(std::abs(closed - numeric) <= 1e-6);
    }
}

TEST_CASE("js distance symmetrizes kl") {
    GaussianEmbedding a = g1d(0, 1), b = g1d(0, 2);
    CHECK(js_distance(a, b) == doctest::Approx(0.5 * (kl(a, b) + kl(b, a))));
    CHECK(js_distance(a, b) == js_distance(b, a));
    CHECK(js_distance(a, a) == 0.0);
    // The log terms cancel: mu gap 0, vars 1 and 2 give 0.25*(0.5 + 2 - 2).
    CHECK(js_distance(a, b) == doctest::Approx(0.125));
    CHECK(js_distance(g1d(0, 1), g1d(1, 1)) == doctest::Approx(0.5));
}

TEST_CASE("similarity is exp of negative distance") {
    GaussianEmbedding a = g1d(0, 1), b = g1d(1, 1);
    CHECK(similarity(a, a) == 1.0);
    CHECK(similarity(a, b) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    Rng rng(5);
    for (int it = 0; it < 1000; ++it) {
        GaussianEmbedding x = random_gaussian(3, rng);
        GaussianEmbedding y = random_gaussian(3, rng);
        double s = similarity(x, y);
        CHECK(s > 0.0);
        CHECK(s <= 1.0);
    }
}

TEST_CASE("token loss against one positive and one negative support") {
    GaussianEmbedding q = g1d(0, 1);
    std::vector<std::pair<GaussianEmbedding, LabelId>> support{
        {g1d(1, 1), 1},  // similarity exp(-0.5)
        {g1d(2, 1), 2},  // similarity exp(-2)
    };
    auto loss = token_loss(q, 1, support);
    REQUIRE(loss.has_value());
    // -ln( e^{-1/2} / (e^{-1/2} + e^{-2}) ) = ln(1 + e^{-3/2})
    CHECK(*loss == doctest::Approx(std::log1p(std::exp(-1.5))).epsilon(1e-12));
    CHECK(*loss == doctest::Approx(0.2014).epsilon(1e-3));
}

TEST_CASE("token loss over n identical positives is ln n") {
    GaussianEmbedding q = g1d(0, 1);
    for (int n = 1; n <= 5; ++n) {
        std::vector<std::pair<GaussianEmbedding, LabelId>> support(
            n, {g1d(0.5, 1.2), 1});
        auto loss = token_loss(q, 1, support);
        REQUIRE(loss.has_value());
        CHECK(*loss == doctest::Approx(std::log(static_cast<double>(n))).epsilon(1e-12));
    }
}

TEST_CASE("token loss skips when no support shares the label") {
    GaussianEmbedding q = g1d(0, 1);
    std::vector<std::pair<GaussianEmbedding, LabelId>> support{{g1d(1, 1), 2}};
    CHECK_FALSE(token_loss(q, 1, support).has_value());
    CHECK_THROWS_AS(token_loss(q, 1, {}), DataError);
}

TEST_CASE("the O label contrasts like any other label") {
    GaussianEmbedding q = g1d(0, 1);
    std::vector<std::pair<GaussianEmbedding, LabelId>> support{{g1d(0, 1), 0}, {g1d(3, 1), 1}};
    auto loss = token_loss(q, 0, support);
    REQUIRE(loss.has_value());
    CHECK(*loss >= 0.0);
}

TEST_CASE("token loss is nonnegative over random fixtures") {
    Rng rng(6);
    for (int it = 0; it < 10000; ++it) {
        GaussianEmbedding q = random_gaussian(3, rng);
        LabelId q_label = static_cast<LabelId>(rng.index(3));
        std::vector<std::pair<GaussianEmbedding, LabelId>> support;
        int n = 1 + static_cast<int>(rng.index(5));
        for (int i = 0; i < n; ++i) {
            support.emplace_back(random_gaussian(3, rng), static_cast<LabelId>(rng.index(3)));
        }
        support.emplace_back(random_gaussian(3, rng), q_label);
        auto loss = token_loss(q, q_label, support);
        REQUIRE(loss.has_value());
        CHECK(*loss >= 0.0);
    }
}

TEST_CASE("batch loss averages the non-skipped tokens") {
    // Losses ln(1+e^{-2}) and ln 2, plus one skipped token.
    std::vector<std::pair<GaussianEmbedding, LabelId>> support{{g1d(0, 1), 1}, {g1d(2, 1), 2}};
    std::vector<std::pair<GaussianEmbedding, LabelId>> queries{
        {g1d(0, 1), 1},
        {g1d(1, 1), 2},
        {g1d(0, 1), 3},  // no label-3 support: skipped
    };
    double expected = 0.5 * (std::log1p(std::exp(-2.0)) + std::log(2.0));
    CHECK(batch_loss(queries, support) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("batch loss with only skipped tokens is an error") {
    std::vector<std::pair<GaussianEmbedding, LabelId>> support{{g1d(0, 1), 1}};
    std::vector<std::pair<GaussianEmbedding, LabelId>> queries{{g1d(0, 1), 2}};
    CHECK_THROWS_AS(batch_loss(queries, support), DataError);
}

TEST_CASE("projection gradients match finite differences") {
    const int in = 3, d = 2;
    HeadParams hp = random_heads(in, d, 7);
    std::vector<double> h{0.3, -0.8, 0.5};
    Rng rng(8);
    std::vector<double> d_mu{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    std::vector<double> d_var{rng.uniform(-1, 1), rng.uniform(-1, 1)};

    auto scalar = [&](const HeadParams& params, const std::vector<double>& input) {
        GaussianEmbedding g = project(params, input);
        double s = 0;
        for (int i = 0; i < d; ++i) s += d_mu[i] * g.mu[i] + d_var[i] * g.var[i];
        return s;
    };

    ProjectTrace trace;
    project_traced(hp, h, trace);
    HeadParams grads = zeros_like(hp);
    std::vector<double> d_h(in, 0.0);
    project_backward(hp, h, trace, d_mu, d_var, grads, d_h);

    const double step = 1e-6;
    auto check = [&](double* param, const double* grad, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            double keep = param[i];
            param[i] = keep + step;
            double up = scalar(hp, h);
            param[i] = keep - step;
            double down = scalar(hp, h);
            param[i] = keep;
            double numeric = (up - down) / (2 * step);
            double denom = std::max({1e-6, std::abs(numeric), std::abs(grad[i])});
            CHECK(std::abs(numeric - grad[i]) / denom <= 1e-5);
        }
    };
    check(hp.w_mu.data.data(), grads.w_mu.data.data(), hp.w_mu.data.size());
    check(hp.w_var.data.data(), grads.w_var.data.data(), hp.w_var.data.size());
    check(hp.b_mu.data(), grads.b_mu.data(), hp.b_mu.size());
    check(hp.b_var.data(), grads.b_var.data(), hp.b_var.size());

    for (int i = 0; i < in; ++i) {
        std::vector<double> hp_in = h;
        hp_in[i] += step;
        double up = scalar(hp, hp_in);
        hp_in[i] = h[i] - step;
        double down = scalar(hp, hp_in);
        double numeric = (up - down) / (2 * step);
        double denom = std::max({1e-6, std::abs(numeric), std::abs(d_h[i])});
        CHECK(std::abs(numeric - d_h[i]) / denom <= 1e-5);
    }
}

TEST_CASE("js gradients match finite differences") {
    Rng rng(9);
    for (int it = 0; it < 20; ++it) {
        GaussianEmbedding a = random_gaussian(3, rng);
        GaussianEmbedding b = random_gaussian(3, rng);
        GaussianEmbedding d_a{{0, 0, 0}, {0, 0, 0}};
        GaussianEmbedding d_b{{0, 0, 0}, {0, 0, 0}};
        js_distance_backward(a, b, 1.0, d_a, d_b);

        const double step = 1e-6;
        auto check_vec = [&](std::vector<double>& v, const std::vector<double>& grad) {
            for (int i = 0; i < 3; ++i) {
                double keep = v[i];
                v[i] = keep + step;
                double up = js_distance(a, b);
                v[i] = keep - step;
                double down = js_distance(a, b);
                v[i] = keep;
                double numeric = (up - down) / (2 * step);
                double denom = std::max({1e-6, std::abs(numeric), std::abs(grad[i])});
                CHECK(std::abs(numeric - grad[i]) / denom <= 1e-5);
            }
        };
        check_vec(a.mu, d_a.mu);
        check_vec(a.var, d_a.var);
        check_vec(b.mu, d_b.mu);
        check_vec(b.var, d_b.var);
    }
}
