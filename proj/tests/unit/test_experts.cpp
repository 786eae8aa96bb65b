#include "doctest.h"

#include <array>
#include <cmath>

#include "cobol/belief.hpp"
#include "cobol/experts.hpp"

using namespace cobol;

TEST_CASE("rho_scale maps the bounds onto [-3, 3]") {
    CHECK(rho_scale(2.0, 2.0, 6.0) == doctest::Approx(-3.0));
    CHECK(rho_scale(6.0, 2.0, 6.0) == doctest::Approx(3.0));
    CHECK(rho_scale(4.0, 2.0, 6.0) == doctest::Approx(0.0));
    CHECK(rho_scale(-10.0, 2.0, 6.0) == doctest::Approx(-3.0));
    CHECK(rho_scale(50.0, 2.0, 6.0) == doctest::Approx(3.0));
    CHECK_THROWS_AS(rho_scale(0.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("synthetic reject probability") {
    SyntheticExpert flat(0.0, 0.0, 1.0, 1);
    CHECK(flat.reject_probability(0.3) == doctest::Approx(0.5));
    SyntheticExpert good(1.0, 0.0, 1.0, 1);
    CHECK(good.reject_probability(0.0) == doctest::Approx(1.0 / (1.0 + std::exp(3.0))));
    CHECK(good.reject_probability(0.0) == doctest::Approx(0.0474).epsilon(1e-2));
    SyntheticExpert bad(-1.0, 0.0, 1.0, 1);
    CHECK(bad.reject_probability(0.0) == doctest::Approx(1.0 - good.reject_probability(0.0)));

    double prev = 1.0;
    for (double a = -3.0; a <= 3.0; a += 0.5) {
        const double p = SyntheticExpert(a, 0.0, 1.0, 0).reject_probability(0.0);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("empirical reject frequency within 3/sqrt(N)") {
    for (double a : {-2.0, 0.5, 2.0}) {
        SyntheticExpert e(a, -1.0, 2.0, 99);
        const double f = 0.1;
        const double p = e.reject_probability(f);
        const int N = 10000;
        int hits = 0;
        for (int i = 0; i < N; ++i) hits += synthetic_label(Vec::Zero(1), f, e);
        CHECK(std::abs(hits / double(N) - p) <= 3.0 / std::sqrt(double(N)));
    }
}

TEST_CASE("same seed same labels") {
    SyntheticExpert a(1.0, 0.0, 1.0, 5), b(1.0, 0.0, 1.0, 5);
    for (int i = 0; i < 200; ++i) CHECK(synthetic_label(Vec::Zero(1), 0.4, a) == synthetic_label(Vec::Zero(1), 0.4, b));

    StepFunctionExpert s1(0, 0.5, true, 0.2, 11), s2(0, 0.5, true, 0.2, 11);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        Vec x(1);
        x << u(rng);
        CHECK(s1.label(x, {}) == s2.label(x, {}));
    }
}

TEST_CASE("step function expert") {
    StepFunctionExpert s(1, 0.0);
    Vec x(2);
    x << 5.0, -0.1;
    CHECK(s.label(x, {}) == 1);
    x[1] = 0.1;
    CHECK(s.label(x, {}) == 0);
    StepFunctionExpert r(0, 0.0, false);
    x[0] = 0.3;
    CHECK(r.label(x, {}) == 1);
    CHECK_THROWS_AS(StepFunctionExpert(0, 0.0, true, 1.5), std::invalid_argument);
}

TEST_CASE("callback expert passes context and checks the answer") {
    LabelContext seen;
    CallbackExpert c([&](const Vec&, const LabelContext& ctx) {
        seen = ctx;
        return ctx.t % 2;
    });
    LabelContext ctx;
    ctx.t = 3;
    ctx.p_lower = 0.2;
    CHECK(c.label(Vec::Zero(1), ctx) == 1);
    CHECK(seen.p_lower == 0.2);
    CallbackExpert bad([](const Vec&, const LabelContext&) { return 2; });
    CHECK_THROWS_AS(bad.label(Vec::Zero(1), {}), std::invalid_argument);
}

namespace {

// Pearson statistic of 10 equal bins on [lo, hi].
double chi2_uniform(const std::vector<double>& xs, double lo, double hi) {
    std::array<int, 10> bins{};
    for (double x : xs) bins[std::min(9, static_cast<int>((x - lo) / (hi - lo) * 10.0))]++;
    const double expect = xs.size() / 10.0;
    double s = 0.0;
    for (int b : bins) s += (b - expect) * (b - expect) / expect;
    return s;
}

}  // namespace

TEST_CASE("rejection sampling") {
    const DomainBox box(Vec::Constant(1, -2.0), Vec::Constant(1, 3.0));
    std::mt19937_64 rng(17);
    // 99.9% point of chi-square with 9 degrees of freedom
    const double crit = 27.877;
    for (double p : {0.0, 0.5}) {
        std::vector<double> xs;
        for (int i = 0; i < 10000; ++i) xs.push_back(rejection_sample(box, [p](const Vec&) { return p; }, rng)[0]);
        CHECK(chi2_uniform(xs, -2.0, 3.0) < crit);
    }
    for (int i = 0; i < 500; ++i) {
        const Vec x = rejection_sample(box, [](const Vec& v) { return v[0] < 0.5 ? 1.0 : 0.0; }, rng);
        CHECK(x[0] >= 0.5);
    }
    CHECK_THROWS_AS(rejection_sample(box, [](const Vec&) { return 1.0; }, rng, 100), std::runtime_error);
}
