#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "cobol/gp.hpp"
#include "support/oracles.hpp"

using namespace cobol;

namespace {

Vec vec(std::initializer_list<double> v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

struct Instance {
    KernelConfig cfg;
    std::vector<Vec> X;
    Vec y;
};

Instance random_instance(std::mt19937_64& rng, int d, int n) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_real_distribution<double> ls(0.1, 1.0);
    std::normal_distribution<double> normal;
    Instance in;
    for (int j = 0; j < d; ++j) in.cfg.lengthscales.push_back(ls(rng));
    in.y.resize(n);
    for (int i = 0; i < n; ++i) {
        Vec x(d);
        for (int j = 0; j < d; ++j) x[j] = unif(rng);
        in.X.push_back(x);
        in.y[i] = normal(rng);
    }
    return in;
}

}  // namespace

TEST_CASE("kernel_eval values") {
    const KernelConfig cfg = KernelConfig::isotropic(1, 1.0);
    CHECK(kernel_eval(vec({0.3}), vec({0.3}), cfg) == 1.0);
    CHECK(kernel_eval(vec({0.0}), vec({1.0}), cfg) == doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
    CHECK(kernel_eval(vec({0.0}), vec({1.0}), cfg) == doctest::Approx(0.60653).epsilon(1e-5));
    CHECK(kernel_eval(vec({0.0}), vec({1e3}), cfg) < 1e-300);
    const KernelConfig ard{{0.5, 2.0}, 0.7};
    const Vec a = vec({0.1, -0.4}), b = vec({0.8, 1.3});
    CHECK(kernel_eval(a, b, ard) == doctest::Approx(oracle::rbf(a, b, ard.lengthscales, 0.7)).epsilon(1e-14));
    CHECK(kernel_eval(a, b, ard) == kernel_eval(b, a, ard));
}

TEST_CASE("kernel_eval errors") {
    CHECK_THROWS_AS(kernel_eval(vec({0.0}), vec({0.0, 1.0}), KernelConfig::isotropic(1, 1.0)),
                    std::invalid_argument);
    KernelConfig bad{{0.0}, 1.0};
    CHECK_THROWS_AS(kernel_eval(vec({0.0}), vec({1.0}), bad), std::invalid_argument);
    KernelConfig big{{1.0}, 1.5};
    CHECK_THROWS_AS(big.validate(), std::invalid_argument);
}

TEST_CASE("gp_posterior: prior and one observation") {
    const KernelConfig cfg = KernelConfig::isotropic(2, 0.3);
    const GPosterior prior(cfg, Mat(0, 2), Vec(0), 1e-4);
    const auto p0 = gp_posterior(vec({0.2, 0.9}), prior);
    CHECK(p0.mean == 0.0);
    CHECK(p0.variance == 1.0);

    const double y0 = 1.7, r = 1e-4;
    Mat X(1, 2);
    X << 0.4, 0.6;
    const GPosterior post(cfg, X, vec({y0}), r);
    const auto p = gp_posterior(vec({0.4, 0.6}), post);
    CHECK(p.mean == doctest::Approx(y0 / (1.0 + r)).epsilon(1e-12));
    CHECK(p.variance == doctest::Approx(1.0 - 1.0 / (1.0 + r)).epsilon(1e-8));
}

TEST_CASE("gp_posterior: 11-point 1-d dataset against the dense solve") {
    const KernelConfig cfg = KernelConfig::isotropic(1, 0.15);
    std::vector<Vec> X;
    Vec y(11);
    for (int i = 0; i <= 10; ++i) {
        X.push_back(vec({i / 10.0}));
        y[i] = std::sin(6.0 * i / 10.0);
    }
    const GPosterior post(cfg, stack_rows(X, 1), y, 1e-4);
    for (int k = 0; k <= 40; ++k) {
        const Vec x = vec({k / 40.0});
        const auto p = post.predict(x);
        const auto o = oracle::dense_posterior(X, y, x, cfg.lengthscales, 1e-4);
        CHECK(std::abs(p.mean - o.mean) <= 1e-8 * std::max(1.0, std::abs(o.mean)));
        CHECK(std::abs(p.variance - o.var) <= 1e-8);
    }
}

TEST_CASE("gp_posterior: random instances against the dense solve") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 40; ++trial) {
        const int d = 1 + trial % 4;
        const int n = 1 + static_cast<int>(rng() % 50);
        const Instance in = random_instance(rng, d, n);
        const GPosterior post(in.cfg, stack_rows(in.X, d), in.y, 1e-4);
        for (int q = 0; q < 10; ++q) {
            Vec x(d);
            for (int j = 0; j < d; ++j) x[j] = unif(rng);
            const auto p = post.predict(x);
            const auto o = oracle::dense_posterior(in.X, in.y, x, in.cfg.lengthscales, 1e-4);
            worst = std::max(worst, std::abs(p.mean - o.mean) / std::max(1.0, std::abs(o.mean)));
            worst = std::max(worst, std::abs(p.variance - o.var));
            CHECK(p.variance >= 0.0);
            CHECK(p.variance <= 1.0);
        }
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("posterior variance never grows when a datum is appended") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int d = 1 + trial % 3;
        const Instance in = random_instance(rng, d, 12);
        Vec x(d);
        for (int j = 0; j < d; ++j) x[j] = unif(rng);
        double prev = 1.0;
        for (int n = 1; n <= 12; ++n) {
            std::vector<Vec> head(in.X.begin(), in.X.begin() + n);
            const GPosterior post(in.cfg, stack_rows(head, d), in.y.head(n), 1e-4);
            const double v = post.predict(x).variance;
            CHECK(v <= prev + 1e-9);
            prev = v;
        }
    }
}

TEST_CASE("predict_grad matches finite differences") {
    std::mt19937_64 rng(4);
    const Instance in = random_instance(rng, 3, 15);
    const GPosterior post(in.cfg, stack_rows(in.X, 3), in.y, 1e-4, 2.0);
    const Vec x = vec({0.31, 0.62, 0.47});
    Vec g(3);
    post.lcb(x, &g);
    for (int j = 0; j < 3; ++j) {
        Vec xp = x, xm = x;
        xp[j] += 1e-6;
        xm[j] -= 1e-6;
        CHECK(g[j] == doctest::Approx((post.lcb(xp) - post.lcb(xm)) / 2e-6).epsilon(1e-5));
    }
}

TEST_CASE("beta_f") {
    CHECK(beta_f(1.0, 0.0, 7.0, 0.01) == 1.0);
    CHECK(beta_f(1.0, 1.0, 0.0, 2.0 / std::numbers::e) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(beta_f(1.0, 0.5, 2.0, 0.01) < beta_f(1.0, 0.5, 3.0, 0.01));
    CHECK(beta_f(1.0, 0.5, 2.0, 0.1) < beta_f(1.0, 0.5, 2.0, 0.01));
    CHECK_THROWS_AS(beta_f(1.0, 1.0, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(beta_f(1.0, 1.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("info_gain_estimate") {
    const KernelConfig cfg = KernelConfig::isotropic(1, 0.2);
    Mat cand(20, 1);
    for (int i = 0; i < 20; ++i) cand(i, 0) = i / 19.0;
    CHECK(info_gain_estimate(cfg, 1e-4, cand, 0) == 0.0);
    CHECK(info_gain_estimate(cfg, 1.0, cand, 1) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-14));
    CHECK_THROWS_AS(info_gain_estimate(cfg, 1.0, Mat(0, 1), 1), std::invalid_argument);

    double prev = 0.0;
    for (int n = 1; n <= 20; ++n) {
        const double g = info_gain_estimate(cfg, 0.01, cand, n);
        CHECK(g >= prev);
        prev = g;
    }
    // Greedy against random subsets, each scored by an exact log-determinant.
    std::mt19937_64 rng(12);
    for (int n = 1; n <= 10; ++n) {
        const double greedy = info_gain_estimate(cfg, 0.01, cand, n);
        for (int rep = 0; rep < 200; ++rep) {
            std::vector<int> idx(20);
            for (int i = 0; i < 20; ++i) idx[static_cast<std::size_t>(i)] = i;
            std::shuffle(idx.begin(), idx.end(), rng);
            std::vector<Vec> S;
            for (int i = 0; i < n; ++i) S.push_back(cand.row(idx[static_cast<std::size_t>(i)]).transpose());
            Mat A = oracle::gram(S, cfg.lengthscales) / 0.01;
            A.diagonal().array() += 1.0;
            const double exact = 0.5 * std::log(A.determinant());
            CHECK(greedy >= exact - 1e-9);
        }
    }
}

TEST_CASE("fit_kernel_hyperparams") {
    const KernelConfig cfg0 = KernelConfig::isotropic(1, 1.0);
    ObjectiveDataset empty;
    CHECK(fit_kernel_hyperparams(empty, cfg0, 4).config.lengthscales == cfg0.lengthscales);
    ObjectiveDataset one;
    one.add(vec({0.5}), 1.0);
    const HyperFit f1 = fit_kernel_hyperparams(one, cfg0, 4);
    CHECK(f1.degenerate);
    CHECK(f1.config.lengthscales == cfg0.lengthscales);

    ObjectiveDataset same;
    same.add(vec({0.5}), 1.0);
    same.add(vec({0.5}), 2.0);
    CHECK(fit_kernel_hyperparams(same, cfg0, 4).degenerate);

    // 30 draws from a GP with lengthscale 0.2.
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal;
    std::vector<Vec> X;
    for (int i = 0; i < 30; ++i) X.push_back(vec({unif(rng)}));
    Mat K = oracle::gram(X, {0.2});
    K.diagonal().array() += 1e-6;
    const Mat L = K.llt().matrixL();
    Vec e(30);
    for (int i = 0; i < 30; ++i) e[i] = normal(rng);
    const Vec y = L * e;
    ObjectiveDataset ds;
    for (int i = 0; i < 30; ++i) ds.add(X[static_cast<std::size_t>(i)], y[i]);
    for (int restarts : {0, 4}) {
        const HyperFit fit = fit_kernel_hyperparams(ds, cfg0, restarts);
        const double before = negative_log_marginal_likelihood(stack_rows(X, 1), y, cfg0, ds.regularizer);
        const double after = negative_log_marginal_likelihood(stack_rows(X, 1), y, fit.config, ds.regularizer);
        CHECK(after <= before);
        CHECK(fit.nll == doctest::Approx(after));
        for (double l : fit.config.lengthscales) {
            CHECK(l >= kMinLengthscale);
            CHECK(l <= kMaxLengthscale);
        }
    }
    const HyperFit fit = fit_kernel_hyperparams(ds, cfg0, 4);
    CHECK(fit.config.lengthscales[0] > 0.05);
    CHECK(fit.config.lengthscales[0] < 0.8);
}

TEST_CASE("NLL gradient matches finite differences") {
    std::mt19937_64 rng(31);
    const Instance in = random_instance(rng, 2, 20);
    const Mat X = stack_rows(in.X, 2);
    Vec g;
    negative_log_marginal_likelihood(X, in.y, in.cfg, 1e-4, &g);
    for (int j = 0; j < 2; ++j) {
        KernelConfig p = in.cfg, m = in.cfg;
        p.lengthscales[static_cast<std::size_t>(j)] *= std::exp(1e-6);
        m.lengthscales[static_cast<std::size_t>(j)] *= std::exp(-1e-6);
        const double fd = (negative_log_marginal_likelihood(X, in.y, p, 1e-4) -
                           negative_log_marginal_likelihood(X, in.y, m, 1e-4)) /
                          2e-6;
        CHECK(g[j] == doctest::Approx(fd).epsilon(1e-4));
    }
}
