#include "doctest.h"

#include <cmath>
#include <random>

#include "cobol/acquisition.hpp"

using namespace cobol;

namespace {

Vec vec(std::initializer_list<double> v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

GPosterior make_post(const std::vector<double>& xs, const std::vector<double>& ys, double ls, double beta) {
    Mat X(static_cast<Eigen::Index>(xs.size()), 1);
    Vec y(static_cast<Eigen::Index>(ys.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) {
        X(static_cast<Eigen::Index>(i), 0) = xs[i];
        y[static_cast<Eigen::Index>(i)] = ys[i];
    }
    return GPosterior(KernelConfig::isotropic(1, ls), X, y, 1e-4, beta);
}

struct Problem1d {
    GPosterior post;
    BeliefDataset ds;
};

Problem1d random_problem(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal;
    std::vector<double> xs, ys;
    for (int i = 0; i < 5; ++i) {
        xs.push_back(unif(rng));
        ys.push_back(normal(rng));
    }
    const double ls = 0.1 + 0.2 * unif(rng);
    Problem1d p{make_post(xs, ys, ls, 1.0 + unif(rng)), {}};
    for (int i = 0; i < 5; ++i) p.ds.add(vec({unif(rng)}), unif(rng) < 0.5 ? 1 : 0);
    return p;
}

}  // namespace

TEST_CASE("dual_update") {
    DualState d;
    d.lambda = 1.0;
    CHECK(dual_update(d, -0.5).lambda == doctest::Approx(0.99));
    CHECK(dual_update(d, 2.0).lambda == doctest::Approx(1.04));
    d.lambda = 0.0;
    CHECK(dual_update(d, -5.0).lambda == 0.0);
    const DualState e = dual_update(d, 1.0);
    CHECK(e.zeta == d.zeta);
    CHECK(e.eta == d.eta);
    CHECK(e.g_thr == d.g_thr);
}

TEST_CASE("handover_gate") {
    BeliefInterval iv;
    iv.lower = -1.0;
    iv.upper = 1.0;
    CHECK(handover_gate(iv, 0.1));
    iv.upper = -0.95;
    CHECK_FALSE(handover_gate(iv, 0.1));
    iv.lower = 0.0;
    iv.upper = 0.125;
    CHECK_FALSE(handover_gate(iv, 0.125));
}

TEST_CASE("vanilla_lcb_candidate") {
    const DomainBox box = DomainBox::unit(1);
    const GPosterior prior(KernelConfig::isotropic(1, 0.2), Mat(0, 1), Vec(0), 1e-4, 2.0);
    const Vec a = vanilla_lcb_candidate(prior, box);
    const Vec b = vanilla_lcb_candidate(prior, box);
    CHECK(a == b);
    CHECK(prior.lcb(a) == doctest::Approx(-2.0));

    // One low observation with a large beta: the minimizer is the grid point
    // with the widest band, far from the datum.
    const GPosterior post = make_post({0.1}, {-0.5}, 0.1, 5.0);
    const Vec x = vanilla_lcb_candidate(post, box);
    double best = 1e300, bx = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        const double v = post.lcb(vec({i / 1000.0}));
        if (v < best) {
            best = v;
            bx = i / 1000.0;
        }
    }
    CHECK(post.lcb(x) <= best + 1e-9);
    CHECK(std::abs(x[0] - 0.1) > 0.2);
    (void)bx;

    // beta = 0: the candidate minimizes the mean.
    const GPosterior mean_only = make_post({0.2, 0.5, 0.8}, {1.0, -1.0, 0.5}, 0.2, 0.0);
    const Vec m = vanilla_lcb_candidate(mean_only, box);
    for (int i = 0; i <= 1000; ++i) CHECK(mean_only.predict(m).mean <= mean_only.predict(vec({i / 1000.0})).mean + 1e-9);
}

TEST_CASE("no_harm_gate") {
    const DomainBox box = DomainBox::unit(1);
    const GPosterior post = make_post({0.2, 0.5, 0.8}, {1.0, -1.0, 0.5}, 0.15, 1.0);
    const Vec x_u = vanilla_lcb_candidate(post, box);
    for (double eta : {1.0, 3.0, 100.0}) CHECK(no_harm_gate(x_u, x_u, post, eta, box).pass);

    // x_c sits on a datum, x_u far away in unexplored space.
    const GPosterior dense = make_post({0.0, 0.05, 0.1, 0.15}, {0.0, 0.1, 0.0, 0.1}, 0.05, 1.0);
    const Vec xc = vec({0.05}), xu = vec({0.9});
    CHECK(dense.sd(xu) > 3.0 * dense.sd(xc));
    const NoHarmResult r = no_harm_gate(xc, xu, dense, 3.0, box);
    CHECK_FALSE(r.sigma_condition);
    CHECK_FALSE(r.pass);

    // beta = 0: the lcb condition holds exactly at mean minimizers.
    const GPosterior mean_only = make_post({0.2, 0.5, 0.8}, {1.0, -1.0, 0.5}, 0.2, 0.0);
    const Vec m = vanilla_lcb_candidate(mean_only, box);
    CHECK(no_harm_gate(m, m, mean_only, 1.0, box).lcb_condition);
    CHECK_FALSE(no_harm_gate(vec({0.2}), m, mean_only, 1.0, box).lcb_condition);
}

TEST_CASE("expert_augmented_candidate: lambda = 0 and no labels") {
    const DomainBox box = DomainBox::unit(1);
    const GPosterior post = make_post({0.3, 0.7}, {0.4, -0.2}, 0.2, 1.0);
    ConfidenceSetParams params;
    DualState dual;
    dual.lambda = 0.0;
    const ExpertCandidate c = expert_augmented_candidate(post, BeliefDataset{}, params, dual, box);
    CHECK(c.x == vanilla_lcb_candidate(post, box));
    CHECK(c.z_star == doctest::Approx(-1.0));
}

TEST_CASE("expert_augmented_candidate: joint solve vs pointwise lower bound") {
    std::mt19937_64 rng(17);
    const DomainBox box = DomainBox::unit(1);
    int agree = 0;
    const int trials = 12;
    for (int trial = 0; trial < trials; ++trial) {
        Problem1d p = random_problem(rng);
        const BeliefModel model(p.ds, p.post.kernel());
        BeliefState b;
        b.model = &model;
        b.bound = 1.0 + trial % 3;
        b.radius = 0.01 * b.bound;
        b.mle = model.solve_mle(b.bound);
        const Vec x_u = vanilla_lcb_candidate(p.post, box);
        const double lambda = 1.0;
        const ExpertCandidate c = expert_augmented_candidate(p.post, b, lambda, box, x_u);
        CHECK_FALSE(c.fallback);
        CHECK(std::abs(c.z_star - b.interval(c.x).lower) <= 1e-3);

        double best = 1e300, gx = 0.0;
        for (int i = 0; i <= 100; ++i) {
            const Vec x = vec({i / 100.0});
            const double v = p.post.lcb(x) + lambda * b.interval(x).lower;
            if (v < best) {
                best = v;
                gx = i / 100.0;
            }
        }
        agree += std::abs(c.x[0] - gx) <= 0.01 + 1e-9;
        CHECK(c.objective <= best + 1e-6);
    }
    CHECK(agree >= trials - 1);
}

TEST_CASE("step-function expert steers the candidate") {
    const DomainBox box = DomainBox::unit(1);
    const GPosterior post = make_post({0.25, 0.75}, {0.0, 0.0}, 0.2, 1.0);
    BeliefDataset ds;
    for (int i = 0; i < 20; ++i) {
        const double x = (i + 0.5) / 20.0;
        ds.add(vec({x}), x < 0.5 ? 1 : 0);
    }
    const BeliefModel model(ds, post.kernel());
    BeliefState b;
    b.model = &model;
    b.bound = 4.0;
    b.radius = 0.04;
    b.mle = model.solve_mle(b.bound);
    const Vec x_u = vanilla_lcb_candidate(post, box);
    const ExpertCandidate c = expert_augmented_candidate(post, b, 20.0, box, x_u);
    CHECK(c.x[0] > 0.5);

    const ConstrainedCandidate h = cobohl_candidate(post, b, box, x_u);
    CHECK(h.feasible);
    CHECK(h.x[0] > 0.5);
    CHECK(b.interval(h.x).lower <= 1e-4);
}

TEST_CASE("cobohl_candidate without labels is the vanilla candidate") {
    const DomainBox box = DomainBox::unit(2);
    Mat X(3, 2);
    X << 0.1, 0.2, 0.6, 0.9, 0.4, 0.4;
    const GPosterior post(KernelConfig::isotropic(2, 0.3), X, vec({0.3, -0.4, 0.1}), 1e-4, 1.0);
    const BeliefModel model(BeliefDataset{}, post.kernel());
    BeliefState b;
    b.model = &model;
    b.mle = model.solve_mle(1.0);
    const Vec x_u = vanilla_lcb_candidate(post, box);
    const ConstrainedCandidate h = cobohl_candidate(post, b, box, x_u);
    CHECK(h.feasible);
    CHECK(post.lcb(h.x) == doctest::Approx(post.lcb(x_u)).epsilon(1e-6));
}
