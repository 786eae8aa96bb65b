#include "doctest.h"

#include <cmath>
#include <random>

#include "cobol/nlp.hpp"

using namespace cobol;

namespace {

Vec vec(std::initializer_list<double> v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

// Tilted double well: minima near -1 (global) and +1.
double quartic(double v) { return (v * v - 1.0) * (v * v - 1.0) + 0.3 * v; }

}  // namespace

TEST_CASE("active-constraint quadratic") {
    auto p = NlpProblem::from_functions(
        [](const Vec& v, Vec* g) {
            if (g) (*g)[0] = 2.0 * v[0];
            return v[0] * v[0];
        },
        {[](const Vec& v, Vec* g) {
            if (g) (*g)[0] = -1.0;
            return 1.0 - v[0];
        }},
        vec({-5.0}), vec({5.0}), {vec({-3.0})});
    const NlpSolution s = solve_nlp(p, 1e-6, 1e-6, 400);
    CHECK(s.converged);
    CHECK(s.max_violation <= 1e-6);
    CHECK(s.argmin[0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(s.value == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("linear objective on the unit ball attains the antipode") {
    auto p = NlpProblem::from_functions(
        [](const Vec& v, Vec* g) {
            if (g) *g = vec({1.0, 0.0});
            return v[0];
        },
        {[](const Vec& v, Vec* g) {
            if (g) *g = 2.0 * v;
            return v.squaredNorm() - 1.0;
        }},
        vec({-2.0, -2.0}), vec({2.0, 2.0}), {vec({0.3, 0.2})});
    const NlpSolution s = solve_nlp(p);
    CHECK(s.converged);
    CHECK(s.argmin[0] == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(std::abs(s.argmin[1]) < 1e-3);
    CHECK(s.value == doctest::Approx(-1.0).epsilon(1e-5));
}

TEST_CASE("unconstrained quadratic") {
    auto p = NlpProblem::from_functions(
        [](const Vec& v, Vec* g) {
            if (g) (*g)[0] = 2.0 * (v[0] - 2.0);
            return (v[0] - 2.0) * (v[0] - 2.0);
        },
        {}, vec({-10.0}), vec({10.0}), {vec({-7.0})});
    const NlpSolution s = solve_nlp(p);
    CHECK(s.converged);
    CHECK(s.argmin[0] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("infeasible problem is reported, not hidden") {
    // v >= 2 inside the box [-1, 1] cannot be met.
    auto p = NlpProblem::from_functions([](const Vec& v, Vec* g) {
        if (g) (*g)[0] = 1.0;
        return v[0];
    },
                                        {[](const Vec& v, Vec* g) {
                                            if (g) (*g)[0] = -1.0;
                                            return 2.0 - v[0];
                                        }},
                                        vec({-1.0}), vec({1.0}), {vec({0.0})});
    const NlpSolution s = solve_nlp(p);
    CHECK_FALSE(s.converged);
    CHECK(s.max_violation == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("starts are validated") {
    NlpProblem p;
    p.evaluate = [](const Vec&, bool, NlpEval& e) { e.f = 0.0; };
    p.lower = vec({0.0});
    p.upper = vec({1.0});
    CHECK_THROWS_AS(solve_nlp(p), std::invalid_argument);
}

TEST_CASE("minimize_over_box: constant function keeps the first start") {
    const DomainBox box(vec({0.0, 0.0}), vec({1.0, 1.0}));
    SmoothFunction f = [](const Vec& v, Vec* g) {
        if (g) *g = Vec::Zero(v.size());
        return 3.5;
    };
    const std::vector<Vec> starts{vec({0.2, 0.7}), vec({0.9, 0.1}), vec({0.5, 0.5})};
    const BoxMinimum r = minimize_over_box(f, box, starts);
    CHECK(r.value == 3.5);
    CHECK(r.argmin.isApprox(starts[0]));
}

TEST_CASE("minimize_over_box: two-basin quartic matches a grid scan") {
    const DomainBox box(vec({-2.0}), vec({2.0}));
    SmoothFunction f = [](const Vec& v, Vec* g) {
        const double x = v[0];
        if (g) (*g)[0] = 4.0 * x * (x * x - 1.0) + 0.3;
        return quartic(x);
    };
    double best_x = 0.0, best_v = 1e300;
    for (int i = 0; i <= 1000; ++i) {
        const double x = -2.0 + 4.0 * i / 1000.0;
        if (quartic(x) < best_v) {
            best_v = quartic(x);
            best_x = x;
        }
    }
    const BoxMinimum r = minimize_over_box(f, box, 8, 7);
    CHECK(std::abs(r.argmin[0] - best_x) < 1e-2);
    CHECK(std::abs(r.value - best_v) < 1e-3);
    CHECK(r.value <= best_v + 1e-9);
}

TEST_CASE("minimize_over_box is deterministic and monotone in starts") {
    const DomainBox box(vec({-2.0, -2.0}), vec({2.0, 2.0}));
    SmoothFunction f = with_finite_differences(
        [](const Vec& v) { return quartic(v[0]) + quartic(v[1]) + 0.1 * std::sin(5.0 * v[0] * v[1]); }, 1e-6, &box);
    const BoxMinimum a = minimize_over_box(f, box, 6, 11);
    const BoxMinimum b = minimize_over_box(f, box, 6, 11);
    CHECK(a.argmin == b.argmin);
    CHECK(a.value == b.value);

    const Mat u = sobol_points(2, 8, 11);
    std::vector<Vec> starts;
    double prev = 1e300;
    for (int k = 0; k < 8; ++k) {
        starts.push_back(box.from_unit(u.row(k).transpose()));
        const BoxMinimum r = minimize_over_box(f, box, starts);
        CHECK(r.value <= prev);
        prev = r.value;
    }
}

TEST_CASE("finite-difference gradients agree with analytic ones") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> unif(-1.5, 1.5);
    auto fn = [](const Vec& v) { return std::exp(0.3 * v[0]) * std::cos(v[1]) + v[0] * v[1] * v[1]; };
    SmoothFunction fd = with_finite_differences(fn);
    for (int k = 0; k < 20; ++k) {
        const Vec v = vec({unif(rng), unif(rng)});
        Vec g(2);
        fd(v, &g);
        const double g0 = 0.3 * std::exp(0.3 * v[0]) * std::cos(v[1]) + v[1] * v[1];
        const double g1 = -std::exp(0.3 * v[0]) * std::sin(v[1]) + 2.0 * v[0] * v[1];
        CHECK(g[0] == doctest::Approx(g0).epsilon(1e-6));
        CHECK(g[1] == doctest::Approx(g1).epsilon(1e-6));
    }
}

TEST_CASE("feasibility honesty across random ball-constrained problems") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 2 + trial % 5;
        Vec c(n), center(n);
        for (int i = 0; i < n; ++i) {
            c[i] = normal(rng);
            center[i] = 2.0 * normal(rng);
        }
        auto p = NlpProblem::from_functions(
            [c, center](const Vec& v, Vec* g) {
                if (g) *g = 2.0 * (v - center) + c;
                return (v - center).squaredNorm() + c.dot(v);
            },
            {[](const Vec& v, Vec* g) {
                if (g) *g = 2.0 * v;
                return v.squaredNorm() - 1.0;
            }},
            Vec::Constant(n, -3.0), Vec::Constant(n, 3.0), {Vec::Zero(n), Vec::Constant(n, 0.5)});
        const NlpSolution s = solve_nlp(p);
        if (s.converged) CHECK(s.max_violation <= 1e-6);
        CHECK(s.converged);
        // Closed-form oracle: project the unconstrained minimizer onto the ball.
        Vec xu = center - 0.5 * c;
        if (xu.norm() > 1.0) xu /= xu.norm();
        CHECK((s.argmin - xu).norm() < 1e-4);
    }
}
