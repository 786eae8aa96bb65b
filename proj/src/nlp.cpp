#include "cobol/nlp.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <optional>

namespace cobol {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Pair {
    Vec s;
    Vec y;
};

Vec project(const Vec& x, const Vec& lo, const Vec& hi) { return x.cwiseMax(lo).cwiseMin(hi); }

// Two-loop recursion restricted to the free variables.
Vec lbfgs_direction(const Vec& g, const std::deque<Pair>& mem, const std::vector<char>& free) {
    const Eigen::Index n = g.size();
    auto mask = [&](const Vec& v) {
        Vec out = v;
        for (Eigen::Index i = 0; i < n; ++i)
            if (!free[static_cast<std::size_t>(i)]) out[i] = 0.0;
        return out;
    };
    Vec q = mask(g);
    if (mem.empty()) return -q;
    std::vector<double> alpha(mem.size()), rho(mem.size());
    std::vector<Vec> s(mem.size()), y(mem.size());
    for (std::size_t k = 0; k < mem.size(); ++k) {
        s[k] = mask(mem[k].s);
        y[k] = mask(mem[k].y);
        const double sy = s[k].dot(y[k]);
        rho[k] = sy > 0.0 ? 1.0 / sy : 0.0;
    }
    for (std::size_t k = mem.size(); k-- > 0;) {
        alpha[k] = rho[k] * s[k].dot(q);
        q -= alpha[k] * y[k];
    }
    const double yy = y.back().squaredNorm();
    const double gamma = (yy > 0.0 && rho.back() > 0.0) ? 1.0 / (rho.back() * yy) : 1.0;
    Vec r = gamma * q;
    for (std::size_t k = 0; k < mem.size(); ++k) {
        const double beta = rho[k] * y[k].dot(r);
        r += (alpha[k] - beta) * s[k];
    }
    return -mask(r);
}

}  // namespace

BoxMinimum minimize_lbfgsb(const SmoothFunction& f, const Vec& lower, const Vec& upper, const Vec& x0,
                           const LbfgsOptions& options) {
    const Eigen::Index n = x0.size();
    BoxMinimum out;
    Vec x = project(x0, lower, upper);
    Vec g = Vec::Zero(n);
    double fx = f(x, &g);
    out.argmin = x;
    out.value = fx;
    if (!std::isfinite(fx) || !g.allFinite()) return out;

    std::deque<Pair> mem;
    std::vector<char> free(static_cast<std::size_t>(n));
    Vec gn = Vec::Zero(n);
    int stall = 0;
    int iter = 0;
    for (; iter < options.max_iter; ++iter) {
        const Vec pg = project(x - g, lower, upper) - x;
        if (pg.lpNorm<Eigen::Infinity>() <= options.tol) {
            out.converged = true;
            break;
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool at_lo = x[i] <= lower[i] && g[i] > 0.0;
            const bool at_hi = x[i] >= upper[i] && g[i] < 0.0;
            free[static_cast<std::size_t>(i)] = !(at_lo || at_hi);
        }
        Vec d = lbfgs_direction(g, mem, free);
        double slope = g.dot(d);
        if (!(slope < 0.0)) {
            mem.clear();
            d = lbfgs_direction(g, mem, free);
            slope = g.dot(d);
            if (!(slope < 0.0)) {
                out.converged = true;
                break;
            }
        }
        double step = 1.0;
        if (mem.empty()) {
            const double dn = d.lpNorm<Eigen::Infinity>();
            if (dn > 0.0) step = std::min(1.0, 1.0 / dn);
        }
        bool accepted = false;
        Vec xn;
        double fn = kInf;
        for (int ls = 0; ls < 50; ++ls) {
            xn = project(x + step * d, lower, upper);
            const Vec dx = xn - x;
            if (dx.lpNorm<Eigen::Infinity>() == 0.0) break;
            fn = f(xn, &gn);
            if (std::isfinite(fn) && gn.allFinite() && fn <= fx + 1e-4 * g.dot(dx)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            out.converged = mem.empty();
            if (!mem.empty()) {
                mem.clear();
                continue;
            }
            break;
        }
        Pair p{xn - x, gn - g};
        const double sy = p.s.dot(p.y);
        if (sy > 1e-12 * p.s.norm() * p.y.norm()) {
            mem.push_back(std::move(p));
            if (static_cast<int>(mem.size()) > options.memory) mem.pop_front();
        }
        const double decrease = fx - fn;
        x = xn;
        g = gn;
        fx = fn;
        if (decrease <= 1e-15 * std::max(1.0, std::abs(fx))) {
            if (++stall >= 3) {
                out.converged = true;
                break;
            }
        } else {
            stall = 0;
        }
    }
    out.iterations = iter;
    if (fx <= out.value) {
        out.argmin = x;
        out.value = fx;
    }
    return out;
}

SmoothFunction with_finite_differences(std::function<double(const Vec&)> f, double h, const DomainBox* box) {
    std::optional<DomainBox> b;
    if (box) b = *box;
    return [f = std::move(f), h, b](const Vec& v, Vec* grad) {
        const double fv = f(v);
        if (grad) {
            Vec xp = v, xm = v;
            for (Eigen::Index i = 0; i < v.size(); ++i) {
                double hp = h, hm = h;
                if (b) {
                    hp = std::min(h, b->upper[i] - v[i]);
                    hm = std::min(h, v[i] - b->lower[i]);
                }
                xp[i] = v[i] + hp;
                xm[i] = v[i] - hm;
                const double span = hp + hm;
                (*grad)[i] = span > 0.0 ? (f(xp) - f(xm)) / span : 0.0;
                xp[i] = v[i];
                xm[i] = v[i];
            }
        }
        return fv;
    };
}

BoxMinimum minimize_over_box(const SmoothFunction& f, const DomainBox& box, const std::vector<Vec>& starts,
                             const LbfgsOptions& options) {
    if (starts.empty()) throw std::invalid_argument("minimize_over_box: no starts");
    BoxMinimum best;
    best.value = kInf;
    for (const Vec& s : starts) {
        BoxMinimum r = minimize_lbfgsb(f, box.lower, box.upper, s, options);
        if (r.value < best.value || best.argmin.size() == 0) {
            const int total = best.iterations + r.iterations;
            best = std::move(r);
            best.iterations = total;
        } else {
            best.iterations += r.iterations;
        }
    }
    return best;
}

BoxMinimum minimize_over_box(const SmoothFunction& f, const DomainBox& box, int starts, std::uint64_t seed,
                             const LbfgsOptions& options) {
    if (starts <= 0) throw std::invalid_argument("minimize_over_box: need at least one start");
    const Mat u = sobol_points(box.dim(), starts, seed);
    std::vector<Vec> pts;
    pts.reserve(static_cast<std::size_t>(starts));
    for (int i = 0; i < starts; ++i) pts.push_back(box.from_unit(u.row(i).transpose()));
    return minimize_over_box(f, box, pts, options);
}

NlpProblem NlpProblem::from_functions(SmoothFunction objective, std::vector<SmoothFunction> constraints,
                                      Vec lower, Vec upper, std::vector<Vec> starts) {
    NlpProblem p;
    p.num_constraints = static_cast<int>(constraints.size());
    p.lower = std::move(lower);
    p.upper = std::move(upper);
    p.starts = std::move(starts);
    p.evaluate = [objective = std::move(objective), constraints = std::move(constraints)](
                     const Vec& v, bool want_grad, NlpEval& out) {
        Vec g(v.size());
        out.f = objective(v, want_grad ? &out.grad : nullptr);
        for (std::size_t i = 0; i < constraints.size(); ++i) {
            out.c[static_cast<Eigen::Index>(i)] = constraints[i](v, want_grad ? &g : nullptr);
            if (want_grad) out.jac.row(static_cast<Eigen::Index>(i)) = g.transpose();
        }
    };
    return p;
}

namespace {

struct LegResult {
    Vec x;
    double value = kInf;
    double violation = kInf;
    bool converged = false;
    int iterations = 0;
};

double violation_of(const Vec& c) { return c.size() == 0 ? 0.0 : std::max(0.0, c.maxCoeff()); }

LegResult solve_leg(const NlpProblem& p, const Vec& start, const NlpOptions& opt) {
    const Eigen::Index n = start.size();
    const int m = p.num_constraints;
    NlpEval ev;
    ev.grad = Vec::Zero(n);
    ev.c = Vec::Zero(m);
    ev.jac = Mat::Zero(m, n);

    Vec mu = Vec::Zero(m);
    double rho = opt.penalty0;
    int increases = 0;
    double prev_violation = kInf;
    Vec x = project(start, p.lower, p.upper);
    LegResult out;

    LbfgsOptions inner;
    inner.tol = opt.tol;
    inner.max_iter = opt.max_iter;
    inner.memory = opt.memory;

    for (int outer = 0; outer < std::max(1, opt.max_outer); ++outer) {
        SmoothFunction lagrangian = [&](const Vec& v, Vec* grad) {
            p.evaluate(v, grad != nullptr, ev);
            double val = ev.f;
            if (grad) *grad = ev.grad;
            for (int i = 0; i < m; ++i) {
                const double t = mu[i] + rho * ev.c[i];
                if (t > 0.0) {
                    val += (t * t - mu[i] * mu[i]) / (2.0 * rho);
                    if (grad) *grad += t * ev.jac.row(i).transpose();
                } else {
                    val -= mu[i] * mu[i] / (2.0 * rho);
                }
            }
            return val;
        };
        BoxMinimum r = minimize_lbfgsb(lagrangian, p.lower, p.upper, x, inner);
        out.iterations += r.iterations;
        x = r.argmin;
        p.evaluate(x, false, ev);
        const double viol = violation_of(ev.c);
        for (int i = 0; i < m; ++i) mu[i] = std::max(0.0, mu[i] + rho * ev.c[i]);
        out.x = x;
        out.value = ev.f;
        out.violation = viol;
        if (m == 0) {
            out.converged = r.converged || r.iterations < opt.max_iter;
            break;
        }
        if (viol <= opt.feas_tol) {
            out.converged = true;
            break;
        }
        if (viol > 0.25 * prev_violation && increases < opt.max_penalty_increases) {
            rho *= opt.penalty_growth;
            ++increases;
        }
        prev_violation = viol;
    }
    return out;
}

}  // namespace

NlpSolution solve_nlp(const NlpProblem& p, const NlpOptions& options) {
    if (p.starts.empty()) throw std::invalid_argument("solve_nlp: at least one start required");
    if (!p.evaluate) throw std::invalid_argument("solve_nlp: missing evaluator");
    if (p.lower.size() != p.upper.size()) throw std::invalid_argument("solve_nlp: inconsistent bounds");
    for (Eigen::Index i = 0; i < p.lower.size(); ++i)
        if (p.lower[i] > p.upper[i]) throw std::invalid_argument("solve_nlp: inconsistent bounds");

    const int m = p.num_constraints;
    NlpSolution best;
    best.value = kInf;
    best.max_violation = kInf;
    bool best_feasible = false;

    auto consider = [&](const Vec& x, double value, double viol, bool conv, int idx) {
        const bool feasible = viol <= options.feas_tol;
        bool take = false;
        if (feasible && !best_feasible) take = true;
        else if (feasible && best_feasible) take = value < best.value;
        else if (!feasible && !best_feasible) take = viol < best.max_violation;
        if (take) {
            best.argmin = x;
            best.value = value;
            best.max_violation = viol;
            best.converged = feasible && conv;
            best.best_start = idx;
            best_feasible = feasible;
        }
    };

    NlpEval ev;
    int total_iter = 0;
    for (std::size_t k = 0; k < p.starts.size(); ++k) {
        const Vec& s = p.starts[k];
        if (s.size() != p.lower.size()) throw std::invalid_argument("solve_nlp: start dimension mismatch");
        LegResult leg = solve_leg(p, s, options);
        total_iter += leg.iterations;
        consider(leg.x, leg.value, leg.violation, leg.converged, static_cast<int>(k));
        // A feasible start is itself a candidate, so the result is never worse.
        ev.grad = Vec::Zero(s.size());
        ev.c = Vec::Zero(m);
        ev.jac = Mat::Zero(m, s.size());
        const Vec sp = project(s, p.lower, p.upper);
        p.evaluate(sp, false, ev);
        const double sv = violation_of(ev.c);
        if (sv <= options.feas_tol && ev.f < best.value) consider(sp, ev.f, sv, true, static_cast<int>(k));
    }
    best.iterations = total_iter;
    return best;
}

NlpSolution solve_nlp(const NlpProblem& problem, double tol, double feas_tol, int max_iter) {
    NlpOptions o;
    o.tol = tol;
    o.feas_tol = feas_tol;
    o.max_iter = max_iter;
    return solve_nlp(problem, o);
}

}  // namespace cobol
