#include "cobol/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cobol {

void DualState::validate() const {
    if (!(lambda >= 0.0)) throw std::invalid_argument("DualState: lambda must be nonnegative");
    if (!(zeta > 0.0)) throw std::invalid_argument("DualState: zeta must be positive");
    if (!(eta >= 1.0)) throw std::invalid_argument("DualState: eta must be at least 1");
    if (!(g_thr > 0.0)) throw std::invalid_argument("DualState: g_thr must be positive");
    if (!(lambda0 >= 0.0)) throw std::invalid_argument("DualState: lambda0 must be nonnegative");
}

DualState dual_update(DualState dual, double z_star) {
    dual.lambda = std::max(0.0, dual.lambda + dual.zeta * z_star);
    return dual;
}

bool handover_gate(const BeliefInterval& interval, double g_thr, bool probability_scale) {
    if (probability_scale) return interval.prob_upper - interval.prob_lower > g_thr;
    return interval.upper - interval.lower > g_thr;
}

namespace {

// Indices of the `k` lowest scores; ties keep Sobol order.
std::vector<std::size_t> lowest(const std::vector<double>& score, std::size_t k) {
    std::vector<std::size_t> idx(score.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
    idx.resize(std::min(k, idx.size()));
    return idx;
}

std::vector<Vec> screen_points(const DomainBox& box, const AcquisitionOptions& opts) {
    const Mat u = sobol_points(box.dim(), std::max(1, opts.screen), opts.seed);
    std::vector<Vec> pts;
    pts.reserve(static_cast<std::size_t>(u.rows()));
    for (Eigen::Index i = 0; i < u.rows(); ++i) pts.push_back(box.from_unit(u.row(i).transpose()));
    return pts;
}

// Latent value v(x).w + s(x) u of the augmented function at x, layout (x, w, u).
double latent(const BeliefModel& m, const Vec& v, Eigen::Index d, Eigen::Index n, Vec* grad) {
    const Vec x = v.head(d);
    const auto w = v.segment(d, n);
    const double u = v[d + n];
    const BeliefModel::Augment a = m.augment(x, grad != nullptr);
    if (grad) {
        grad->resize(v.size());
        grad->head(d) = a.dv.transpose() * w + a.ds * u;
        grad->segment(d, n) = a.v;
        (*grad)[d + n] = a.s;
    }
    return a.v.dot(w) + a.s * u;
}

// Ball and likelihood constraints in rows `row` and `row + 1`.
void belief_constraints(const BeliefState& b, const Vec& v, Eigen::Index d, Eigen::Index n, bool want_grad,
                        NlpEval& e, int row) {
    const auto wu = v.tail(n + 1);
    const double B2 = b.bound * b.bound;
    Vec g;
    const double ll = b.model->likelihood_w(v.segment(d, n), want_grad ? &g : nullptr);
    e.c[row] = wu.squaredNorm() / B2 - 1.0;
    e.c[row + 1] = (b.mle.ll - b.radius) - ll;
    if (want_grad) {
        e.jac.row(row).setZero();
        e.jac.row(row).tail(n + 1) = (2.0 / B2) * wu.transpose();
        e.jac.row(row + 1).setZero();
        if (n > 0) e.jac.row(row + 1).segment(d, n) = -g.transpose();
    }
}

struct JointSetup {
    Eigen::Index d = 0;
    Eigen::Index n = 0;
    Vec lower;
    Vec upper;
    double rem = 0.0;  // norm budget left after the MLE
};

JointSetup joint_setup(const BeliefState& b, const DomainBox& box) {
    JointSetup s;
    s.d = box.dim();
    s.n = static_cast<Eigen::Index>(b.model->size());
    if (b.mle.w.size() != s.n) throw std::invalid_argument("acquisition: MLE does not match the belief data");
    s.lower.resize(s.d + s.n + 1);
    s.upper.resize(s.d + s.n + 1);
    s.lower.head(s.d) = box.lower;
    s.upper.head(s.d) = box.upper;
    s.lower.tail(s.n + 1).setConstant(-b.bound);
    s.upper.tail(s.n + 1).setConstant(b.bound);
    s.rem = std::sqrt(std::max(0.0, b.bound * b.bound - b.mle.w.squaredNorm()));
    return s;
}

Vec joint_start(const JointSetup& s, const BeliefState& b, const Vec& x) {
    Vec v(s.d + s.n + 1);
    v.head(s.d) = x;
    v.segment(s.d, s.n) = b.mle.w;
    v[s.d + s.n] = -s.rem;
    return v;
}

// Latent value of the MLE extension pushed as low as the ball allows.
double proxy_lower(const BeliefState& b, const JointSetup& s, const Vec& x) {
    const BeliefModel::Augment a = b.model->augment(x, false);
    return a.v.dot(b.mle.w) - a.s * s.rem;
}

bool same_point(const Vec& a, const Vec& b) { return (a - b).cwiseAbs().maxCoeff() == 0.0; }

}  // namespace

BoxMinimum screened_minimize(const SmoothFunction& f, const DomainBox& box, const std::vector<Vec>& extra,
                             const AcquisitionOptions& opts) {
    std::vector<Vec> starts;
    for (const Vec& e : extra) starts.push_back(box.clamp(e));
    const std::size_t want = static_cast<std::size_t>(std::max(1, opts.starts));
    if (starts.size() < want) {
        const std::vector<Vec> pts = screen_points(box, opts);
        std::vector<double> score(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) score[i] = f(pts[i], nullptr);
        for (std::size_t i : lowest(score, pts.size())) {
            if (starts.size() >= want) break;
            bool dup = false;
            for (const Vec& s : starts) dup = dup || same_point(s, pts[i]);
            if (!dup) starts.push_back(pts[i]);
        }
    }
    return minimize_over_box(f, box, starts, opts.lbfgs);
}

namespace {

std::vector<Vec> incumbent(const GPosterior& post) {
    if (post.size() == 0) return {};
    Eigen::Index best = 0;
    double bv = post.predict(post.inputs().row(0).transpose()).mean;
    for (Eigen::Index i = 1; i < post.inputs().rows(); ++i) {
        const double m = post.predict(post.inputs().row(i).transpose()).mean;
        if (m < bv) {
            bv = m;
            best = i;
        }
    }
    return {post.inputs().row(best).transpose()};
}

}  // namespace

Vec vanilla_lcb_candidate(const GPosterior& post, const DomainBox& box, const AcquisitionOptions& opts) {
    SmoothFunction f = [&](const Vec& x, Vec* g) { return post.lcb(x, g); };
    return screened_minimize(f, box, incumbent(post), opts).argmin;
}

BoxMinimum min_ucb(const GPosterior& post, const DomainBox& box, const AcquisitionOptions& opts) {
    SmoothFunction f = [&](const Vec& x, Vec* g) { return post.ucb(x, g); };
    return screened_minimize(f, box, incumbent(post), opts);
}

NoHarmResult no_harm_gate(const Vec& x_c, const Vec& x_u, const GPosterior& post, double eta, double min_ucb_value) {
    if (!(eta >= 1.0)) throw std::invalid_argument("no_harm_gate: eta must be at least 1");
    NoHarmResult r;
    r.lcb_c = post.lcb(x_c);
    r.min_ucb = min_ucb_value;
    r.sigma_u = post.sd(x_u);
    r.sigma_c = post.sd(x_c);
    r.lcb_condition = r.lcb_c <= r.min_ucb;
    r.sigma_condition = r.sigma_u <= eta * r.sigma_c;
    r.pass = r.lcb_condition && r.sigma_condition;
    return r;
}

NoHarmResult no_harm_gate(const Vec& x_c, const Vec& x_u, const GPosterior& post, double eta, const DomainBox& box,
                          const AcquisitionOptions& opts) {
    double m = min_ucb(post, box, opts).value;
    // The candidates themselves bound the minimum from above.
    m = std::min({m, post.ucb(x_c), post.ucb(x_u)});
    return no_harm_gate(x_c, x_u, post, eta, m);
}

ExpertCandidate expert_augmented_candidate(const GPosterior& post, const BeliefState& belief, double lambda,
                                           const DomainBox& box, const Vec& x_u, const AcquisitionOptions& opts) {
    if (!belief.model) throw std::invalid_argument("expert_augmented_candidate: missing belief model");
    if (lambda < 0.0) throw std::invalid_argument("expert_augmented_candidate: negative lambda");
    ExpertCandidate out;
    if (lambda == 0.0) {
        out.x = x_u;
        out.z_star = belief.interval(x_u, opts.nlp).lower;
        out.objective = post.lcb(x_u);
        return out;
    }
    const JointSetup s = joint_setup(belief, box);
    const Eigen::Index d = s.d, n = s.n;

    std::vector<Vec> xs{box.clamp(x_u)};
    {
        const std::vector<Vec> pts = screen_points(box, opts);
        std::vector<double> score(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i)
            score[i] = post.lcb(pts[i]) + lambda * proxy_lower(belief, s, pts[i]);
        for (std::size_t i : lowest(score, pts.size())) {
            if (xs.size() >= static_cast<std::size_t>(std::max(1, opts.starts))) break;
            if (!same_point(pts[i], xs.front())) xs.push_back(pts[i]);
        }
    }

    NlpProblem p;
    p.num_constraints = 2;
    p.lower = s.lower;
    p.upper = s.upper;
    for (const Vec& x : xs) p.starts.push_back(joint_start(s, belief, x));
    p.evaluate = [&](const Vec& v, bool want_grad, NlpEval& e) {
        Vec gl, gz;
        const double l = post.lcb(v.head(d), want_grad ? &gl : nullptr);
        const double z = latent(*belief.model, v, d, n, want_grad ? &gz : nullptr);
        e.f = l + lambda * z;
        if (want_grad) {
            e.grad = lambda * gz;
            e.grad.head(d) += gl;
        }
        belief_constraints(belief, v, d, n, want_grad, e, 0);
    };
    const NlpSolution sol = solve_nlp(p, opts.nlp);
    if (!sol.converged) {
        out.x = x_u;
        out.z_star = belief.interval(x_u, opts.nlp).lower;
        out.objective = post.lcb(x_u) + lambda * out.z_star;
        out.fallback = true;
        return out;
    }
    out.x = box.clamp(sol.argmin.head(d));
    out.z_star = latent(*belief.model, sol.argmin, d, n, nullptr);
    out.objective = sol.value;
    return out;
}

ExpertCandidate expert_augmented_candidate(const GPosterior& post, const BeliefDataset& ds,
                                           const ConfidenceSetParams& params, const DualState& dual,
                                           const DomainBox& box, const AcquisitionOptions& opts) {
    params.validate();
    dual.validate();
    const BeliefModel model(ds, post.kernel());
    BeliefState b;
    b.model = &model;
    b.bound = params.norm_bound;
    b.radius = params.beta1;
    b.mle = model.solve_mle(params.norm_bound, opts.nlp);
    const Vec x_u = vanilla_lcb_candidate(post, box, opts);
    return expert_augmented_candidate(post, b, dual.lambda, box, x_u, opts);
}

ConstrainedCandidate cobohl_candidate(const GPosterior& post, const BeliefState& belief, const DomainBox& box,
                                      const Vec& x_u, const AcquisitionOptions& opts) {
    if (!belief.model) throw std::invalid_argument("cobohl_candidate: missing belief model");
    const JointSetup s = joint_setup(belief, box);
    const Eigen::Index d = s.d, n = s.n;

    std::vector<Vec> xs{box.clamp(x_u)};
    {
        const std::vector<Vec> pts = screen_points(box, opts);
        std::vector<double> score(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            // Points whose optimistic latent value is already <= 0 come first.
            const double z = proxy_lower(belief, s, pts[i]);
            score[i] = post.lcb(pts[i]) + (z > 0.0 ? 1e6 + z : 0.0);
        }
        for (std::size_t i : lowest(score, pts.size())) {
            if (xs.size() >= static_cast<std::size_t>(std::max(1, opts.starts))) break;
            if (!same_point(pts[i], xs.front())) xs.push_back(pts[i]);
        }
    }

    NlpProblem p;
    p.num_constraints = 3;
    p.lower = s.lower;
    p.upper = s.upper;
    for (const Vec& x : xs) p.starts.push_back(joint_start(s, belief, x));
    p.evaluate = [&](const Vec& v, bool want_grad, NlpEval& e) {
        Vec gl, gz;
        e.f = post.lcb(v.head(d), want_grad ? &gl : nullptr);
        if (want_grad) {
            e.grad.setZero();
            e.grad.head(d) = gl;
        }
        belief_constraints(belief, v, d, n, want_grad, e, 0);
        e.c[2] = latent(*belief.model, v, d, n, want_grad ? &gz : nullptr);
        if (want_grad) e.jac.row(2) = gz.transpose();
    };
    const NlpSolution sol = solve_nlp(p, opts.nlp);
    ConstrainedCandidate out;
    if (!sol.converged) {
        out.x = x_u;
        out.z = belief.interval(x_u, opts.nlp).lower;
        return out;
    }
    out.x = box.clamp(sol.argmin.head(d));
    out.z = latent(*belief.model, sol.argmin, d, n, nullptr);
    out.feasible = true;
    return out;
}

}  // namespace cobol
