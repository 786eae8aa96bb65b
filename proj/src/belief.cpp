#include "cobol/belief.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace cobol {

void BeliefDataset::add(const Vec& x, int label, int step) {
    if (label != 0 && label != 1) throw std::invalid_argument("BeliefDataset: label must be 0 or 1");
    points.push_back(x);
    labels.push_back(label);
    steps.push_back(step);
}

void BeliefDataset::validate() const {
    if (points.size() != labels.size() || points.size() != steps.size())
        throw std::invalid_argument("BeliefDataset: points, labels and steps differ in length");
    for (int l : labels)
        if (l != 0 && l != 1) throw std::invalid_argument("BeliefDataset: label must be 0 or 1");
    if (window && *window <= 0) throw std::invalid_argument("BeliefDataset: window must be positive");
}

BeliefDataset BeliefDataset::windowed(int t) const {
    if (!window) return *this;
    BeliefDataset out;
    out.window = window;
    for (std::size_t i = 0; i < points.size(); ++i)
        if (t - steps[i] < *window) out.add(points[i], labels[i], steps[i]);
    return out;
}

void ConfidenceSetParams::validate() const {
    if (!(norm_bound > 0.0)) throw std::invalid_argument("ConfidenceSetParams: norm_bound must be positive");
    if (beta1 < 0.0) throw std::invalid_argument("ConfidenceSetParams: beta1 must be nonnegative");
    if (!(epsilon > 0.0)) throw std::invalid_argument("ConfidenceSetParams: epsilon must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("ConfidenceSetParams: delta must lie in (0,1)");
}

double sigmoid(double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

double softplus(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

double log_likelihood(const Vec& Z, const std::vector<int>& labels) {
    if (static_cast<std::size_t>(Z.size()) != labels.size())
        throw std::invalid_argument("log_likelihood: length mismatch");
    double ll = 0.0;
    for (Eigen::Index i = 0; i < Z.size(); ++i) ll += Z[i] * labels[static_cast<std::size_t>(i)] - softplus(Z[i]);
    return ll;
}

double beta1(double epsilon, double delta, int q, int t, double bound_g, double log_cover_proxy) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("beta1: delta must lie in (0, 1)");
    if (q < 0 || t < 1) throw std::invalid_argument("beta1: need q >= 0 and t >= 1");
    if (!(bound_g > 0.0)) throw std::invalid_argument("beta1: B_g must be positive");
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const double td = static_cast<double>(t);
    const double logterm = std::log(pi2 * td * td / (6.0 * delta)) + log_cover_proxy;
    const double radical = 32.0 * q * bound_g * bound_g * std::max(0.0, logterm);
    return std::sqrt(radical) + 2.0 * epsilon * td;
}

double RadiusRule::operator()(double bound_g, int q, int t) const {
    if (kind == Kind::Lemma) return beta1(epsilon, delta, q, std::max(1, t), bound_g, log_cover_proxy);
    if (kind == Kind::ScaledLemma) return alpha1 * beta1(epsilon, delta, q, std::max(1, t), bound_g, log_cover_proxy);
    return alpha1 * bound_g / reference_bound;
}

BeliefModel::BeliefModel(BeliefDataset data, KernelConfig kernel, double base_jitter)
    : data_(std::move(data)), kernel_(std::move(kernel)) {
    data_.validate();
    kernel_.validate();
    X_ = stack_rows(data_.points, kernel_.dim());
    if (!data_.empty()) {
        JitteredCholesky f = factorize_with_jitter(gram_matrix(X_, kernel_), base_jitter);
        L_ = f.llt.matrixL();
        jitter_ = f.jitter;
    } else {
        L_ = Mat::Zero(0, 0);
        jitter_ = base_jitter;
    }
}

BeliefModel::Augment BeliefModel::augment(const Vec& x, bool with_grad) const {
    Augment a;
    const double kxx = kernel_.output_scale;
    const Eigen::Index n = X_.rows();
    const Eigen::Index d = static_cast<Eigen::Index>(kernel_.dim());
    if (n == 0) {
        a.v = Vec::Zero(0);
        a.s = std::sqrt(kxx);
        if (with_grad) {
            a.dv = Mat::Zero(0, d);
            a.ds = Vec::Zero(d);
        }
        return a;
    }
    const Vec k = cross_kernel(X_, x, kernel_);
    const auto L = L_.triangularView<Eigen::Lower>();
    a.v = L.solve(k);
    const double s2 = kxx + jitter_ - a.v.squaredNorm();
    const double floor = std::max(jitter_, 1e-12) * 1e-2;
    a.s = std::sqrt(std::max(s2, floor));
    if (with_grad) {
        const Mat dk = cross_kernel_grad(X_, x, k, kernel_);
        a.dv = L.solve(dk);
        a.ds = s2 > floor ? Vec(-(a.dv.transpose() * a.v) / a.s) : Vec(Vec::Zero(d));
    }
    return a;
}

double BeliefModel::likelihood_w(const Vec& w, Vec* grad) const {
    const Vec Z = L_.triangularView<Eigen::Lower>() * w;
    double ll = 0.0;
    Vec r(Z.size());
    for (Eigen::Index i = 0; i < Z.size(); ++i) {
        const int l = data_.labels[static_cast<std::size_t>(i)];
        ll += Z[i] * l - softplus(Z[i]);
        r[i] = l - sigmoid(Z[i]);
    }
    if (grad) *grad = L_.transpose() * r;
    return ll;
}

MleResult BeliefModel::solve_mle(double bound_g, const NlpOptions& opt) const {
    if (!(bound_g > 0.0)) throw std::invalid_argument("solve_mle: B_g must be positive");
    MleResult out;
    const Eigen::Index n = X_.rows();
    if (n == 0) {
        out.Z = Vec::Zero(0);
        out.w = Vec::Zero(0);
        out.ll = 0.0;
        return out;
    }
    const double B2 = bound_g * bound_g;
    NlpProblem p;
    p.num_constraints = 1;
    p.lower = Vec::Constant(n, -bound_g);
    p.upper = Vec::Constant(n, bound_g);
    p.starts = {Vec::Zero(n)};
    p.evaluate = [&](const Vec& w, bool want_grad, NlpEval& e) {
        Vec g;
        e.f = -likelihood_w(w, want_grad ? &g : nullptr);
        e.c[0] = w.squaredNorm() / B2 - 1.0;
        if (want_grad) {
            e.grad = -g;
            e.jac.row(0) = (2.0 / B2) * w.transpose();
        }
    };
    const NlpSolution sol = solve_nlp(p, opt);
    if (sol.max_violation > opt.feas_tol) {
        throw NumericalError("solve_mle: no feasible iterate (violation " + std::to_string(sol.max_violation) +
                             ")");
    }
    out.w = sol.argmin;
    // Pull the iterate onto the ball so downstream problems start feasible.
    const double nw = out.w.norm();
    if (nw > bound_g) out.w *= bound_g / nw;
    out.Z = L_.triangularView<Eigen::Lower>() * out.w;
    out.ll = likelihood_w(out.w, nullptr);
    out.converged = sol.converged;
    return out;
}

BeliefInterval BeliefModel::interval(const Vec& x, double bound_g, double radius, const MleResult& mle,
                                     const NlpOptions& opt) const {
    if (!(bound_g > 0.0)) throw std::invalid_argument("g_interval: B_g must be positive");
    if (radius < 0.0) throw std::invalid_argument("g_interval: negative radius");
    if (x.size() != kernel_.dim()) throw std::invalid_argument("g_interval: dimension mismatch");
    const Eigen::Index n = X_.rows();
    const double cap = bound_g * std::sqrt(kernel_.output_scale);
    const Augment a = augment(x, false);
    BeliefInterval out;
    if (n == 0) {
        out.lower = -cap;
        out.upper = cap;
    } else {
        if (mle.w.size() != n) throw std::invalid_argument("g_interval: MLE does not match the dataset");
        const double B2 = bound_g * bound_g;
        const double floor = mle.ll - radius;
        const double rem = std::sqrt(std::max(0.0, B2 - mle.w.squaredNorm()));
        auto solve_side = [&](double sign) {
            NlpProblem p;
            p.num_constraints = 2;
            p.lower = Vec::Constant(n + 1, -bound_g);
            p.upper = Vec::Constant(n + 1, bound_g);
            Vec start(n + 1);
            // the MLE is only feasible to within the solver tolerance
            const double wn = mle.w.norm();
            start.head(n) = wn > bound_g ? Vec(mle.w * (bound_g / wn)) : mle.w;
            start[n] = -sign * rem;
            p.starts = {start};
            p.evaluate = [&](const Vec& wu, bool want_grad, NlpEval& e) {
                const auto w = wu.head(n);
                const double u = wu[n];
                e.f = sign * (a.v.dot(w) + a.s * u);
                Vec g;
                const double ll = likelihood_w(w, want_grad ? &g : nullptr);
                e.c[0] = wu.squaredNorm() / B2 - 1.0;
                e.c[1] = floor - ll;
                if (want_grad) {
                    e.grad.head(n) = sign * a.v;
                    e.grad[n] = sign * a.s;
                    e.jac.row(0) = (2.0 / B2) * wu.transpose();
                    e.jac.row(1).head(n) = -g.transpose();
                    e.jac(1, n) = 0.0;
                }
            };
            const NlpSolution sol = solve_nlp(p, opt);
            if (sol.max_violation > 10.0 * opt.feas_tol)
                throw NumericalError("g_interval: infeasible bound problem (violation " +
                                     std::to_string(sol.max_violation) + ")");
            return sign * sol.value;
        };
        out.lower = solve_side(1.0);
        out.upper = solve_side(-1.0);
    }
    out.lower = std::clamp(out.lower, -cap, cap);
    out.upper = std::clamp(out.upper, -cap, cap);
    if (out.lower > out.upper) std::swap(out.lower, out.upper);
    out.prob_lower = sigmoid(out.lower);
    out.prob_upper = sigmoid(out.upper);
    return out;
}

MleResult solve_mle(const BeliefDataset& data, double bound_g, const KernelConfig& cfg) {
    return BeliefModel(data, cfg).solve_mle(bound_g);
}

BeliefInterval g_interval(const Vec& x, const BeliefDataset& data, const ConfidenceSetParams& params,
                          const KernelConfig& cfg, double ll_mle) {
    params.validate();
    const BeliefModel model(data, cfg);
    MleResult mle = model.solve_mle(params.norm_bound);
    // The caller's MLE value defines the likelihood floor.
    mle.ll = ll_mle;
    return model.interval(x, params.norm_bound, params.beta1, mle);
}

DoublingResult maybe_double_norm_bound(const BeliefModel& model, double bound_hat, const RadiusRule& rule, int t,
                                       int max_doublings) {
    if (!(bound_hat > 0.0)) throw std::invalid_argument("maybe_double_norm_bound: B_hat must be positive");
    DoublingResult out{bound_hat, 0};
    if (model.size() == 0) return out;
    const int q = static_cast<int>(model.size());
    double ll_here = model.solve_mle(out.bound).ll;
    while (out.doublings < max_doublings) {
        const double bigger = 2.0 * out.bound;
        const double ll_bigger = model.solve_mle(bigger).ll;
        if (!(ll_here < ll_bigger - rule(bigger, q, t))) break;
        out.bound = bigger;
        ++out.doublings;
        ll_here = ll_bigger;
    }
    return out;
}

double maybe_double_norm_bound(const BeliefDataset& data, double bound_hat, const RadiusRule& rule,
                               const KernelConfig& cfg, int t) {
    return maybe_double_norm_bound(BeliefModel(data, cfg), bound_hat, rule, t).bound;
}

}  // namespace cobol
