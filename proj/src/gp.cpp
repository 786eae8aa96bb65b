#include "cobol/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "cobol/nlp.hpp"

namespace cobol {

void ObjectiveDataset::validate(const DomainBox* box) const {
    if (points.size() != values.size())
        throw std::invalid_argument("ObjectiveDataset: points and values differ in length");
    if (!(regularizer > 0.0)) throw std::invalid_argument("ObjectiveDataset: regularizer must be positive");
    if (noise_sigma < 0.0) throw std::invalid_argument("ObjectiveDataset: negative noise_sigma");
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (!std::isfinite(values[i])) throw std::invalid_argument("ObjectiveDataset: non-finite value");
        if (box && !box->contains(points[i], 1e-12))
            throw std::invalid_argument("ObjectiveDataset: point outside the domain");
    }
}

GPosterior::GPosterior(KernelConfig kernel, Mat X, Vec y, double regularizer, double beta, double bound_f)
    : kernel_(std::move(kernel)), X_(std::move(X)), y_(std::move(y)), r_(regularizer), beta_(beta),
      bound_f_(bound_f) {
    kernel_.validate(static_cast<int>(X_.cols()));
    if (X_.rows() != y_.size()) throw std::invalid_argument("GPosterior: X and y differ in length");
    if (!(r_ > 0.0)) throw std::invalid_argument("GPosterior: regularizer must be positive");
    if (beta_ < 0.0) throw std::invalid_argument("GPosterior: beta must be nonnegative");
    const Eigen::Index n = X_.rows();
    if (n > 0) {
        Mat K = gram_matrix(X_, kernel_);
        K.diagonal().array() += r_;
        JitteredCholesky f = factorize_with_jitter(K, 0.0);
        llt_ = std::move(f.llt);
        jitter_ = f.jitter;
        alpha_ = llt_.solve(y_);
        Kinv_ = llt_.solve(Mat::Identity(n, n));
    } else {
        alpha_ = Vec::Zero(0);
        Kinv_ = Mat::Zero(0, 0);
    }
}

GPosterior::GPosterior(const KernelConfig& kernel, const ObjectiveDataset& data, double beta, double bound_f)
    : GPosterior(kernel, stack_rows(data.points, kernel.dim()),
                 Eigen::Map<const Vec>(data.values.data(), static_cast<Eigen::Index>(data.values.size())),
                 data.regularizer, beta, bound_f) {}

GPosterior::Prediction GPosterior::predict(const Vec& x) const {
    if (x.size() != X_.cols()) throw std::invalid_argument("GPosterior: query dimension mismatch");
    Prediction p;
    p.variance = kernel_.output_scale;
    if (X_.rows() == 0) return p;
    const Vec k = cross_kernel(X_, x, kernel_);
    p.mean = k.dot(alpha_);
    const Vec v = llt_.matrixL().solve(k);
    double var = kernel_.output_scale - v.squaredNorm();
    if (var < -1e-12) throw NumericalError("GPosterior: negative posterior variance");
    p.variance = std::max(0.0, var);
    return p;
}

GPosterior::PredictionGrad GPosterior::predict_grad(const Vec& x) const {
    if (x.size() != X_.cols()) throw std::invalid_argument("GPosterior: query dimension mismatch");
    PredictionGrad p;
    const Eigen::Index d = X_.cols();
    p.dmean = Vec::Zero(d);
    p.dsd = Vec::Zero(d);
    if (X_.rows() == 0) {
        p.sd = std::sqrt(kernel_.output_scale);
        return p;
    }
    const Vec k = cross_kernel(X_, x, kernel_);
    const Mat dk = cross_kernel_grad(X_, x, k, kernel_);
    p.mean = k.dot(alpha_);
    p.dmean = dk.transpose() * alpha_;
    const Vec Kk = Kinv_ * k;
    double var = kernel_.output_scale - k.dot(Kk);
    if (var < -1e-12) throw NumericalError("GPosterior: negative posterior variance");
    var = std::max(0.0, var);
    p.sd = std::sqrt(var);
    const double denom = std::max(p.sd, 1e-12);
    p.dsd = -(dk.transpose() * Kk) / denom;
    return p;
}

double GPosterior::sd(const Vec& x) const { return std::sqrt(predict(x).variance); }

double GPosterior::lcb(const Vec& x, Vec* grad) const {
    if (!grad) {
        const Prediction p = predict(x);
        return p.mean - beta_ * std::sqrt(p.variance);
    }
    const PredictionGrad p = predict_grad(x);
    *grad = p.dmean - beta_ * p.dsd;
    return p.mean - beta_ * p.sd;
}

double GPosterior::ucb(const Vec& x, Vec* grad) const {
    if (!grad) {
        const Prediction p = predict(x);
        return p.mean + beta_ * std::sqrt(p.variance);
    }
    const PredictionGrad p = predict_grad(x);
    *grad = p.dmean + beta_ * p.dsd;
    return p.mean + beta_ * p.sd;
}

GPosterior::Prediction gp_posterior(const Vec& x, const GPosterior& post) { return post.predict(x); }

double beta_f(double bound_f, double sigma, double gamma_prev, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("beta_f: delta must lie in (0, 1)");
    if (!(bound_f > 0.0)) throw std::invalid_argument("beta_f: B_f must be positive");
    if (sigma < 0.0 || gamma_prev < 0.0) throw std::invalid_argument("beta_f: negative sigma or gamma");
    return bound_f + sigma * std::sqrt(2.0 * (gamma_prev + 1.0 + std::log(2.0 / delta)));
}

double info_gain_estimate(const KernelConfig& cfg, double r, const Mat& candidates, int n) {
    if (n < 0) throw std::invalid_argument("info_gain_estimate: negative n");
    if (n == 0) return 0.0;
    if (candidates.rows() == 0) throw std::invalid_argument("info_gain_estimate: empty candidate set");
    if (n > candidates.rows()) throw std::invalid_argument("info_gain_estimate: n exceeds candidate count");
    if (!(r > 0.0)) throw std::invalid_argument("info_gain_estimate: regularizer must be positive");
    cfg.validate(static_cast<int>(candidates.cols()));

    const Eigen::Index m = candidates.rows();
    const Mat Kc = gram_matrix(candidates, cfg);
    std::vector<Eigen::Index> S;
    std::vector<char> taken(static_cast<std::size_t>(m), 0);
    Mat M, B;
    Vec var;
    double logdet = 0.0;
    // Posterior state given the current picks: M = (K_S + rI)^{-1},
    // B = M K_{S,cand}, var = posterior variance at every candidate.
    auto refresh = [&]() {
        const auto k = static_cast<Eigen::Index>(S.size());
        Mat KS(k, k), KSc(k, m);
        for (Eigen::Index a = 0; a < k; ++a) {
            KSc.row(a) = Kc.row(S[static_cast<std::size_t>(a)]);
            for (Eigen::Index b = 0; b < k; ++b) KS(a, b) = Kc(S[static_cast<std::size_t>(a)], S[static_cast<std::size_t>(b)]);
        }
        KS.diagonal().array() += r;
        Eigen::LLT<Mat> llt(KS);
        if (llt.info() != Eigen::Success) throw NumericalError("info_gain_estimate: factorization failed");
        logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        M = llt.solve(Mat::Identity(k, k));
        B = M * KSc;
        var = Kc.diagonal() - (KSc.cwiseProduct(B)).colwise().sum().transpose();
    };
    for (int step = 0; step < n; ++step) {
        Eigen::Index pick = -1;
        if (S.empty()) {
            pick = 0;
        } else {
            refresh();
            for (Eigen::Index j = 0; j < m; ++j)
                if (!taken[static_cast<std::size_t>(j)] && (pick < 0 || var[j] > var[pick])) pick = j;
        }
        S.push_back(pick);
        taken[static_cast<std::size_t>(pick)] = 1;
        // 1-swap local search. Dropping pick i raises the variance at j by
        // B_ij^2 / M_ii, and the log-det changes by log((var_j^{-i} + r) M_ii).
        for (int pass = 0; pass < 10 && S.size() < static_cast<std::size_t>(m); ++pass) {
            refresh();
            double best = 1e-12;
            Eigen::Index out_pos = -1, in_j = -1;
            for (Eigen::Index p = 0; p < static_cast<Eigen::Index>(S.size()); ++p) {
                const double mpp = M(p, p);
                for (Eigen::Index j = 0; j < m; ++j) {
                    if (taken[static_cast<std::size_t>(j)]) continue;
                    const double vj = std::max(0.0, var[j]) + B(p, j) * B(p, j) / mpp;
                    const double delta = std::log((vj + r) * mpp);
                    if (delta > best) {
                        best = delta;
                        out_pos = p;
                        in_j = j;
                    }
                }
            }
            if (out_pos < 0) break;
            taken[static_cast<std::size_t>(S[static_cast<std::size_t>(out_pos)])] = 0;
            S[static_cast<std::size_t>(out_pos)] = in_j;
            taken[static_cast<std::size_t>(in_j)] = 1;
        }
    }
    refresh();
    return 0.5 * (logdet - static_cast<double>(S.size()) * std::log(r));
}

double information_gain_of(const KernelConfig& cfg, double r, const Mat& points) {
    if (points.rows() == 0) return 0.0;
    Mat A = gram_matrix(points, cfg) / r;
    A.diagonal().array() += 1.0;
    Eigen::LLT<Mat> llt(A);
    if (llt.info() != Eigen::Success) throw NumericalError("information_gain_of: factorization failed");
    return llt.matrixLLT().diagonal().array().log().sum();
}

double negative_log_marginal_likelihood(const Mat& X, const Vec& y, const KernelConfig& cfg, double r,
                                        Vec* grad_log_ls) {
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    if (grad_log_ls) *grad_log_ls = Vec::Zero(d);
    if (n == 0) return 0.0;
    const Mat K0 = gram_matrix(X, cfg);
    Mat K = K0;
    K.diagonal().array() += r;
    JitteredCholesky f = factorize_with_jitter(K, 0.0);
    const Vec alpha = f.llt.solve(y);
    const double logdet = 2.0 * f.llt.matrixLLT().diagonal().array().log().sum();
    const double nll = 0.5 * y.dot(alpha) + 0.5 * logdet +
                       0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    if (grad_log_ls) {
        // d NLL / d theta = 0.5 tr((K^{-1} - alpha alpha^T) dK/dtheta)
        Mat W = f.llt.solve(Mat::Identity(n, n));
        W.noalias() -= alpha * alpha.transpose();
        for (Eigen::Index j = 0; j < d; ++j) {
            const double l = cfg.lengthscales[static_cast<std::size_t>(j)];
            double acc = 0.0;
            for (Eigen::Index a = 0; a < n; ++a)
                for (Eigen::Index b = 0; b < n; ++b) {
                    const double diff = X(a, j) - X(b, j);
                    acc += W(a, b) * K0(a, b) * diff * diff;
                }
            (*grad_log_ls)[j] = 0.5 * acc / (l * l);
        }
    }
    return nll;
}

HyperFit fit_kernel_hyperparams(const ObjectiveDataset& data, const KernelConfig& cfg0, int restarts,
                                std::uint64_t seed) {
    const int d = cfg0.dim();
    cfg0.validate(d);
    data.validate();
    HyperFit out;
    out.config = cfg0;
    const Mat X = stack_rows(data.points, d);
    const Vec y = Eigen::Map<const Vec>(data.values.data(), static_cast<Eigen::Index>(data.values.size()));
    const double r = data.regularizer;
    if (data.size() < 2) {
        out.degenerate = true;
        out.nll = out.initial_nll = negative_log_marginal_likelihood(X, y, cfg0, r);
        return out;
    }
    bool identical = true;
    for (Eigen::Index i = 1; i < X.rows() && identical; ++i)
        identical = (X.row(i) - X.row(0)).cwiseAbs().maxCoeff() == 0.0;
    out.initial_nll = negative_log_marginal_likelihood(X, y, cfg0, r);
    out.nll = out.initial_nll;
    if (identical) {
        out.degenerate = true;
        return out;
    }

    const double lo = std::log(kMinLengthscale), hi = std::log(kMaxLengthscale);
    auto to_cfg = [&](const Vec& theta) {
        KernelConfig c = cfg0;
        for (int j = 0; j < d; ++j) c.lengthscales[static_cast<std::size_t>(j)] = std::exp(theta[j]);
        return c;
    };
    SmoothFunction objective = [&](const Vec& theta, Vec* grad) {
        try {
            return negative_log_marginal_likelihood(X, y, to_cfg(theta), r, grad);
        } catch (const NumericalError&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    std::vector<Vec> starts;
    Vec theta0(d);
    for (int j = 0; j < d; ++j)
        theta0[j] = std::clamp(std::log(cfg0.lengthscales[static_cast<std::size_t>(j)]), lo, hi);
    starts.push_back(theta0);
    std::mt19937_64 rng(seed);
    // Log-uniform starts over a practical sub-range of the clamp interval.
    std::uniform_real_distribution<double> unif(std::log(0.01), std::log(10.0));
    for (int s = 0; s < restarts; ++s) {
        Vec t(d);
        for (int j = 0; j < d; ++j) t[j] = unif(rng);
        starts.push_back(t);
    }
    LbfgsOptions opt;
    opt.tol = 1e-5;
    opt.max_iter = 200;
    const BoxMinimum best = minimize_over_box(objective, DomainBox(Vec::Constant(d, lo), Vec::Constant(d, hi)),
                                              starts, opt);
    if (std::isfinite(best.value) && best.value <= out.initial_nll) {
        out.config = to_cfg(best.argmin);
        out.nll = best.value;
    }
    return out;
}

}  // namespace cobol
