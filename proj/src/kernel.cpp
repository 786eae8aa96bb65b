#include "cobol/kernel.hpp"

#include <cmath>
#include <string>

namespace cobol {

KernelConfig KernelConfig::isotropic(int dim, double lengthscale, double output_scale) {
    KernelConfig cfg;
    cfg.lengthscales.assign(static_cast<std::size_t>(dim), lengthscale);
    cfg.output_scale = output_scale;
    cfg.validate(dim);
    return cfg;
}

void KernelConfig::validate(int d) const {
    if (lengthscales.empty()) throw std::invalid_argument("KernelConfig: no lengthscales");
    if (d >= 0 && dim() != d)
        throw std::invalid_argument("KernelConfig: dimension mismatch (kernel " +
                                    std::to_string(dim()) + ", input " + std::to_string(d) + ")");
    for (double l : lengthscales)
        if (!(l > 0.0) || !std::isfinite(l))
            throw std::invalid_argument("KernelConfig: lengthscales must be positive");
    if (!(output_scale > 0.0) || output_scale > 1.0)
        throw std::invalid_argument("KernelConfig: output_scale must lie in (0, 1]");
}

namespace {

inline double scaled_sqdist(const double* a, const double* b, Eigen::Index stride_a,
                            const KernelConfig& cfg) {
    double acc = 0.0;
    for (std::size_t i = 0; i < cfg.lengthscales.size(); ++i) {
        const double diff = (a[static_cast<Eigen::Index>(i) * stride_a] - b[i]) / cfg.lengthscales[i];
        acc += diff * diff;
    }
    return acc;
}

}  // namespace

double kernel_eval(const Vec& x, const Vec& x2, const KernelConfig& cfg) {
    if (x.size() != x2.size()) throw std::invalid_argument("kernel_eval: dimension mismatch");
    cfg.validate(static_cast<int>(x.size()));
    return cfg.output_scale * std::exp(-0.5 * scaled_sqdist(x.data(), x2.data(), 1, cfg));
}

Mat gram_matrix(const Mat& X, const KernelConfig& cfg) {
    const Eigen::Index n = X.rows();
    Mat K(n, n);
    Vec row(X.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        K(i, i) = cfg.output_scale;
        row = X.row(i).transpose();
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = cfg.output_scale *
                             std::exp(-0.5 * scaled_sqdist(&X(j, 0), row.data(), X.rows(), cfg));
            K(i, j) = v;
            K(j, i) = v;
        }
    }
    return K;
}

Vec cross_kernel(const Mat& X, const Vec& x, const KernelConfig& cfg) {
    Vec k(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        k[i] = cfg.output_scale * std::exp(-0.5 * scaled_sqdist(&X(i, 0), x.data(), X.rows(), cfg));
    return k;
}

Mat cross_kernel_grad(const Mat& X, const Vec& x, const Vec& kx, const KernelConfig& cfg) {
    Mat J(X.rows(), X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double inv_l2 = 1.0 / (cfg.lengthscales[static_cast<std::size_t>(j)] *
                                     cfg.lengthscales[static_cast<std::size_t>(j)]);
        for (Eigen::Index i = 0; i < X.rows(); ++i) J(i, j) = -kx[i] * (x[j] - X(i, j)) * inv_l2;
    }
    return J;
}

Mat stack_rows(const std::vector<Vec>& points, int dim) {
    Mat X(static_cast<Eigen::Index>(points.size()), dim);
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].size() != dim) throw std::invalid_argument("stack_rows: dimension mismatch");
        X.row(static_cast<Eigen::Index>(i)) = points[i].transpose();
    }
    return X;
}

JitteredCholesky factorize_with_jitter(const Mat& A, double base_jitter, double max_jitter) {
    JitteredCholesky out;
    double jitter = base_jitter;
    const Eigen::Index n = A.rows();
    while (true) {
        Mat M = A;
        if (jitter > 0.0) M.diagonal().array() += jitter;
        out.llt.compute(M);
        bool ok = out.llt.info() == Eigen::Success;
        if (ok && n > 0) {
            const auto d = out.llt.matrixLLT().diagonal();
            ok = d.allFinite() && d.minCoeff() > 0.0;
        }
        if (ok) {
            out.jitter = jitter;
            return out;
        }
        const double next = std::max(jitter * 10.0, 1e-10);
        if (jitter >= max_jitter || next > max_jitter * (1.0 + 1e-12)) {
            throw NumericalError("Cholesky factorization failed after jitter escalation to " +
                                 std::to_string(jitter));
        }
        jitter = next;
    }
}

}  // namespace cobol
