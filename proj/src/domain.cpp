#include "cobol/domain.hpp"

#include <cmath>
#include <random>

#include <boost/random/sobol.hpp>

namespace cobol {

DomainBox::DomainBox(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() == 0 || lower.size() != upper.size())
        throw std::invalid_argument("DomainBox: bounds must be non-empty and of equal length");
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
        if (!(lower[i] < upper[i]) || !std::isfinite(lower[i]) || !std::isfinite(upper[i]))
            throw std::invalid_argument("DomainBox: need finite lower[i] < upper[i]");
    }
}

DomainBox DomainBox::unit(int dim) { return DomainBox(Vec::Zero(dim), Vec::Ones(dim)); }

bool DomainBox::contains(const Vec& x, double tol) const {
    if (x.size() != lower.size()) return false;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) return false;
    return true;
}

Vec DomainBox::clamp(const Vec& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

Vec DomainBox::to_unit(const Vec& x) const {
    return (x - lower).cwiseQuotient(upper - lower);
}

Vec DomainBox::from_unit(const Vec& u) const {
    return lower + u.cwiseProduct(upper - lower);
}

Mat sobol_points(int dim, int n, std::uint64_t seed) {
    if (dim <= 0 || n < 0) throw std::invalid_argument("sobol_points: bad shape");
    Mat out(n, dim);
    if (n == 0) return out;
    boost::random::sobol gen(static_cast<std::size_t>(dim));
    const double scale = 1.0 / (static_cast<double>(gen.max()) + 1.0);
    // The first point of the sequence is the origin.
    gen.discard(static_cast<std::uintmax_t>(dim));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dim; ++j) out(i, j) = static_cast<double>(gen()) * scale;
    if (seed != 0) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        Vec shift(dim);
        for (int j = 0; j < dim; ++j) shift[j] = unif(rng);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < dim; ++j) {
                double v = out(i, j) + shift[j];
                out(i, j) = v - std::floor(v);
            }
    }
    return out;
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

Vec from_std(const std::vector<double>& v) {
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace cobol
