#include "cobol/experts.hpp"

#include <algorithm>
#include <stdexcept>

#include "cobol/belief.hpp"

namespace cobol {

double rho_scale(double v, double f_min, double f_max) {
    if (!(f_min < f_max)) throw std::invalid_argument("rho_scale: need f_min < f_max");
    const double u = (v - f_min) / (f_max - f_min);
    return std::clamp(-3.0 + 6.0 * u, -3.0, 3.0);
}

SyntheticExpert::SyntheticExpert(double a, double lo, double hi, std::uint64_t seed)
    : accuracy(a), f_min(lo), f_max(hi), rng(seed) {
    if (!(lo < hi)) throw std::invalid_argument("SyntheticExpert: need f_min < f_max");
}

double SyntheticExpert::reject_probability(double f_value) const {
    return sigmoid(accuracy * rho_scale(f_value, f_min, f_max));
}

int synthetic_label(const Vec&, double f_value, SyntheticExpert& expert) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    return unif(expert.rng) < expert.reject_probability(f_value) ? 1 : 0;
}

StepFunctionExpert::StepFunctionExpert(int axis, double threshold, bool reject_below, double flip,
                                       std::uint64_t seed)
    : axis_(axis), threshold_(threshold), reject_below_(reject_below), flip_(flip), rng_(seed) {
    if (axis < 0) throw std::invalid_argument("StepFunctionExpert: negative axis");
    if (flip < 0.0 || flip > 1.0) throw std::invalid_argument("StepFunctionExpert: flip must lie in [0, 1]");
}

int StepFunctionExpert::label(const Vec& x, const LabelContext&) {
    if (axis_ >= x.size()) throw std::invalid_argument("StepFunctionExpert: axis out of range");
    int l = (x[axis_] < threshold_) == reject_below_ ? 1 : 0;
    if (flip_ > 0.0) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        if (unif(rng_) < flip_) l = 1 - l;
    }
    return l;
}

int CallbackExpert::label(const Vec& x, const LabelContext& ctx) {
    std::lock_guard<std::mutex> lock(mu_);
    const int l = cb_(x, ctx);
    if (l != 0 && l != 1) throw std::invalid_argument("CallbackExpert: label must be 0 or 1");
    return l;
}

Vec rejection_sample(const DomainBox& box, const std::function<double(const Vec&)>& reject_prob,
                     std::mt19937_64& rng, int max_attempts) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vec u(box.dim());
    for (int k = 0; k < max_attempts; ++k) {
        for (int j = 0; j < box.dim(); ++j) u[j] = unif(rng);
        const Vec x = box.from_unit(u);
        if (unif(rng) >= reject_prob(x)) return x;
    }
    throw std::runtime_error("rejection_sample: attempt budget exhausted");
}

}  // namespace cobol
