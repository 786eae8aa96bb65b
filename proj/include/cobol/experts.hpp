#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <random>

#include "cobol/domain.hpp"

namespace cobol {

/// Affine map of [f_min, f_max] onto [-3, 3]; values outside are clamped.
double rho_scale(double v, double f_min, double f_max);

/// Labeller whose reject probability is S(a rho(f(x))).
struct SyntheticExpert {
    double accuracy = 1.0;
    double f_min = 0.0;
    double f_max = 1.0;
    std::mt19937_64 rng{0};

    SyntheticExpert() = default;
    SyntheticExpert(double a, double lo, double hi, std::uint64_t seed);

    double reject_probability(double f_value) const;
};

/// Bernoulli draw with the expert's reject probability at f_value.
/// 0 = accept, 1 = reject.
int synthetic_label(const Vec& x, double f_value, SyntheticExpert& expert);

/// What the expert sees with each request.
struct LabelContext {
    Vec x;
    int t = 0;
    double p_lower = 0.5;
    double p_upper = 0.5;
};

class ExpertOracle {
public:
    virtual ~ExpertOracle() = default;
    virtual int label(const Vec& x, const LabelContext& ctx) = 0;
};

/// Synthetic labeller wired to a noise-free objective.
class SyntheticOracle : public ExpertOracle {
public:
    SyntheticOracle(std::function<double(const Vec&)> objective, SyntheticExpert expert)
        : objective_(std::move(objective)), expert_(std::move(expert)) {}
    int label(const Vec& x, const LabelContext&) override { return synthetic_label(x, objective_(x), expert_); }
    double reject_probability(const Vec& x) const { return expert_.reject_probability(objective_(x)); }

private:
    std::function<double(const Vec&)> objective_;
    SyntheticExpert expert_;
};

/// Rejects when x[axis] < threshold (or >= with `reject_below` false). A
/// non-zero flip probability turns each answer around at random.
class StepFunctionExpert : public ExpertOracle {
public:
    StepFunctionExpert(int axis, double threshold, bool reject_below = true, double flip = 0.0,
                       std::uint64_t seed = 0);
    int label(const Vec& x, const LabelContext& ctx) override;

private:
    int axis_;
    double threshold_;
    bool reject_below_;
    double flip_;
    std::mt19937_64 rng_;
};

/// Blocking adapter for a person answering through some other channel.
/// Calls are serialized.
class CallbackExpert : public ExpertOracle {
public:
    using Callback = std::function<int(const Vec&, const LabelContext&)>;
    explicit CallbackExpert(Callback cb) : cb_(std::move(cb)) {}
    int label(const Vec& x, const LabelContext& ctx) override;

private:
    Callback cb_;
    std::mutex mu_;
};

/// Uniform proposal on the box, accepted with probability 1 - reject_prob(x).
/// Throws std::runtime_error after max_attempts rejections.
Vec rejection_sample(const DomainBox& box, const std::function<double(const Vec&)>& reject_prob,
                     std::mt19937_64& rng, int max_attempts = 10000);

}  // namespace cobol
