#pragma once

#include <functional>
#include <vector>

namespace recur {

struct SchoenfeldResult {
    double raw = 0.0;
    long ceiling = 0;
};

// Events needed for a two-sided level-alpha log-rank test with 1:1 allocation.
SchoenfeldResult schoenfeld_events(double alpha, double power, double hr);

// Relative event savings when the power target drops from `power_high` to `power_low`.
double schoenfeld_savings(double alpha, double power_low, double power_high);

// Adaptive Simpson quadrature on [a, b].
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol = 1e-9,
                        int max_depth = 50);

// Dropout: exponential withdrawal at `lambda` (0 = none), administrative end at tau,
// optionally uniform staggered entry over the last `accrual` days of follow-up.
struct Censoring {
    double lambda = 0.0;
    double tau = 0.0;
    double accrual = 0.0;

    double survivor(double t) const;
    double mean_followup() const;  // integral of survivor over [0, tau]
};

struct NbDesign {
    double alpha = 0.05;
    double power = 0.8;
    double beta1_h0 = 0.0;
    double beta1_h1 = 0.0;
    double beta0 = 0.0;  // log control event rate per day
    double phi = 0.0;
    Censoring censoring;
};

struct NbSampleSize {
    double var_h0 = 0.0;
    double var_h1 = 0.0;
    double per_arm = 0.0;
    long per_arm_ceiling = 0;
    long total = 0;
};

// Asymptotic variance of sqrt(n)(beta1_hat - beta1) summed over arms.
double nb_asymptotic_variance(double beta0, double beta1, double phi, double mean_followup);
NbSampleSize nb_sample_size(const NbDesign& d);

enum class RateShape { CONSTANT, WEIBULL, PIECEWISE };

// Control-arm mean function R0(t) and rate r0(t).
struct MeanFunction {
    RateShape shape = RateShape::CONSTANT;
    double rate = 0.0;                 // constant rate
    double scale = 0.0, power = 1.0;   // Weibull R0(t) = scale * t^power
    std::vector<double> breaks;        // piecewise: interval starts, first = 0
    std::vector<double> rates;

    double cumulative(double t) const;
    double intensity(double t) const;
    double inverse(double r) const;  // smallest t with cumulative(t) = r
};

struct LwyyDesign {
    double alpha = 0.05;
    double power = 0.8;
    double beta1 = 0.0;
    double phi = 0.0;
    double p1 = 0.5;
    double p0 = 0.5;
    MeanFunction mean;
    Censoring censoring;
};

struct LwyyMoments {
    double E0 = 0.0;
    double F0 = 0.0;
};

LwyyMoments lwyy_moments(const MeanFunction& mean, const Censoring& cens);

struct LwyySampleSize {
    LwyyMoments moments;
    double v_beta = 0.0;
    double raw = 0.0;
    long ceiling = 0;
};

LwyySampleSize lwyy_sample_size(const LwyyDesign& d);

}  // namespace recur
