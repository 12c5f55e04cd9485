#include "recur/design.hpp"

#include <cmath>

#include "recur/errors.hpp"
#include "recur/stats.hpp"

namespace recur {

namespace {

void check_levels(double alpha, double power) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::BAD_INPUT, "alpha must be in (0,1)");
    if (!(power > 0.0 && power < 1.0)) throw Error(ErrorCode::BAD_INPUT, "power must be in (0,1)");
}

double z_sum(double alpha, double power) {
    return normal_quantile(1.0 - alpha / 2.0) + normal_quantile(power);
}

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
                    double whole, double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    double diff = left + right - whole;
    if (depth <= 0 || std::fabs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

SchoenfeldResult schoenfeld_events(double alpha, double power, double hr) {
    check_levels(alpha, power);
    if (!(hr > 0.0)) throw Error(ErrorCode::BAD_INPUT, "hr must be > 0");
    if (hr == 1.0) throw Error(ErrorCode::HR_ONE, "no events can detect a hazard ratio of 1");
    double z = z_sum(alpha, power);
    double lh = std::log(hr);
    SchoenfeldResult r;
    r.raw = 4.0 * z * z / (lh * lh);
    r.ceiling = static_cast<long>(std::ceil(r.raw - 1e-12));
    return r;
}

double schoenfeld_savings(double alpha, double power_low, double power_high) {
    check_levels(alpha, power_low);
    check_levels(alpha, power_high);
    double lo = z_sum(alpha, power_low), hi = z_sum(alpha, power_high);
    return 1.0 - (lo * lo) / (hi * hi);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol, int max_depth) {
    if (a == b) return 0.0;
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

double Censoring::survivor(double t) const {
    if (t < 0.0) return 1.0;
    if (tau > 0.0 && t > tau) return 0.0;
    double s = lambda > 0.0 ? std::exp(-lambda * t) : 1.0;
    if (accrual > 0.0 && t > tau - accrual) s *= (tau - t) / accrual;
    return s;
}

double Censoring::mean_followup() const {
    if (accrual > 0.0) {
        return adaptive_simpson([this](double t) { return survivor(t); }, 0.0, tau, 1e-10);
    }
    if (lambda <= 0.0) return tau;
    return -std::expm1(-lambda * tau) / lambda;
}

double nb_asymptotic_variance(double beta0, double beta1, double phi, double mean_followup) {
    double v = 0.0;
    for (int z = 0; z < 2; ++z) {
        double mu = std::exp(beta0 + beta1 * z) * mean_followup;
        v += (1.0 + phi * mu) / mu;
    }
    return v;
}

NbSampleSize nb_sample_size(const NbDesign& d) {
    check_levels(d.alpha, d.power);
    if (d.beta1_h0 == d.beta1_h1) throw Error(ErrorCode::HR_ONE, "null and alternative effects coincide");
    if (!(d.censoring.tau > 0.0)) throw Error(ErrorCode::BAD_INPUT, "tau must be > 0");
    double ec = d.censoring.mean_followup();
    NbSampleSize r;
    r.var_h0 = nb_asymptotic_variance(d.beta0, d.beta1_h0, d.phi, ec);
    r.var_h1 = nb_asymptotic_variance(d.beta0, d.beta1_h1, d.phi, ec);
    double za = normal_quantile(1.0 - d.alpha / 2.0);
    double zg = normal_quantile(d.power);
    double num = std::sqrt(r.var_h0) * za + std::sqrt(r.var_h1) * zg;
    double delta = d.beta1_h0 - d.beta1_h1;
    r.per_arm = num * num / (delta * delta);
    r.per_arm_ceiling = static_cast<long>(std::ceil(r.per_arm - 1e-12));
    r.total = 2 * r.per_arm_ceiling;
    return r;
}

double MeanFunction::cumulative(double t) const {
    switch (shape) {
        case RateShape::CONSTANT: return rate * t;
        case RateShape::WEIBULL: return scale * std::pow(t, power);
        case RateShape::PIECEWISE: {
            double r = 0.0;
            for (std::size_t k = 0; k < breaks.size(); ++k) {
                double lo = breaks[k];
                double hi = k + 1 < breaks.size() ? breaks[k + 1] : INFINITY;
                if (t <= lo) break;
                r += rates[k] * (std::min(t, hi) - lo);
            }
            return r;
        }
    }
    return 0.0;
}

double MeanFunction::intensity(double t) const {
    switch (shape) {
        case RateShape::CONSTANT: return rate;
        case RateShape::WEIBULL: return scale * power * std::pow(t, power - 1.0);
        case RateShape::PIECEWISE: {
            double r = 0.0;
            for (std::size_t k = 0; k < breaks.size() && breaks[k] <= t; ++k) r = rates[k];
            return r;
        }
    }
    return 0.0;
}

double MeanFunction::inverse(double r) const {
    switch (shape) {
        case RateShape::CONSTANT: return r / rate;
        case RateShape::WEIBULL: return std::pow(r / scale, 1.0 / power);
        case RateShape::PIECEWISE: {
            double acc = 0.0;
            for (std::size_t k = 0; k < breaks.size(); ++k) {
                double lo = breaks[k];
                double hi = k + 1 < breaks.size() ? breaks[k + 1] : INFINITY;
                double seg = rates[k] * (hi - lo);
                if (rates[k] > 0.0 && acc + seg >= r) return lo + (r - acc) / rates[k];
                acc += seg;
            }
            return INFINITY;
        }
    }
    return 0.0;
}

LwyyMoments lwyy_moments(const MeanFunction& mean, const Censoring& cens) {
    // integrate on the mean-function scale u = R0(t): dR0 becomes du
    double top = mean.cumulative(cens.tau);
    auto pi_at = [&](double u) { return cens.survivor(mean.inverse(u)); };
    LwyyMoments m;
    m.E0 = adaptive_simpson(pi_at, 0.0, top, 1e-9);
    m.F0 = adaptive_simpson([&](double u) { return pi_at(u) * u; }, 0.0, top, 1e-9);
    return m;
}

LwyySampleSize lwyy_sample_size(const LwyyDesign& d) {
    check_levels(d.alpha, d.power);
    if (d.beta1 == 0.0) throw Error(ErrorCode::HR_ONE, "beta1 must be non-zero");
    if (std::fabs(d.p1 + d.p0 - 1.0) > 1e-12) throw Error(ErrorCode::BAD_INPUT, "allocations must sum to 1");
    LwyySampleSize r;
    r.moments = lwyy_moments(d.mean, d.censoring);
    double E0 = r.moments.E0, F0 = r.moments.F0;
    r.v_beta = (1.0 / (d.p1 * std::exp(d.beta1)) + 1.0 / d.p0) / E0;
    if (d.phi > 0.0) r.v_beta += (d.phi / d.p1 + d.phi / d.p0) * 2.0 * F0 / (E0 * E0);
    double z = z_sum(d.alpha, d.power);
    r.raw = z * z * r.v_beta / (d.beta1 * d.beta1);
    r.ceiling = static_cast<long>(std::ceil(r.raw - 1e-12));
    return r;
}

}  // namespace recur
