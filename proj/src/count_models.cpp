#include <algorithm>
#include <cmath>
#include <limits>

#include "recur/errors.hpp"
#include "recur/regression.hpp"

namespace recur {

CountData to_count_data(const RecurrentEventTable& table) {
    CountData out;
    for (const auto& sp : subject_spans(table)) {
        CountRecord c;
        c.arm = table.rows[sp.begin].arm;
        for (std::size_t k = sp.begin; k < sp.end; ++k) {
            c.count += table.rows[k].event;
            c.exposure = std::max(c.exposure, table.rows[k].tstop);
        }
        out.push_back(c);
    }
    return out;
}

namespace {

struct ArmTotals {
    double n[2] = {0.0, 0.0};
    double c[2] = {0.0, 0.0};
};

ArmTotals totals(const CountData& data) {
    if (data.empty()) throw Error(ErrorCode::EMPTY_INPUT, "no subjects");
    ArmTotals t;
    for (const auto& r : data) {
        if (!(r.exposure > 0.0)) throw Error(ErrorCode::BAD_INPUT, "exposure must be positive");
        t.n[r.arm] += r.count;
        t.c[r.arm] += r.exposure;
    }
    if (t.c[0] <= 0.0 || t.c[1] <= 0.0) throw Error(ErrorCode::DEGENERATE_ARM, "an arm has no subjects");
    return t;
}

double poisson_loglik(const CountData& data, double b0, double b1) {
    double ll = 0.0;
    for (const auto& r : data) {
        double mu = r.exposure * std::exp(b0 + b1 * r.arm);
        ll += r.count * std::log(mu) - mu - std::lgamma(r.count + 1.0);
    }
    return ll;
}

// Fisher scoring for (b0, b1) at fixed phi; returns false if it fails to settle.
bool fit_beta(const CountData& data, double phi, double& b0, double& b1, int max_iter = 50) {
    for (int it = 0; it < max_iter; ++it) {
        double u0 = 0.0, u1 = 0.0, i00 = 0.0, i01 = 0.0, i11 = 0.0;
        for (const auto& r : data) {
            double mu = r.exposure * std::exp(b0 + b1 * r.arm);
            double den = 1.0 + phi * mu;
            double res = (r.count - mu) / den;
            double wt = mu / den;
            u0 += res;
            u1 += r.arm * res;
            i00 += wt;
            i01 += r.arm * wt;
            i11 += r.arm * wt;
        }
        double det = i00 * i11 - i01 * i01;
        if (!(det > 0.0)) return false;
        double s0 = (i11 * u0 - i01 * u1) / det;
        double s1 = (-i01 * u0 + i00 * u1) / det;
        b0 += s0;
        b1 += s1;
        if (!std::isfinite(b0) || !std::isfinite(b1)) return false;
        if (std::fabs(s0) < 1e-12 && std::fabs(s1) < 1e-12) return true;
    }
    return false;
}

struct ThetaStep {
    double theta = 0.0;
    bool ok = true;
    const char* why = "";
};

// Newton iteration on theta = 1/phi with the means held fixed, started from the moment estimate.
ThetaStep theta_ml(const CountData& data, double b0, double b1, int limit) {
    const double eps = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
    double n = static_cast<double>(data.size());
    double m = 0.0;
    for (const auto& r : data) {
        double mu = r.exposure * std::exp(b0 + b1 * r.arm);
        double z = r.count / mu - 1.0;
        m += z * z;
    }
    double th = n / m;
    double del = 1.0;
    int it = 0;
    while (++it < limit && std::fabs(del) > eps) {
        th = std::fabs(th);
        double score = 0.0, info = 0.0;
        for (const auto& r : data) {
            double mu = r.exposure * std::exp(b0 + b1 * r.arm);
            double y = r.count;
            for (int k = 0; k < r.count; ++k) {
                score += 1.0 / (th + k);
                info += 1.0 / ((th + k) * (th + k));
            }
            score += -std::log1p(mu / th) + (mu - y) / (mu + th);
            info -= (mu * mu + th * y) / (th * (mu + th) * (mu + th));
        }
        del = score / info;
        th += del;
        if (!std::isfinite(th)) return {th, false, "dispersion update failed"};
    }
    if (th < 0.0) return {0.0, false, "dispersion estimate truncated at zero"};
    if (it == limit) return {th, false, "dispersion iteration limit reached"};
    return {th, true, ""};
}

void fill_count_coef(FitResult& fit, const CountData& data, double b0, double b1, double phi) {
    double i00 = 0.0, i01 = 0.0, i11 = 0.0;
    for (const auto& r : data) {
        double mu = r.exposure * std::exp(b0 + b1 * r.arm);
        double wt = mu / (1.0 + phi * mu);
        i00 += wt;
        i01 += r.arm * wt;
        i11 += r.arm * wt;
    }
    double det = i00 * i11 - i01 * i01;
    Coefficient c;
    c.beta = b1;
    c.se_naive = std::sqrt(i00 / det);
    finish_coefficient(c);
    fit.coefs = {c};
}

}  // namespace

double nb_loglik(const CountData& data, double b0, double b1, double phi) {
    if (phi <= 0.0) return poisson_loglik(data, b0, b1);
    double ll = 0.0;
    for (const auto& r : data) {
        double mu = r.exposure * std::exp(b0 + b1 * r.arm);
        double a = phi * mu;
        for (int k = 1; k < r.count; ++k) ll += std::log1p(k * phi);
        ll += r.count * std::log(mu) - (r.count + 1.0 / phi) * std::log1p(a) - std::lgamma(r.count + 1.0);
    }
    return ll;
}

FitResult poisson_fit(const CountData& data) {
    ArmTotals t = totals(data);
    FitResult fit;
    fit.model = ModelId::POISSON;
    if (t.n[0] <= 0.0 || t.n[1] <= 0.0) {
        fit.converged = false;
        fit.note = "ZERO_COUNT_ARM";
        Coefficient c;
        c.beta = (t.n[1] > 0.0) ? std::numeric_limits<double>::infinity()
                                : (t.n[0] > 0.0 ? -std::numeric_limits<double>::infinity()
                                                : std::numeric_limits<double>::quiet_NaN());
        c.se_naive = std::numeric_limits<double>::infinity();
        finish_coefficient(c);
        fit.coefs = {c};
        return fit;
    }
    double b0 = std::log(t.n[0] / t.c[0]);
    double b1 = std::log((t.n[1] / t.c[1]) / (t.n[0] / t.c[0]));
    Coefficient c;
    c.beta = b1;
    c.se_naive = std::sqrt(1.0 / t.n[1] + 1.0 / t.n[0]);
    finish_coefficient(c);
    fit.coefs = {c};
    fit.converged = true;
    fit.loglik = poisson_loglik(data, b0, b1);
    fit.dispersion = 0.0;
    return fit;
}

FitResult nb_fit_fixed_phi(const CountData& data, double phi) {
    ArmTotals t = totals(data);
    if (phi <= 0.0 || t.n[0] <= 0.0 || t.n[1] <= 0.0) {
        FitResult f = poisson_fit(data);
        f.model = ModelId::NB;
        return f;
    }
    double b0 = std::log(t.n[0] / t.c[0]);
    double b1 = std::log((t.n[1] / t.c[1]) / (t.n[0] / t.c[0]));
    FitResult fit;
    fit.model = ModelId::NB;
    fit.converged = fit_beta(data, phi, b0, b1);
    fill_count_coef(fit, data, b0, b1, phi);
    fit.loglik = nb_loglik(data, b0, b1, phi);
    fit.dispersion = phi;
    return fit;
}

FitResult nb_fit(const CountData& data, const NbOptions& opt) {
    ArmTotals t = totals(data);
    auto fallback = [&](const std::string& why) {
        FitResult f = poisson_fit(data);
        f.model = ModelId::NB;
        f.fallback_used = true;
        f.note = why;
        return f;
    };
    if (t.n[0] <= 0.0 || t.n[1] <= 0.0) return fallback("ZERO_COUNT_ARM");

    double b0 = std::log(t.n[0] / t.c[0]);
    double b1 = std::log((t.n[1] / t.c[1]) / (t.n[0] / t.c[0]));
    auto in_range = [&](double theta) {
        double phi = 1.0 / theta;
        return phi > opt.phi_min && phi < opt.phi_max;
    };

    ThetaStep ts = theta_ml(data, b0, b1, opt.theta_limit);
    if (!ts.ok) return fallback(ts.why);
    if (!in_range(ts.theta)) return fallback("dispersion left its admissible range");
    double theta = ts.theta;

    const double d1 = std::sqrt(2.0 * std::max(1.0, static_cast<double>(data.size()) - 2.0));
    double del = 1.0;
    double lm = nb_loglik(data, b0, b1, 1.0 / theta);
    double lm0 = lm + 2.0 * d1;
    int iter = 0;
    while (++iter <= opt.max_iter && std::fabs(lm0 - lm) / d1 + std::fabs(del) > opt.tol) {
        double nb0 = b0, nb1 = b1;
        if (!fit_beta(data, 1.0 / theta, nb0, nb1)) return fallback("beta update failed");
        // the dispersion step sees the means from before this regression update
        ts = theta_ml(data, b0, b1, opt.theta_limit);
        if (!ts.ok) return fallback(ts.why);
        if (!in_range(ts.theta)) return fallback("dispersion left its admissible range");
        b0 = nb0;
        b1 = nb1;
        del = theta - ts.theta;
        theta = ts.theta;
        lm0 = lm;
        lm = nb_loglik(data, b0, b1, 1.0 / theta);
    }
    if (iter > opt.max_iter) return fallback("alternation limit reached");

    FitResult fit;
    fit.model = ModelId::NB;
    fit.converged = true;
    fit.iterations = iter;
    fit.dispersion = 1.0 / theta;
    fit.loglik = lm;
    fill_count_coef(fit, data, b0, b1, 1.0 / theta);
    return fit;
}

}  // namespace recur
