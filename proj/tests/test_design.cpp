#include <doctest.h>

#include <cmath>
#include <random>

#include "recur/design.hpp"
#include "recur/errors.hpp"
#include "recur/regression.hpp"
#include "recur/stats.hpp"

using namespace recur;
using doctest::Approx;

namespace {

constexpr double kZ975 = 1.959963984540054;
constexpr double kZ80 = 0.8416212335729143;
constexpr double kZ85 = 1.0364333894937898;
constexpr double kZ90 = 1.2815515655446004;

// Composite Simpson with a fixed, fine grid.
template <class F>
double simpson(F f, double a, double b, int n = 200000) {
    double h = (b - a) / n, s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

LwyyDesign constant_design(double tau) {
    LwyyDesign d;
    d.beta1 = std::log(0.7);
    d.phi = 0.5;
    d.mean.shape = RateShape::CONSTANT;
    d.mean.rate = 0.003;
    d.censoring.tau = tau;
    return d;
}

}  // namespace

TEST_CASE("normal quantiles") {
    CHECK(normal_quantile(0.975) == Approx(kZ975).epsilon(1e-13));
    CHECK(normal_quantile(0.8) == Approx(kZ80).epsilon(1e-13));
    CHECK(normal_quantile(0.85) == Approx(kZ85).epsilon(1e-13));
    CHECK(normal_quantile(0.9) == Approx(kZ90).epsilon(1e-13));
    for (double p : {1e-10, 0.001, 0.3, 0.5, 0.77, 0.999999}) CHECK(normal_cdf(normal_quantile(p)) == Approx(p).epsilon(1e-12));
}

TEST_CASE("Schoenfeld event counts") {
    auto r = schoenfeld_events(0.05, 0.8, 0.7);
    double oracle = 4 * (kZ975 + kZ80) * (kZ975 + kZ80) / std::pow(std::log(0.7), 2);
    CHECK(r.raw == Approx(oracle).epsilon(1e-12));
    CHECK(std::fabs(r.raw - 246.79) < 0.01);
    CHECK(r.ceiling == 247);
    CHECK(std::fabs(schoenfeld_events(0.05, 0.8, 0.5).raw - 65.3) < 0.05);
    CHECK(schoenfeld_events(0.05, 0.8, 1.0 / 0.7).raw == Approx(r.raw).epsilon(1e-12));
    try {
        schoenfeld_events(0.05, 0.8, 1.0);
        FAIL("expected HR_ONE");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::HR_ONE);
    }
    CHECK_THROWS_AS(schoenfeld_events(0.0, 0.8, 0.7), Error);
    CHECK_THROWS_AS(schoenfeld_events(0.05, 1.0, 0.7), Error);
}

TEST_CASE("savings from lowering the power target") {
    double s = schoenfeld_savings(0.05, 0.8, 0.85);
    double oracle = 1.0 - std::pow(kZ975 + kZ80, 2) / std::pow(kZ975 + kZ85, 2);
    CHECK(s == Approx(oracle).epsilon(1e-12));
    CHECK(std::round(s * 1e4) / 1e4 == Approx(0.1258).epsilon(1e-12));
}

TEST_CASE("property: event count scales with the squared z sum") {
    for (double alpha : {0.01, 0.05, 0.1}) {
        for (double power : {0.7, 0.8, 0.9, 0.95}) {
            double z = normal_quantile(1 - alpha / 2) + normal_quantile(power);
            CHECK(schoenfeld_events(alpha, power, 0.75).raw / (z * z) ==
                  Approx(4.0 / std::pow(std::log(0.75), 2)).epsilon(1e-12));
            auto d = constant_design(730);
            d.alpha = alpha;
            d.power = power;
            auto base = constant_design(730);
            double zb = kZ975 + kZ80;
            CHECK(lwyy_sample_size(d).raw / (z * z) == Approx(lwyy_sample_size(base).raw / (zb * zb)).epsilon(1e-12));
        }
    }
}

TEST_CASE("censoring survivor and mean follow-up") {
    Censoring c{0.001, 500.0, 0.0};
    CHECK(c.survivor(0.0) == 1.0);
    CHECK(c.survivor(100.0) == Approx(std::exp(-0.1)).epsilon(1e-14));
    CHECK(c.survivor(501.0) == 0.0);
    CHECK(c.mean_followup() == Approx((1 - std::exp(-0.5)) / 0.001).epsilon(1e-12));
    CHECK(Censoring{0.0, 365.0, 0.0}.mean_followup() == 365.0);
    Censoring acc{0.001, 500.0, 200.0};
    double oracle = simpson([&](double t) { return acc.survivor(t); }, 0.0, 500.0);
    CHECK(acc.mean_followup() == Approx(oracle).epsilon(1e-8));
}

TEST_CASE("NB sample size without dispersion") {
    NbDesign d;
    d.beta1_h1 = std::log(0.8);
    d.beta0 = std::log(2.0 / 365.0);
    d.censoring.tau = 365.0;
    auto r = nb_sample_size(d);
    double v0 = 1.0 / 2.0 + 1.0 / 2.0;
    double v1 = 1.0 / 2.0 + 1.0 / 1.6;
    CHECK(r.var_h0 == Approx(v0).epsilon(1e-12));
    CHECK(r.var_h1 == Approx(v1).epsilon(1e-12));
    double per_arm = std::pow(std::sqrt(v0) * kZ975 + std::sqrt(v1) * kZ80, 2) / std::pow(std::log(0.8), 2);
    CHECK(r.per_arm == Approx(per_arm).epsilon(1e-12));
    CHECK(r.total == 2 * static_cast<long>(std::ceil(per_arm)));
}

TEST_CASE("NB sample size grows with dispersion") {
    NbDesign d;
    d.beta1_h1 = std::log(0.8);
    d.beta0 = std::log(1.0 / 365.0);
    d.censoring = {0.00025, 730.0, 0.0};
    double prev = nb_sample_size(d).per_arm;
    for (double phi : {0.1, 0.2, 0.4, 0.8, 1.6}) {
        d.phi = phi;
        double n = nb_sample_size(d).per_arm;
        CHECK(n > prev);
        prev = n;
    }
    d.beta1_h0 = d.beta1_h1;
    CHECK_THROWS_AS(nb_sample_size(d), Error);
}

TEST_CASE("property: NB sample size nearly scales with the squared z sum") {
    NbDesign d;
    d.beta1_h1 = std::log(0.95);
    d.beta0 = std::log(2.0 / 365.0);
    d.phi = 0.5;
    d.censoring.tau = 365.0;
    double base = nb_sample_size(d).per_arm / std::pow(kZ975 + kZ80, 2);
    for (double power : {0.7, 0.9, 0.95}) {
        d.power = power;
        double z = kZ975 + normal_quantile(power);
        CHECK(std::fabs(nb_sample_size(d).per_arm / (z * z) / base - 1.0) < 0.005);
    }
}

TEST_CASE("NB sample size delivers the nominal power in simulation") {
    NbDesign d;
    d.beta1_h1 = std::log(0.8);
    d.beta0 = std::log(2.0 / 365.0);
    d.phi = 2.0;
    d.censoring.tau = 365.0;
    auto r = nb_sample_size(d);
    const int n = static_cast<int>(r.per_arm_ceiling);
    std::mt19937_64 g(2024);
    std::gamma_distribution<double> frail(1.0 / d.phi, d.phi);
    const int reps = 4000;
    int reject = 0;
    for (int rep = 0; rep < reps; ++rep) {
        CountData data;
        for (int arm = 0; arm < 2; ++arm) {
            double mu = 2.0 * (arm ? 0.8 : 1.0);
            for (int i = 0; i < n; ++i) {
                int y = std::poisson_distribution<int>(mu * frail(g))(g);
                data.push_back({arm, y, 365.0});
            }
        }
        auto f = nb_fit(data);
        if (f.main().p_value <= 0.05) ++reject;
    }
    double power = static_cast<double>(reject) / reps;
    CHECK(std::fabs(power - 0.8) <= 0.02);
}

TEST_CASE("LWYY moments under a constant rate match closed forms") {
    for (double tau : {100.0, 365.0, 1000.0}) {
        auto m = lwyy_moments(constant_design(tau).mean, Censoring{0.0, tau, 0.0});
        double r = 0.003;
        CHECK(m.E0 == Approx(r * tau).epsilon(1e-8));
        CHECK(m.F0 == Approx(r * r * tau * tau / 2).epsilon(1e-8));
    }
}

TEST_CASE("LWYY sample size structure") {
    auto d = constant_design(730);
    d.phi = 0.0;
    auto r = lwyy_sample_size(d);
    double E0 = 0.003 * 730;
    CHECK(r.v_beta == Approx((1 / (0.5 * 0.7) + 1 / 0.5) / E0).epsilon(1e-9));
    d.phi = 0.5;
    auto s = lwyy_sample_size(d);
    double F0 = 0.003 * 0.003 * 730 * 730 / 2;
    CHECK(s.v_beta == Approx(r.v_beta + (0.5 / 0.5 + 0.5 / 0.5) * 2 * F0 / (E0 * E0)).epsilon(1e-9));
    CHECK(s.raw == Approx(std::pow(kZ975 + kZ80, 2) * s.v_beta / std::pow(std::log(0.7), 2)).epsilon(1e-12));

    double prev = INFINITY;
    for (double tau : {180.0, 365.0, 730.0, 1460.0}) {
        auto e = constant_design(tau);
        e.censoring.lambda = 0.0005;
        double n = lwyy_sample_size(e).raw;
        CHECK(n < prev);
        prev = n;
    }
    d.beta1 = 0.0;
    CHECK_THROWS_AS(lwyy_sample_size(d), Error);
    d = constant_design(730);
    d.p1 = 0.6;
    CHECK_THROWS_AS(lwyy_sample_size(d), Error);
}

TEST_CASE("LWYY moments for Weibull and piecewise rates match direct quadrature") {
    MeanFunction w;
    w.shape = RateShape::WEIBULL;
    w.scale = 0.0008;
    w.power = 1.3;
    Censoring c{0.001, 900.0, 150.0};
    auto m = lwyy_moments(w, c);
    double e = simpson([&](double t) { return c.survivor(t) * w.scale * w.power * std::pow(t, w.power - 1); }, 0, 900);
    double f = simpson([&](double t) {
        return c.survivor(t) * w.scale * std::pow(t, w.power) * w.scale * w.power * std::pow(t, w.power - 1);
    }, 0, 900);
    CHECK(m.E0 == Approx(e).epsilon(1e-7));
    CHECK(m.F0 == Approx(f).epsilon(1e-7));

    MeanFunction p;
    p.shape = RateShape::PIECEWISE;
    p.breaks = {0, 100, 400};
    p.rates = {0.004, 0.002, 0.003};
    CHECK(p.cumulative(250) == Approx(0.4 + 0.3).epsilon(1e-14));
    CHECK(p.inverse(p.cumulative(250)) == Approx(250).epsilon(1e-12));
    CHECK(p.intensity(399) == 0.002);
    auto pm = lwyy_moments(p, c);
    // one Simpson pass per constant-rate piece, split again at the start of accrual
    double pe = 0.0, pf = 0.0;
    const double cuts[] = {0, 100, 400, 750, 900};
    for (int k = 0; k < 4; ++k) {
        double r = p.intensity(cuts[k]);
        pe += simpson([&](double t) { return c.survivor(t) * r; }, cuts[k], cuts[k + 1], 20000);
        pf += simpson([&](double t) { return c.survivor(t) * p.cumulative(t) * r; }, cuts[k], cuts[k + 1], 20000);
    }
    CHECK(pm.E0 == Approx(pe).epsilon(1e-8));
    CHECK(pm.F0 == Approx(pf).epsilon(1e-8));
}
