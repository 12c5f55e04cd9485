#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "helpers.hpp"
#include "recur/errors.hpp"
#include "recur/nonparam.hpp"

using namespace recur;
using doctest::Approx;

namespace {

// Five subjects: A events 2, 5 censored 13; B 7, 11, 16 / 25; C none / 21; D none / 25; E 9 / 25.
RecurrentEventTable five_subjects() {
    RecurrentEventTable t;
    testutil::add_subject(t, "A", 0, {2, 5}, 13);
    testutil::add_subject(t, "B", 1, {7, 11, 16}, 25);
    testutil::add_subject(t, "C", 0, {}, 21);
    testutil::add_subject(t, "D", 1, {}, 25);
    testutil::add_subject(t, "E", 0, {9}, 25);
    return t;
}

struct Subj {
    int arm;
    double censor;
    std::vector<double> ev;
};

std::vector<Subj> subjects_of(const RecurrentEventTable& t) {
    std::vector<Subj> out;
    for (const auto& sp : subject_spans(t)) {
        Subj s{t.rows[sp.begin].arm, 0.0, {}};
        for (auto k = sp.begin; k < sp.end; ++k) {
            if (t.rows[k].event) s.ev.push_back(t.rows[k].tstop);
            s.censor = std::max(s.censor, t.rows[k].tstop);
        }
        out.push_back(s);
    }
    return out;
}

// Direct evaluation of the mean function and its clustered variance at t.
std::pair<double, double> cmf_oracle(const RecurrentEventTable& t, double at) {
    auto subs = subjects_of(t);
    std::set<double> times;
    for (auto& s : subs) for (double e : s.ev) if (e <= at) times.insert(e);
    std::vector<double> psi(subs.size(), 0.0);
    double mu = 0.0;
    for (double u : times) {
        double y = 0, d = 0;
        for (auto& s : subs) {
            if (s.censor >= u) y += 1;
            d += static_cast<double>(std::count(s.ev.begin(), s.ev.end(), u));
        }
        double dmu = d / y;
        mu += dmu;
        for (std::size_t i = 0; i < subs.size(); ++i) {
            if (subs[i].censor < u) continue;
            double dn = static_cast<double>(std::count(subs[i].ev.begin(), subs[i].ev.end(), u));
            psi[i] += (dn - dmu) / y;
        }
    }
    double v = 0;
    for (double p : psi) v += p * p;
    return {mu, v};
}

}  // namespace

TEST_CASE("first-event estimators on the five-subject data") {
    auto fe = first_event_data(five_subjects());
    REQUIRE(fe.size() == 5);
    auto na = nelson_aalen(fe);
    auto km = kaplan_meier(fe);
    CHECK(na.at(9) == Approx(1.0 / 5 + 1.0 / 4 + 1.0 / 3).epsilon(1e-14));
    CHECK(na.at(9) == Approx(0.7833).epsilon(1e-4));
    CHECK(km.at(9, 1.0) == Approx(0.4).epsilon(1e-14));
    CHECK(km.at(1, 1.0) == 1.0);
}

TEST_CASE("mean cumulative function on the five-subject data") {
    auto f = cmf(five_subjects());
    CHECK(f.at(11) == Approx(1.0).epsilon(1e-14));
    CHECK(f.at(16) == Approx(1.25).epsilon(1e-14));
    CHECK(f.at(100) == Approx(1.25).epsilon(1e-14));
    auto [mu, v] = cmf_oracle(five_subjects(), 16);
    CHECK(f.variance.back() == Approx(v).epsilon(1e-12));
    auto ci = cmf_interval(f.at(16), f.variance.back());
    CHECK(ci.low < 1.25);
    CHECK(ci.high > 1.25);
    CHECK(std::sqrt(ci.low * ci.high) == Approx(1.25).epsilon(1e-12));
}

TEST_CASE("single subject") {
    RecurrentEventTable t;
    testutil::add_subject(t, "S", 0, {1, 2, 3}, 4);
    auto f = cmf(t);
    CHECK(f.values.back() == 3.0);
    CHECK(f.variance.back() == Approx(0.0));
}

TEST_CASE("empty input is rejected") {
    CHECK_THROWS_AS(nelson_aalen({}), Error);
    CHECK_THROWS_AS(cmf(RecurrentEventTable{}), Error);
}

TEST_CASE("cmf_test examples") {
    RecurrentEventTable sym;
    testutil::add_subject(sym, "a", 0, {1, 3}, 5);
    testutil::add_subject(sym, "b", 1, {1, 3}, 5);
    testutil::add_subject(sym, "c", 0, {2}, 4);
    testutil::add_subject(sym, "d", 1, {2}, 4);
    auto r = cmf_test(sym, 10);
    CHECK(r.w == Approx(0.0));
    CHECK(r.p_value == Approx(1.0));

    RecurrentEventTable two;
    testutil::add_subject(two, "x", 0, {1}, 2);
    testutil::add_subject(two, "y", 1, {}, 2);
    CHECK(cmf_test(two, 2).w == Approx(-0.5).epsilon(1e-14));

    RecurrentEventTable one_arm;
    testutil::add_subject(one_arm, "x", 0, {1}, 2);
    try {
        cmf_test(one_arm, 2);
        FAIL("expected DEGENERATE_ARM");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DEGENERATE_ARM);
    }
}

TEST_CASE("cmf_test ignores events after tau") {
    RecurrentEventTable t;
    testutil::add_subject(t, "x", 0, {1, 8}, 10);
    testutil::add_subject(t, "y", 1, {9}, 10);
    CHECK(cmf_test(t, 5).w == Approx(-0.5).epsilon(1e-14));
}

TEST_CASE("property: KM is the product-limit of NA increments") {
    std::mt19937_64 g(21);
    for (int rep = 0; rep < 30; ++rep) {
        auto fe = first_event_data(testutil::random_tied_table(g, 25));
        bool any = std::any_of(fe.begin(), fe.end(), [](auto& x) { return x.event == 1; });
        if (!any) continue;
        auto na = nelson_aalen(fe);
        auto km = kaplan_meier(fe);
        REQUIRE(na.times == km.times);
        double s = 1.0, prev = 0.0;
        for (std::size_t k = 0; k < na.times.size(); ++k) {
            s *= 1.0 - (na.values[k] - prev);
            prev = na.values[k];
            CHECK(km.values[k] == Approx(s).epsilon(1e-12));
        }
    }
}

TEST_CASE("property: mean function of first events equals Nelson-Aalen") {
    std::mt19937_64 g(22);
    for (int rep = 0; rep < 30; ++rep) {
        auto t = testutil::random_table(g, 20);
        auto first = first_event_rows(t);
        auto fe = first_event_data(t);
        if (std::none_of(fe.begin(), fe.end(), [](auto& x) { return x.event == 1; })) continue;
        auto a = cmf(first);
        auto b = nelson_aalen(fe);
        REQUIRE(a.times == b.times);
        for (std::size_t k = 0; k < a.values.size(); ++k) CHECK(a.values[k] == Approx(b.values[k]).epsilon(1e-12));
    }
}

TEST_CASE("property: mean function matches the direct oracle") {
    std::mt19937_64 g(23);
    for (int rep = 0; rep < 20; ++rep) {
        auto t = rep % 2 ? testutil::random_tied_table(g, 15) : testutil::random_table(g, 15);
        auto f = cmf(t);
        for (std::size_t k = 0; k < f.times.size(); ++k) {
            auto [mu, v] = cmf_oracle(t, f.times[k]);
            CHECK(f.values[k] == Approx(mu).epsilon(1e-12));
            CHECK(f.variance[k] == Approx(v).epsilon(1e-10));
        }
    }
}

TEST_CASE("property: swapping arms negates the test contrast") {
    std::mt19937_64 g(24);
    for (int rep = 0; rep < 30; ++rep) {
        auto t = testutil::random_tied_table(g, 20);
        auto s = t;
        for (auto& r : s.rows) r.arm = 1 - r.arm;
        auto a = cmf_test(t, 8);
        auto b = cmf_test(s, 8);
        CHECK(a.w == Approx(-b.w).epsilon(1e-12));
        CHECK(a.variance == Approx(b.variance).epsilon(1e-12));
        CHECK(a.p_value == Approx(b.p_value).epsilon(1e-10));
    }
}

TEST_CASE("property: duplicating every subject leaves the test contrast unchanged") {
    std::mt19937_64 g(25);
    for (int rep = 0; rep < 20; ++rep) {
        auto t = testutil::random_table(g, 16);
        auto d = t;
        for (auto r : t.rows) {
            r.id += "_dup";
            d.rows.push_back(r);
        }
        auto a = cmf_test(t, 6);
        auto b = cmf_test(d, 6);
        CHECK(b.w == Approx(2.0 * a.w).epsilon(1e-12));
        CHECK(b.variance == Approx(4.0 * a.variance / 2.0).epsilon(1e-10));
    }
}
