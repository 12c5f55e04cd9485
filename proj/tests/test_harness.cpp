#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "recur/errors.hpp"
#include "recur/harness.hpp"
#include "recur/scenarios.hpp"

using namespace recur;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

ReplicateResult row(int rep, ModelId m, double beta, double se, double p) {
    ReplicateResult r;
    r.scenario = "toy";
    r.replicate = rep;
    r.model = m;
    r.converged = true;
    r.beta = beta;
    r.se = se;
    r.ci_low = beta - 1.959963984540054 * se;
    r.ci_high = beta + 1.959963984540054 * se;
    r.p_value = p;
    r.study_duration = 100.0 + rep;
    r.total_events = 10 + rep;
    r.first_events = 5;
    return r;
}

std::vector<ReplicateResult> toy(double b0, double b1, double p0, double p1) {
    std::vector<ReplicateResult> v;
    for (int rep = 0; rep < 2; ++rep) {
        for (ModelId m : kHarnessModels) v.push_back(row(rep, m, rep ? b1 : b0, 0.5, rep ? p1 : p0));
    }
    return v;
}

ScenarioConfig small_config() {
    ScenarioConfig c = *find_scenario("S1/PPMS/effect/hetero1");
    c.n = 200;
    c.n_first_events = 50;
    c.end_recruit = 60;
    return c;
}

fs::path fresh_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("recur_harness_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0 || (std::isnan(a) && std::isnan(b)); }

void check_same(const EvaluationSummary& a, const EvaluationSummary& b) {
    CHECK(a.replicates == b.replicates);
    CHECK(same_bits(a.mean_study_duration, b.mean_study_duration));
    CHECK(same_bits(a.mean_total_events, b.mean_total_events));
    REQUIRE(a.models.size() == b.models.size());
    for (std::size_t k = 0; k < a.models.size(); ++k) {
        const auto &x = a.models[k], &y = b.models[k];
        CHECK(x.n_used == y.n_used);
        CHECK(x.n_failed == y.n_failed);
        CHECK(same_bits(x.mean_beta, y.mean_beta));
        CHECK(same_bits(x.bias, y.bias));
        CHECK(same_bits(x.mse, y.mse));
        CHECK(same_bits(x.se, y.se));
        CHECK(same_bits(x.see, y.see));
        CHECK(same_bits(x.coverage, y.coverage));
        CHECK(same_bits(x.rejection_rate, y.rejection_rate));
        CHECK(same_bits(x.fallback_rate, y.fallback_rate));
    }
}

}  // namespace

TEST_CASE("summary of two estimates") {
    auto s = summarize(toy(0.1, -0.1, 0.01, 0.20), 0.0);
    const auto& c = s.of(ModelId::COX);
    CHECK(c.n_used == 2);
    CHECK(c.bias == Approx(0.0));
    CHECK(c.se == Approx(std::sqrt(0.02)).epsilon(1e-14));
    CHECK(c.se == Approx(0.1414).epsilon(1e-4));
    CHECK(c.mse == Approx(0.01).epsilon(1e-14));
    CHECK(c.rejection_rate == 0.5);
    CHECK(c.see == 0.5);
    CHECK(c.mean_effect == Approx(1.0));
    CHECK(s.mean_study_duration == 100.5);
    CHECK(s.mean_total_events == 10.5);
}

TEST_CASE("coverage counts intervals containing the truth") {
    auto v = toy(0.0, 0.0, 0.5, 0.5);
    for (auto& r : v) {
        r.ci_low = -1;
        r.ci_high = 1;
    }
    auto s = summarize(v, 0.0);
    for (const auto& m : s.models) CHECK(m.coverage == 1.0);
    auto far = summarize(v, 2.0);
    for (const auto& m : far.models) CHECK(far.of(m.model).coverage == 0.0);
    auto none = summarize(v, std::nullopt);
    CHECK(std::isnan(none.of(ModelId::AG).bias));
}

TEST_CASE("failed fits are excluded and counted") {
    auto v = toy(0.1, -0.1, 0.01, 0.20);
    auto extra = row(2, ModelId::COX, 9.0, 1.0, 0.0);
    extra.converged = false;
    extra.error = "NON_CONVERGENCE";
    v.push_back(extra);
    auto s = summarize(v, 0.0);
    CHECK(s.of(ModelId::COX).n_used == 2);
    CHECK(s.of(ModelId::COX).n_failed == 1);
    CHECK(s.of(ModelId::COX).mean_beta == Approx(0.0));
}

TEST_CASE("too few usable replicates") {
    auto v = toy(0.1, -0.1, 0.01, 0.2);
    for (auto& r : v) {
        if (r.model == ModelId::LWYY && r.replicate == 1) r.error = "NO_EVENTS";
    }
    try {
        summarize(v, 0.0);
        FAIL("expected TOO_FEW_REPLICATES");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TOO_FEW_REPLICATES);
    }
    auto lenient = summarize(v, 0.0, 0.05, false);
    CHECK(lenient.of(ModelId::LWYY).n_used == 1);
    CHECK(std::isnan(lenient.of(ModelId::LWYY).mean_beta));
    CHECK(lenient.of(ModelId::COX).n_used == 2);
}

TEST_CASE("replicate rows") {
    auto cfg = small_config();
    auto rows = run_replicate(cfg, 7, 3);
    REQUIRE(rows.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(rows[k].model == kHarnessModels[k]);
        CHECK(rows[k].replicate == 3);
        CHECK(rows[k].first_events == 50);
    }
    CHECK(rows[2].beta == rows[3].beta);
    CHECK(rows[2].ci_low <= rows[2].beta);

    auto bad = cfg;
    bad.n_first_events = 200;
    bad.lambda = 0.05;
    auto failed = run_replicate(bad, 7, 0);
    for (const auto& r : failed) {
        CHECK_FALSE(r.usable());
        CHECK(r.error == "INSUFFICIENT_EVENTS");
    }
}

TEST_CASE("persisted results reproduce the summary and are thread independent") {
    auto cfg = small_config();
    auto d1 = fresh_dir("t1"), d3 = fresh_dir("t3");
    RunOptions o1;
    o1.threads = 1;
    o1.out_dir = d1.string();
    o1.flush_every = 3;
    auto run1 = run_scenario(cfg, 12, 42, o1);
    RunOptions o3 = o1;
    o3.threads = 3;
    o3.out_dir = d3.string();
    auto run3 = run_scenario(cfg, 12, 42, o3);

    CHECK(slurp(d1 / "replicates.csv") == slurp(d3 / "replicates.csv"));
    CHECK(slurp(d1 / "summary.csv") == slurp(d3 / "summary.csv"));
    CHECK(slurp(d1 / "config.echo") == slurp(d3 / "config.echo"));
    REQUIRE(run1.results.size() == 48);

    std::ifstream in(d1 / "replicates.csv");
    auto back = read_replicates_csv(in);
    REQUIRE(back.size() == run1.results.size());
    for (std::size_t k = 0; k < back.size(); ++k) {
        CHECK(same_bits(back[k].beta, run1.results[k].beta));
        CHECK(same_bits(back[k].se, run1.results[k].se));
        CHECK(back[k].events_histogram == run1.results[k].events_histogram);
    }
    check_same(summarize(back, scenario_truth(cfg), 0.05, false), run1.summary);

    for (const auto& m : run1.summary.models) {
        CHECK(m.rejection_rate >= 0.0);
        CHECK(m.rejection_rate <= 1.0);
        CHECK(m.coverage >= 0.0);
        CHECK(m.coverage <= 1.0);
        CHECK(m.mse >= m.bias * m.bias);
    }
    for (std::size_t k = 0; k + 3 < run1.results.size(); k += 4) {
        CHECK(run1.results[k + 2].beta == run1.results[k + 3].beta);
    }
    fs::remove_all(d1);
    fs::remove_all(d3);
}

TEST_CASE("resume continues an interrupted run") {
    auto cfg = small_config();
    auto full = fresh_dir("full"), part = fresh_dir("part");
    RunOptions o;
    o.threads = 2;
    o.out_dir = full.string();
    run_scenario(cfg, 10, 5, o);

    o.out_dir = part.string();
    run_scenario(cfg, 4, 5, o);
    // leave half of replicate 4 behind, as if interrupted mid-write
    {
        auto text = slurp(full / "replicates.csv");
        std::istringstream lines(text);
        std::string line, kept;
        for (int k = 0; k < 1 + 4 * 4 + 2 && std::getline(lines, line); ++k) kept += line + "\n";
        std::ofstream(part / "replicates.csv", std::ios::trunc) << kept;
    }
    o.resume = true;
    int last = 0;
    o.progress = [&](int done, int) { last = done; };
    run_scenario(cfg, 10, 5, o);
    CHECK(last == 10);
    CHECK(slurp(full / "replicates.csv") == slurp(part / "replicates.csv"));
    CHECK(slurp(full / "summary.csv") == slurp(part / "summary.csv"));

    auto other = cfg;
    other.phi = 0.5;
    CHECK_THROWS_AS(run_scenario(other, 10, 5, o), Error);
    fs::remove_all(full);
    fs::remove_all(part);
}

TEST_CASE("scenario library and config files") {
    const auto& lib = scenario_library();
    REQUIRE(lib.size() == 12);
    auto c = find_scenario("S2/PPMS/noeffect/hetero2");
    REQUIRE(c.has_value());
    CHECK(c->setup == Setup::S2);
    CHECK(c->phi == 1.0);
    CHECK(c->effect == 1.0);
    CHECK_FALSE(find_scenario("S3/PPMS/effect/homo").has_value());

    std::istringstream doc(
        "# base\n"
        "scenario = S1/PPMS/effect/hetero1\n"
        "n = 400   # smaller\n"
        "n_first_events = 100\n"
        "endpoint.reference = roving\n");
    auto p = parse_config(doc);
    CHECK(p.phi == 0.15);
    CHECK(p.effect == 0.7);
    CHECK(p.n == 400);
    CHECK(p.endpoint.reference == Reference::ROVING);

    std::istringstream again(echo_config(p));
    CHECK(echo_config(parse_config(again)) == echo_config(p));

    std::istringstream unknown("colour = blue\n");
    CHECK_THROWS_AS(parse_config(unknown), Error);
    std::istringstream bad_value("endpoint.confirm_weeks = 18\n");
    CHECK_THROWS_AS(parse_config(bad_value), Error);
    std::istringstream invalid("n = 10\nn_first_events = 20\n");
    CHECK_THROWS_AS(parse_config(invalid), Error);
}
