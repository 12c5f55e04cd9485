#include "recur/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "recur/csv.hpp"
#include "recur/errors.hpp"
#include "recur/regression.hpp"
#include "recur/scenarios.hpp"
#include "recur/stats.hpp"

namespace recur {

namespace {

const double kZ975 = normal_quantile(0.975);

void fill_from_fit(ReplicateResult& r, const FitResult& f) {
    const Coefficient& c = f.main();
    r.converged = f.converged && !f.monotone;
    r.fallback_used = f.fallback_used;
    r.monotone = f.monotone;
    r.beta = c.beta;
    r.se = c.se();
    r.ci_low = c.beta - kZ975 * r.se;
    r.ci_high = c.beta + kZ975 * r.se;
    r.p_value = c.p_value;
    if (f.dispersion) r.dispersion = *f.dispersion;
    if (!r.converged && r.error.empty()) {
        r.error = error_name(f.monotone ? ErrorCode::MONOTONE_LIKELIHOOD : ErrorCode::NON_CONVERGENCE);
    }
}

template <class F>
void guarded(ReplicateResult& r, F&& fit) {
    try {
        fill_from_fit(r, fit());
    } catch (const Error& e) {
        r.converged = false;
        r.error = error_name(e.code());
    } catch (const std::exception&) {
        r.converged = false;
        r.error = "INTERNAL";
    }
}

std::string join_hist(const std::vector<int>& h) {
    std::string s;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (i) s += ';';
        s += std::to_string(h[i]);
    }
    return s;
}

std::vector<int> split_hist(const std::string& s) {
    std::vector<int> h;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ';')) {
        if (!tok.empty()) h.push_back(std::stoi(tok));
    }
    return h;
}

double parse_num(const std::string& s) {
    if (s == "NA" || s.empty()) return NAN;
    if (s == "Inf") return INFINITY;
    if (s == "-Inf") return -INFINITY;
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw Error(ErrorCode::BAD_INPUT, "bad number '" + s + "' in replicates file");
    }
    return v;
}

const char* kReplicateColumns[] = {"scenario", "replicate",  "model",          "converged",    "fallback",
                                   "monotone", "error",      "beta",           "se",           "ci_low",
                                   "ci_high",  "p_value",    "dispersion",     "study_duration",
                                   "total_events", "first_events", "events_hist"};

}  // namespace

const ModelSummary& EvaluationSummary::of(ModelId m) const {
    for (const auto& s : models) {
        if (s.model == m) return s;
    }
    throw Error(ErrorCode::BAD_INPUT, std::string("no summary for ") + model_name(m));
}

std::optional<double> scenario_truth(const ScenarioConfig& cfg) {
    if (cfg.setup == Setup::S1) return std::log(cfg.effect);
    return std::nullopt;
}

std::vector<ReplicateResult> run_replicate(const ScenarioConfig& cfg, std::uint64_t master_seed, int replicate) {
    std::vector<ReplicateResult> rows(std::size(kHarnessModels));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        rows[k].scenario = cfg.name;
        rows[k].replicate = replicate;
        rows[k].model = kHarnessModels[k];
    }
    Trial trial;
    try {
        trial = generate_trial(cfg, master_seed, static_cast<std::uint64_t>(replicate));
    } catch (const Error& e) {
        for (auto& r : rows) r.error = error_name(e.code());
        return rows;
    }
    for (auto& r : rows) {
        r.study_duration = trial.summary.study_duration;
        r.total_events = trial.summary.total_events;
        r.first_events = trial.summary.first_events;
        r.events_histogram = trial.summary.events_histogram;
    }
    const auto& table = trial.table;
    guarded(rows[0], [&] { return fit_model(table, ModelId::COX); });
    guarded(rows[1], [&] { return nb_fit(to_count_data(table)); });
    // AG and LWYY share one Newton solve; AG reports the model-based SE.
    FitResult lwyy;
    bool have = false;
    guarded(rows[3], [&] {
        lwyy = fit_model(table, ModelId::LWYY);
        have = true;
        return lwyy;
    });
    if (have) {
        guarded(rows[2], [&] {
            FitResult ag = lwyy;
            ag.model = ModelId::AG;
            for (auto& c : ag.coefs) {
                c.se_robust.reset();
                finish_coefficient(c);
            }
            return ag;
        });
    } else {
        rows[2].error = rows[3].error;
    }
    return rows;
}

EvaluationSummary summarize(const std::vector<ReplicateResult>& results, std::optional<double> true_beta,
                            double alpha, bool strict) {
    EvaluationSummary s;
    s.true_beta = true_beta;
    if (!results.empty()) s.scenario = results.front().scenario;

    std::map<int, const ReplicateResult*> per_rep;
    for (const auto& r : results) {
        per_rep.emplace(r.replicate, &r);
    }
    s.replicates = static_cast<int>(per_rep.size());
    double dur = 0.0, ev = 0.0, fe = 0.0;
    int nt = 0;
    for (const auto& [idx, r] : per_rep) {
        if (!std::isfinite(r->study_duration)) {
            ++s.trial_failures;
            continue;
        }
        dur += r->study_duration;
        ev += r->total_events;
        fe += r->first_events;
        ++nt;
    }
    if (nt > 0) {
        s.mean_study_duration = dur / nt;
        s.mean_total_events = ev / nt;
        s.mean_first_events = fe / nt;
    }

    for (ModelId m : kHarnessModels) {
        ModelSummary ms;
        ms.model = m;
        std::vector<const ReplicateResult*> used;
        for (const auto& r : results) {
            if (r.model != m) continue;
            if (r.usable()) used.push_back(&r);
            else ++ms.n_failed;
        }
        ms.n_used = static_cast<int>(used.size());
        if (ms.n_used < 2) {
            if (!strict) {
                s.models.push_back(ms);
                continue;
            }
            throw Error(ErrorCode::TOO_FEW_REPLICATES,
                        std::string(model_name(m)) + ": " + std::to_string(ms.n_used) + " usable replicates");
        }
        const double n = ms.n_used;
        double sb = 0.0, sse = 0.0;
        int rej = 0, cov = 0, fb = 0;
        for (const auto* r : used) {
            sb += r->beta;
            sse += r->se;
            if (r->p_value <= alpha) ++rej;
            if (r->fallback_used) ++fb;
        }
        ms.mean_beta = sb / n;
        ms.mean_effect = std::exp(ms.mean_beta);
        double ss = 0.0;
        for (const auto* r : used) ss += (r->beta - ms.mean_beta) * (r->beta - ms.mean_beta);
        ms.se = std::sqrt(ss / (n - 1.0));
        ms.see = sse / n;
        ms.rejection_rate = rej / n;
        if (m == ModelId::NB) ms.fallback_rate = fb / n;
        if (true_beta) {
            double b = *true_beta, sq = 0.0;
            for (const auto* r : used) {
                sq += (r->beta - b) * (r->beta - b);
                if (r->ci_low <= b && b <= r->ci_high) ++cov;
            }
            ms.bias = ms.mean_beta - b;
            ms.mse = sq / n;
            ms.coverage = cov / n;
        }
        s.models.push_back(ms);
    }
    return s;
}

void write_replicates_header(std::ostream& out) {
    for (std::size_t i = 0; i < std::size(kReplicateColumns); ++i) {
        out << (i ? "," : "") << kReplicateColumns[i];
    }
    out << '\n';
}

void write_replicate_rows(std::ostream& out, const std::vector<ReplicateResult>& rows) {
    for (const auto& r : rows) {
        out << csv::quote(r.scenario) << ',' << r.replicate << ',' << model_name(r.model) << ','
            << (r.converged ? 1 : 0) << ',' << (r.fallback_used ? 1 : 0) << ',' << (r.monotone ? 1 : 0) << ','
            << r.error << ',' << csv::num(r.beta) << ',' << csv::num(r.se) << ',' << csv::num(r.ci_low) << ','
            << csv::num(r.ci_high) << ',' << csv::num(r.p_value) << ',' << csv::num(r.dispersion) << ','
            << csv::num(r.study_duration) << ',' << r.total_events << ',' << r.first_events << ','
            << join_hist(r.events_histogram) << '\n';
    }
}

std::vector<ReplicateResult> read_replicates_csv(std::istream& in) {
    std::vector<std::string> f;
    if (!csv::read_record(in, f)) throw Error(ErrorCode::EMPTY_INPUT, "replicates file is empty");
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < f.size(); ++i) pos[f[i]] = i;
    for (const char* c : kReplicateColumns) {
        if (!pos.count(c)) throw Error(ErrorCode::BAD_INPUT, std::string("missing column ") + c);
    }
    auto col = [&](const char* c) -> const std::string& { return f.at(pos[c]); };
    std::vector<ReplicateResult> out;
    while (csv::read_record(in, f)) {
        if (f.size() == 1 && f[0].empty()) continue;
        if (f.size() != std::size(kReplicateColumns)) {
            throw Error(ErrorCode::BAD_INPUT, "replicates row " + std::to_string(out.size() + 2) + ": wrong width");
        }
        ReplicateResult r;
        r.scenario = col("scenario");
        r.replicate = std::stoi(col("replicate"));
        auto m = parse_model(col("model"));
        if (!m) throw Error(ErrorCode::BAD_INPUT, "unknown model " + col("model"));
        r.model = *m;
        r.converged = col("converged") == "1";
        r.fallback_used = col("fallback") == "1";
        r.monotone = col("monotone") == "1";
        r.error = col("error");
        r.beta = parse_num(col("beta"));
        r.se = parse_num(col("se"));
        r.ci_low = parse_num(col("ci_low"));
        r.ci_high = parse_num(col("ci_high"));
        r.p_value = parse_num(col("p_value"));
        r.dispersion = parse_num(col("dispersion"));
        r.study_duration = parse_num(col("study_duration"));
        r.total_events = std::stoi(col("total_events"));
        r.first_events = std::stoi(col("first_events"));
        r.events_histogram = split_hist(col("events_hist"));
        out.push_back(std::move(r));
    }
    return out;
}

void write_summary_csv(std::ostream& out, const EvaluationSummary& s) {
    out << "scenario,model,replicates,n_used,n_failed,mean_beta,mean_effect,bias,mse,se,see,coverage,"
           "rejection_rate,fallback_rate,mean_study_duration,mean_total_events,mean_first_events\n";
    for (const auto& m : s.models) {
        out << csv::quote(s.scenario) << ',' << model_name(m.model) << ',' << s.replicates << ',' << m.n_used << ','
            << m.n_failed << ',' << csv::num(m.mean_beta) << ',' << csv::num(m.mean_effect) << ','
            << csv::num(m.bias) << ',' << csv::num(m.mse) << ',' << csv::num(m.se) << ',' << csv::num(m.see) << ','
            << csv::num(m.coverage) << ',' << csv::num(m.rejection_rate) << ',' << csv::num(m.fallback_rate) << ','
            << csv::num(s.mean_study_duration) << ',' << csv::num(s.mean_total_events) << ','
            << csv::num(s.mean_first_events) << '\n';
    }
}

ScenarioRun run_scenario(const ScenarioConfig& cfg, int n_replicates, std::uint64_t master_seed,
                         const RunOptions& opt) {
    if (n_replicates < 1) throw Error(ErrorCode::BAD_INPUT, "at least one replicate is required");
    cfg.validate();
    const int n = n_replicates;
    const std::size_t per = std::size(kHarnessModels);
    std::vector<std::vector<ReplicateResult>> slots(n);
    std::vector<char> done(n, 0);
    int start = 0;

    namespace fs = std::filesystem;
    const bool persist = !opt.out_dir.empty();
    fs::path rep_path, echo_path;
    std::ofstream rep_out;
    std::string echo;
    if (persist) {
        fs::create_directories(opt.out_dir);
        rep_path = fs::path(opt.out_dir) / "replicates.csv";
        echo_path = fs::path(opt.out_dir) / "config.echo";
        echo = echo_config(cfg) + "seed = " + std::to_string(master_seed) + "\n";
        if (opt.resume && fs::exists(rep_path) && fs::exists(echo_path)) {
            std::ifstream e(echo_path);
            std::stringstream buf;
            buf << e.rdbuf();
            if (buf.str().rfind(echo, 0) != 0) {
                throw Error(ErrorCode::BAD_INPUT, "resume: config.echo does not match this configuration");
            }
            std::ifstream in(rep_path);
            auto old = read_replicates_csv(in);
            std::map<int, std::vector<ReplicateResult>> by_rep;
            for (auto& r : old) by_rep[r.replicate].push_back(std::move(r));
            while (start < n && by_rep.count(start) && by_rep[start].size() == per) {
                slots[start] = std::move(by_rep[start]);
                done[start] = 1;
                ++start;
            }
        }
        {
            std::ofstream e(echo_path, std::ios::trunc);
            e << echo << "replicates = " << n << '\n';
        }
        rep_out.open(rep_path, std::ios::trunc);
        write_replicates_header(rep_out);
        for (int i = 0; i < start; ++i) write_replicate_rows(rep_out, slots[i]);
        rep_out.flush();
    }

    int threads = opt.threads > 0 ? opt.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::max(1, std::min(threads, n - start));

    std::atomic<int> next{start};
    std::mutex mu;
    std::condition_variable cv;
    int completed = start;

    auto worker = [&] {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= n) return;
            auto rows = run_replicate(cfg, master_seed, i);
            std::lock_guard<std::mutex> lk(mu);
            slots[i] = std::move(rows);
            done[i] = 1;
            ++completed;
            cv.notify_one();
        }
    };
    std::vector<std::thread> pool;
    if (start < n) {
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    int written = start;
    int reported = start;
    {
        std::unique_lock<std::mutex> lk(mu);
        while (written < n) {
            cv.wait(lk, [&] { return completed > reported || completed == n; });
            int prefix = written;
            while (prefix < n && done[prefix]) ++prefix;
            reported = completed;
            bool flush = prefix - written >= opt.flush_every || prefix == n;
            if (flush) {
                if (persist) {
                    for (int i = written; i < prefix; ++i) write_replicate_rows(rep_out, slots[i]);
                    rep_out.flush();
                }
                written = prefix;
                if (opt.progress) opt.progress(written, n);
            }
        }
    }
    for (auto& t : pool) t.join();

    ScenarioRun run;
    run.results.reserve(static_cast<std::size_t>(n) * per);
    for (auto& s : slots) {
        for (auto& r : s) run.results.push_back(std::move(r));
    }
    run.summary = summarize(run.results, scenario_truth(cfg), 0.05, false);
    if (persist) {
        std::ofstream out(fs::path(opt.out_dir) / "summary.csv", std::ios::trunc);
        write_summary_csv(out, run.summary);
    }
    return run;
}

}  // namespace recur
