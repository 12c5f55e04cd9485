#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "recur/csv.hpp"
#include "recur/data_model.hpp"
#include "recur/design.hpp"
#include "recur/endpoint.hpp"
#include "recur/errors.hpp"
#include "recur/harness.hpp"
#include "recur/nonparam.hpp"
#include "recur/regression.hpp"
#include "recur/scenarios.hpp"
#include "recur/simgen.hpp"

using namespace recur;

namespace {

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::BAD_INPUT, "cannot open " + path);
    return in;
}

// Writes to a file, or stdout when path is empty or "-".
template <class F>
void emit(const std::string& path, F&& body) {
    if (path.empty() || path == "-") {
        body(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::BAD_INPUT, "cannot write " + path);
    body(out);
}

std::string fixed(double x, int digits) {
    std::ostringstream o;
    o << std::fixed << std::setprecision(digits) << x;
    return o.str();
}

ScenarioConfig load_scenario(const std::string& scenario, const std::string& config,
                             const std::vector<std::string>& sets) {
    ScenarioConfig cfg;
    if (!config.empty()) {
        cfg = parse_config_file(config);
    } else if (!scenario.empty()) {
        auto s = find_scenario(scenario);
        if (!s) throw Error(ErrorCode::BAD_INPUT, "unknown scenario " + scenario + " (see list-scenarios)");
        cfg = *s;
    } else {
        cfg.name = "custom";
    }
    for (const auto& kv : sets) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::BAD_INPUT, "--set expects key=value, got " + kv);
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

void print_report(std::ostream& out, const ValidationReport& rep) {
    for (const auto& v : rep.violations) out << "row " << v.row << ": " << v.message << '\n';
}

RecurrentEventTable load_valid_table(const std::string& path) {
    auto in = open_in(path);
    RecurrentEventTable t = read_event_csv(in);
    if (t.rows.empty()) throw Error(ErrorCode::EMPTY_INPUT, path + " has no rows");
    auto rep = validate_table(t);
    if (!rep.ok()) {
        print_report(std::cerr, rep);
        throw Error(ErrorCode::BAD_INPUT, path + ": " + std::to_string(rep.violations.size()) + " violation(s)");
    }
    return t;
}

void print_fit(std::ostream& out, const FitResult& f) {
    out << "model,term,beta,se_naive,se_robust,effect,ci_low,ci_high,p_value,converged,fallback_used,loglik,"
           "iterations,dispersion\n";
    for (const auto& c : f.coefs) {
        out << model_name(f.model) << ',' << c.term << ',' << csv::num(c.beta) << ',' << csv::num(c.se_naive) << ','
            << (c.se_robust ? csv::num(*c.se_robust) : "NA") << ',' << csv::num(c.effect) << ','
            << csv::num(c.ci_low) << ',' << csv::num(c.ci_high) << ',' << csv::num(c.p_value) << ','
            << (f.converged ? 1 : 0) << ',' << (f.fallback_used ? 1 : 0) << ',' << csv::num(f.loglik) << ','
            << f.iterations << ',' << (f.dispersion ? csv::num(*f.dispersion) : "NA") << '\n';
    }
    if (!f.note.empty()) std::cerr << "note: " << f.note << '\n';
}

EventTiming parse_timing(const std::string& s) {
    if (s == "onset") return EventTiming::ONSET;
    return EventTiming::CONFIRMATION;
}

Reference parse_reference(const std::string& s) {
    if (s == "roving") return Reference::ROVING;
    return Reference::FIXED;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Recurrent-event trial simulation and analysis"};
    app.require_subcommand(1);

    unsigned hw = std::max(1u, std::thread::hardware_concurrency());

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate one trial as counting-process rows");
    std::string sim_scenario, sim_config, sim_out, sim_panels;
    std::vector<std::string> sim_sets;
    std::uint64_t sim_seed = 0;
    int sim_replicate = 0;
    sim->add_option("--scenario", sim_scenario, "Library scenario name");
    sim->add_option("--config", sim_config, "Flat key = value config file");
    sim->add_option("--set", sim_sets, "Override a config field (key=value)");
    sim->add_option("--seed", sim_seed, "Master seed")->required();
    sim->add_option("--replicate", sim_replicate, "Replicate index")->check(CLI::NonNegativeNumber);
    sim->add_option("--out", sim_out, "Output CSV (default stdout)");
    sim->add_option("--panels,--emit-edss", sim_panels, "S2: write the EDSS panels to this CSV");
    std::string sim_setup;
    double sim_hr = 0.0, sim_phi = -1.0;
    int sim_n = 0;
    sim->add_option("--setup", sim_setup, "s1|s2 (overrides the scenario)")->check(CLI::IsMember({"s1", "s2", "S1", "S2"}));
    sim->add_option("--hr", sim_hr, "Effect on the simulated scale")->check(CLI::PositiveNumber);
    sim->add_option("--phi", sim_phi, "Frailty variance")->check(CLI::NonNegativeNumber);
    sim->add_option("--n", sim_n, "Subjects")->check(CLI::PositiveNumber);

    // simulate-study
    auto* study = app.add_subcommand("simulate-study", "Monte-Carlo study of one scenario");
    std::string st_scenario, st_config, st_out;
    std::vector<std::string> st_sets;
    std::uint64_t st_seed = 0;
    int st_reps = 1000;
    int st_threads = static_cast<int>(hw);
    bool st_resume = false, st_quiet = false;
    study->add_option("--scenario", st_scenario, "Library scenario name");
    study->add_option("--config", st_config, "Flat key = value config file");
    study->add_option("--set", st_sets, "Override a config field (key=value)");
    study->add_option("--replicates", st_reps, "Number of replicates")->check(CLI::PositiveNumber);
    study->add_option("--threads", st_threads, "Worker threads")->check(CLI::PositiveNumber);
    study->add_option("--seed", st_seed, "Master seed")->required();
    study->add_option("--out", st_out, "Output directory")->required();
    study->add_flag("--resume", st_resume, "Continue from complete replicates in --out");
    study->add_flag("--quiet", st_quiet, "No progress output");

    // fit
    auto* fit = app.add_subcommand("fit", "Fit a model to a counting-process CSV");
    std::string fit_model_name, fit_data, fit_out;
    int fit_k = 0;
    bool fit_wlw = false;
    fit->add_option("--model", fit_model_name, "cox|poisson|nb|ag|lwyy|pwp-cp|wlw|lwa|pcrb")->required();
    fit->add_option("--data", fit_data, "Input CSV")->required();
    fit->add_option("--k,--K", fit_k, "Event-specific strata (PWP-CP, WLW, PCRB)")->check(CLI::NonNegativeNumber);
    fit->add_flag("--wlw-input", fit_wlw, "Input is already in WLW layout");
    fit->add_option("--out", fit_out, "Output CSV (default stdout)");

    // derive
    auto* derive = app.add_subcommand("derive", "Derive CDP events from EDSS panels");
    std::string dv_data, dv_out, dv_timing = "confirmation", dv_ref = "fixed";
    int dv_confirm = 12, dv_roving = 24;
    derive->add_option("--data", dv_data, "EDSS CSV (USUBJID,ARMCD,DY,AVAL)")->required();
    derive->add_option("--timing", dv_timing, "onset|confirmation")
        ->check(CLI::IsMember({"onset", "confirmation"}));
    derive->add_option("--confirm-weeks", dv_confirm, "12|24")->check(CLI::IsMember({12, 24}));
    derive->add_option("--reference", dv_ref, "fixed|roving")->check(CLI::IsMember({"fixed", "roving"}));
    derive->add_option("--roving-weeks", dv_roving, "12|24")->check(CLI::IsMember({12, 24}));
    derive->add_option("--out", dv_out, "Output CSV (default stdout)");

    // mcf
    auto* mcf = app.add_subcommand("mcf", "Cumulative mean function by arm");
    std::string mcf_data, mcf_out;
    double mcf_tau = 0.0;
    mcf->add_option("--data", mcf_data, "Counting-process CSV")->required();
    mcf->add_option("--test-tau", mcf_tau, "Also run the two-arm CMF test up to this time");
    mcf->add_option("--out", mcf_out, "Output CSV (default stdout)");

    // samplesize
    auto* ss = app.add_subcommand("samplesize", "Sample-size calculators");
    ss->require_subcommand(1);
    double sc_alpha = 0.05, sc_power = 0.8, sc_hr = 0.7;
    auto* ss_sch = ss->add_subcommand("schoenfeld", "Required first events for a log-rank test");
    ss_sch->add_option("--alpha", sc_alpha, "Two-sided level");
    ss_sch->add_option("--power", sc_power, "Power");
    ss_sch->add_option("--hr", sc_hr, "Target hazard ratio")->required();

    NbDesign nb;
    double nb_hr = 0.7, nb_rate = 0.0;
    auto* ss_nb = ss->add_subcommand("nb", "Negative binomial rate comparison");
    ss_nb->add_option("--alpha", nb.alpha, "Two-sided level");
    ss_nb->add_option("--power", nb.power, "Power");
    ss_nb->add_option("--rr", nb_hr, "Rate ratio under the alternative")->required();
    ss_nb->add_option("--rate", nb_rate, "Control event rate per time unit")->required();
    ss_nb->add_option("--phi", nb.phi, "Dispersion");
    ss_nb->add_option("--tau", nb.censoring.tau, "Maximum follow-up")->required();
    ss_nb->add_option("--lambda", nb.censoring.lambda, "Exponential dropout rate");

    LwyyDesign lw;
    double lw_hr = 0.7;
    std::string lw_shape = "constant";
    auto* ss_lw = ss->add_subcommand("lwyy", "Robust rate-model comparison");
    ss_lw->add_option("--alpha", lw.alpha, "Two-sided level");
    ss_lw->add_option("--power", lw.power, "Power");
    ss_lw->add_option("--rr", lw_hr, "Rate ratio under the alternative")->required();
    ss_lw->add_option("--phi", lw.phi, "Frailty variance");
    ss_lw->add_option("--p1", lw.p1, "Allocation to the treated arm");
    ss_lw->add_option("--shape", lw_shape, "constant|weibull|piecewise")
        ->check(CLI::IsMember({"constant", "weibull", "piecewise"}));
    ss_lw->add_option("--rate", lw.mean.rate, "Constant control rate");
    ss_lw->add_option("--scale", lw.mean.scale, "Weibull: R0(t) = scale * t^power");
    ss_lw->add_option("--shape-power", lw.mean.power, "Weibull exponent");
    ss_lw->add_option("--breaks", lw.mean.breaks, "Piecewise interval starts")->delimiter(',');
    ss_lw->add_option("--rates", lw.mean.rates, "Piecewise rates")->delimiter(',');
    ss_lw->add_option("--tau", lw.censoring.tau, "Maximum follow-up")->required();
    ss_lw->add_option("--lambda", lw.censoring.lambda, "Exponential dropout rate");
    ss_lw->add_option("--accrual", lw.censoring.accrual, "Uniform accrual length");

    // list-scenarios
    auto* list = app.add_subcommand("list-scenarios", "Print the scenario library");

    // validate
    auto* val = app.add_subcommand("validate", "Check a CSV against its layout rules");
    std::string val_data, val_format = "events";
    val->add_option("--data", val_data, "Input CSV")->required();
    val->add_option("--format", val_format, "events|wlw|edss")->check(CLI::IsMember({"events", "wlw", "edss"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*sim) {
            if (!sim_setup.empty()) sim_sets.insert(sim_sets.begin(), "setup=" + sim_setup);
            if (sim_hr > 0.0) sim_sets.push_back("effect=" + csv::num(sim_hr));
            if (sim_phi >= 0.0) sim_sets.push_back("phi=" + csv::num(sim_phi));
            if (sim_n > 0) sim_sets.push_back("n=" + std::to_string(sim_n));
            ScenarioConfig cfg = load_scenario(sim_scenario, sim_config, sim_sets);
            Trial t = generate_trial(cfg, sim_seed, static_cast<std::uint64_t>(sim_replicate), !sim_panels.empty());
            emit(sim_out, [&](std::ostream& o) { write_event_csv(o, t.table); });
            if (!sim_panels.empty()) {
                if (cfg.setup != Setup::S2) throw Error(ErrorCode::BAD_INPUT, "--panels requires an S2 scenario");
                emit(sim_panels, [&](std::ostream& o) { write_edss_csv(o, t.panels); });
            }
            std::cerr << "study_duration=" << csv::num(t.summary.study_duration)
                      << " total_events=" << t.summary.total_events << " first_events=" << t.summary.first_events
                      << '\n';
        } else if (*study) {
            ScenarioConfig cfg = load_scenario(st_scenario, st_config, st_sets);
            RunOptions opt;
            opt.threads = st_threads;
            opt.out_dir = st_out;
            opt.resume = st_resume;
            if (!st_quiet) {
                opt.progress = [](int done, int total) { std::cerr << done << "/" << total << " replicates\n"; };
            }
            ScenarioRun run = run_scenario(cfg, st_reps, st_seed, opt);
            write_summary_csv(std::cout, run.summary);
        } else if (*fit) {
            auto m = parse_model(fit_model_name);
            if (!m) throw Error(ErrorCode::BAD_INPUT, "unknown model " + fit_model_name);
            FitResult f;
            if (fit_wlw) {
                if (*m != ModelId::WLW && *m != ModelId::LWA) {
                    throw Error(ErrorCode::BAD_INPUT, "--wlw-input requires model wlw or lwa");
                }
                auto in = open_in(fit_data);
                WlwTable w = read_wlw_csv(in);
                if (w.rows.empty()) throw Error(ErrorCode::EMPTY_INPUT, fit_data + " has no rows");
                f = fit_wlw_model(w, *m, *m == ModelId::WLW && fit_k > 0);
            } else {
                f = fit_model(load_valid_table(fit_data), *m, fit_k);
            }
            emit(fit_out, [&](std::ostream& o) { print_fit(o, f); });
            if (!f.converged) throw Error(ErrorCode::NON_CONVERGENCE, "fit did not converge");
        } else if (*derive) {
            auto in = open_in(dv_data);
            auto panels = read_edss_csv(in);
            if (panels.empty()) throw Error(ErrorCode::EMPTY_INPUT, dv_data + " has no rows");
            EndpointConfig ec;
            ec.timing = parse_timing(dv_timing);
            ec.confirm_weeks = dv_confirm;
            ec.reference = parse_reference(dv_ref);
            ec.roving_weeks = dv_roving;
            RecurrentEventTable t;
            for (const auto& p : panels) {
                auto rows = panel_to_event_table(p, ec);
                t.rows.insert(t.rows.end(), rows.begin(), rows.end());
            }
            emit(dv_out, [&](std::ostream& o) { write_event_csv(o, t); });
        } else if (*mcf) {
            RecurrentEventTable t = load_valid_table(mcf_data);
            emit(mcf_out, [&](std::ostream& o) {
                o << "ARMCD,time,cmf,variance,lower,upper\n";
                for (int arm = 0; arm < 2; ++arm) {
                    RecurrentEventTable sub;
                    for (const auto& r : t.rows) {
                        if (r.arm == arm) sub.rows.push_back(r);
                    }
                    if (sub.rows.empty()) continue;
                    StepFunction f = cmf(sub);
                    for (std::size_t i = 0; i < f.times.size(); ++i) {
                        Interval ci = cmf_interval(f.values[i], f.variance[i]);
                        o << arm << ',' << csv::num(f.times[i]) << ',' << csv::num(f.values[i]) << ','
                          << csv::num(f.variance[i]) << ',' << csv::num(ci.low) << ',' << csv::num(ci.high) << '\n';
                    }
                }
            });
            if (mcf_tau > 0.0) {
                CmfTest ct = cmf_test(t, mcf_tau);
                std::cerr << "cmf_test tau=" << csv::num(mcf_tau) << " W=" << csv::num(ct.w)
                          << " variance=" << csv::num(ct.variance) << " statistic=" << csv::num(ct.statistic)
                          << " p_value=" << csv::num(ct.p_value) << '\n';
            }
        } else if (*ss) {
            if (*ss_sch) {
                auto r = schoenfeld_events(sc_alpha, sc_power, sc_hr);
                std::cout << "alpha = " << csv::num(sc_alpha) << "\npower = " << csv::num(sc_power)
                          << "\nhr = " << csv::num(sc_hr) << "\nevents_raw = " << fixed(r.raw, 2)
                          << "\nevents = " << r.ceiling << '\n';
            } else if (*ss_nb) {
                if (!(nb_rate > 0.0)) throw Error(ErrorCode::BAD_INPUT, "--rate must be > 0");
                if (!(nb_hr > 0.0)) throw Error(ErrorCode::BAD_INPUT, "--rr must be > 0");
                nb.beta0 = std::log(nb_rate);
                nb.beta1_h0 = 0.0;
                nb.beta1_h1 = std::log(nb_hr);
                auto r = nb_sample_size(nb);
                std::cout << "alpha = " << csv::num(nb.alpha) << "\npower = " << csv::num(nb.power)
                          << "\nrr = " << csv::num(nb_hr) << "\nrate = " << csv::num(nb_rate)
                          << "\nphi = " << csv::num(nb.phi) << "\ntau = " << csv::num(nb.censoring.tau)
                          << "\nlambda = " << csv::num(nb.censoring.lambda) << "\nvar_h0 = " << csv::num(r.var_h0)
                          << "\nvar_h1 = " << csv::num(r.var_h1) << "\nper_arm_raw = " << fixed(r.per_arm, 2)
                          << "\nper_arm = " << r.per_arm_ceiling << "\ntotal = " << r.total << '\n';
            } else if (*ss_lw) {
                if (!(lw_hr > 0.0)) throw Error(ErrorCode::BAD_INPUT, "--rr must be > 0");
                lw.beta1 = std::log(lw_hr);
                lw.p0 = 1.0 - lw.p1;
                if (lw_shape == "weibull") lw.mean.shape = RateShape::WEIBULL;
                else if (lw_shape == "piecewise") lw.mean.shape = RateShape::PIECEWISE;
                else lw.mean.shape = RateShape::CONSTANT;
                if (lw.mean.shape == RateShape::PIECEWISE &&
                    (lw.mean.breaks.empty() || lw.mean.breaks.size() != lw.mean.rates.size())) {
                    throw Error(ErrorCode::BAD_INPUT, "--breaks and --rates must have equal, non-zero length");
                }
                auto r = lwyy_sample_size(lw);
                std::cout << "alpha = " << csv::num(lw.alpha) << "\npower = " << csv::num(lw.power)
                          << "\nrr = " << csv::num(lw_hr) << "\nphi = " << csv::num(lw.phi)
                          << "\np1 = " << csv::num(lw.p1) << "\nshape = " << lw_shape
                          << "\ntau = " << csv::num(lw.censoring.tau) << "\nE0 = " << csv::num(r.moments.E0)
                          << "\nF0 = " << csv::num(r.moments.F0) << "\nv_beta = " << csv::num(r.v_beta)
                          << "\nn_raw = " << fixed(r.raw, 2) << "\nn = " << r.ceiling << '\n';
            }
        } else if (*list) {
            std::cout << "name,setup,effect,phi,design,n,n_first_events\n";
            for (const auto& e : scenario_library()) {
                const auto& c = e.config;
                std::cout << e.name << ',' << (c.setup == Setup::S1 ? "S1" : "S2") << ',' << csv::num(c.effect)
                          << ',' << csv::num(c.phi) << ','
                          << (c.design == TrialDesign::EVENT_DRIVEN ? "EVENT_DRIVEN" : "TIME_FIXED") << ',' << c.n
                          << ',' << c.n_first_events << '\n';
            }
        } else if (*val) {
            auto in = open_in(val_data);
            if (val_format == "events") {
                RecurrentEventTable t = read_event_csv(in);
                auto rep = validate_table(t);
                if (!rep.ok()) {
                    print_report(std::cout, rep);
                    throw Error(ErrorCode::BAD_INPUT, std::to_string(rep.violations.size()) + " violation(s)");
                }
                std::cout << "ok: " << t.rows.size() << " rows, " << subject_spans(t).size() << " subjects\n";
            } else if (val_format == "wlw") {
                WlwTable w = read_wlw_csv(in);
                std::cout << "ok: " << w.rows.size() << " rows, K = " << w.K << '\n';
            } else {
                auto panels = read_edss_csv(in);
                std::cout << "ok: " << panels.size() << " subjects\n";
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return is_numerical(e.code()) ? 3 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
