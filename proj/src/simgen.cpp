#include "recur/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "recur/errors.hpp"

namespace recur {

Mat12 default_q0() {
    static const double q[kStates][kStates] = {
        {-0.00571457, 0.00344927, 0.00213957, 0.00012573, 0, 0, 0, 0, 0, 0, 0, 0},
        {0.00278110, -0.00979778, 0.00410048, 0.00113692, 0.00177928, 0, 0, 0, 0, 0, 0, 0},
        {0.00097883, 0.00173411, -0.00907440, 0.00436886, 0.00124637, 0.00074624, 0, 0, 0, 0, 0, 0},
        {0.00016261, 0.00036194, 0.00197995, -0.00531696, 0.00179672, 0.00079744, 0.00021830, 0, 0, 0, 0, 0},
        {0, 0.00038329, 0.00084327, 0.00212851, -0.00556463, 0.00161647, 0.00012261, 0.00047048, 0, 0, 0, 0},
        {0, 0, 0.00058258, 0.00107844, 0.00164630, -0.00716624, 0.00204277, 0.00052749, 0.00128865, 0, 0, 0},
        {0, 0, 0, 0.00067075, 0.00071686, 0.00431262, -0.01315725, 0.00525261, 0.00195771, 0.00024671, 0, 0},
        {0, 0, 0, 0, 0.00065346, 0.00159607, 0.00321215, -0.01148634, 0.00588884, 0.00013581, 0, 0},
        {0, 0, 0, 0, 0, 0.00046211, 0.00022775, 0.00054228, -0.00288351, 0.00158707, 0.00006375, 0.00000055},
        {0, 0, 0, 0, 0, 0, 0, 0.00000346, 0.00135177, -0.00263882, 0.00120201, 0.00008158},
        {0, 0, 0, 0, 0, 0, 0, 0, 0.00016236, 0.00481588, -0.01026036, 0.00528211},
        {0, 0, 0, 0, 0, 0, 0, 0, 0, 0.00000891, 0.00219949, -0.00220840}};
    Mat12 m;
    for (int h = 0; h < kStates; ++h)
        for (int j = 0; j < kStates; ++j) m(h, j) = q[h][j];
    // printed diagonals are rounded; rebuild them so every row sums to zero
    for (int h = 0; h < kStates; ++h) {
        double off = 0.0;
        for (int j = 0; j < kStates; ++j) {
            if (j != h) off += m(h, j);
        }
        m(h, h) = -off;
    }
    return m;
}

StateProbs default_baseline_probs() {
    return {0.0,     0.00274, 0.08208, 0.18331, 0.17921, 0.09439,
            0.05746, 0.09986, 0.18057, 0.11902, 0.00137, 0.0};
}

double ScenarioConfig::horizon() const {
    if (fixed_horizon > 0.0) return fixed_horizon;
    return setup == Setup::S1 ? 1513.0 : 673.0;
}

void ScenarioConfig::validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorCode::BAD_INPUT, m); };
    if (n < 1) bad("n must be >= 1");
    if (!(effect > 0.0)) bad("effect must be > 0");
    if (!(phi >= 0.0)) bad("phi must be >= 0");
    if (!(lambda > 0.0)) bad("lambda must be > 0");
    if (!(end_recruit >= 0.0)) bad("end_recruit must be >= 0");
    if (design == TrialDesign::EVENT_DRIVEN && (n_first_events < 1 || n_first_events > n)) {
        bad("n_first_events must be in [1, n]");
    }
    if (!(eta > 0.0) || !(nu > 0.0)) bad("eta and nu must be > 0");
    double s = 0.0;
    for (double p : baseline_probs) {
        if (p < 0.0) bad("baseline probabilities must be >= 0");
        s += p;
    }
    if (std::fabs(s - 1.0) > 1e-4) bad("baseline probabilities must sum to 1");
    if (endpoint.confirm_weeks != 12 && endpoint.confirm_weeks != 24) bad("confirm_weeks must be 12 or 24");
    if (endpoint.roving_weeks != 12 && endpoint.roving_weeks != 24) bad("roving_weeks must be 12 or 24");
    for (int h = 0; h < kStates; ++h) {
        double row = 0.0;
        for (int j = 0; j < kStates; ++j) {
            if (h != j && q0(h, j) < 0.0) bad("negative off-diagonal intensity");
            if (std::abs(h - j) > 3 && q0(h, j) != 0.0) bad("intensity outside the +-3 band");
            row += q0(h, j);
        }
        if (std::fabs(row) > 1e-7) bad("intensity rows must sum to 0");
    }
}

std::vector<int> block_randomize(int n, Rng& rng) {
    std::vector<int> arms;
    arms.reserve(static_cast<std::size_t>(n) + 4);
    while (static_cast<int>(arms.size()) < n) {
        int block[4] = {0, 0, 1, 1};
        std::shuffle(block, block + 4, rng.engine());
        arms.insert(arms.end(), block, block + 4);
    }
    arms.resize(static_cast<std::size_t>(n));
    return arms;
}

double draw_frailty(double phi, Rng& rng) {
    if (phi <= 0.0) return 1.0;
    return rng.gamma(1.0 / phi, phi);
}

double s1_next_time(double prev, double w, double frailty, double hr, double eta, double nu) {
    double rate = frailty * eta * hr;
    return std::pow(-std::log1p(-w) / rate + std::pow(prev, nu), 1.0 / nu);
}

double s1_gap_cdf(double prev, double g, double frailty, double hr, double eta, double nu) {
    double rate = frailty * eta * hr;
    return -std::expm1(-rate * (std::pow(prev + g, nu) - std::pow(prev, nu)));
}

std::vector<double> s1_generate_subject(const SubjectDraw& draw, double limit, double hr, double eta, double nu,
                                        Rng& rng) {
    std::vector<double> times;
    double effect = draw.arm == 1 ? hr : 1.0;
    double t = 0.0;
    for (;;) {
        t = s1_next_time(t, rng.uniform(), draw.frailty, effect, eta, nu);
        if (!(t < limit)) break;
        times.push_back(t);
    }
    return times;
}

int visit_noise(const VisitSchedule& s, Rng& rng) {
    double e = std::nearbyint(rng.noncentral_t(s.noise_df, s.noise_ncp));
    e = std::clamp(e, -static_cast<double>(s.noise_clamp), static_cast<double>(s.noise_clamp));
    return static_cast<int>(e);
}

std::vector<int> s2_generate_visits(int C, const VisitSchedule& s, Rng& rng) {
    std::vector<int> days;
    for (int d = 1; d <= C; d += s.spacing) days.push_back(d);
    for (std::size_t k = 1; k < days.size(); ++k) days[k] += visit_noise(s, rng);
    while (days.size() > 1 && days.back() > C) days.pop_back();
    // noise cannot reorder visits while the clamp stays below half the spacing
    return days;
}

Mat12 s2_build_q(int arm, double frailty, double hr, Heterogeneity het, const Mat12& q0) {
    Mat12 q = Mat12::Zero();
    for (int h = 0; h < kStates; ++h) {
        double row = 0.0;
        for (int j = 0; j < kStates; ++j) {
            if (h == j || q0(h, j) == 0.0) continue;
            bool up = h < j && j - h <= 3;
            double v = q0(h, j);
            if (arm == 1 && up) v *= hr;
            bool frail = het == Heterogeneity::U1 ? up : std::abs(h - j) <= 3;
            if (frail) v *= frailty;
            q(h, j) = v;
            row += v;
        }
        q(h, h) = -row;
    }
    return q;
}

const Mat12& TransitionCache::at(int gap) {
    auto it = cache_.find(gap);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(gap, matrix_exp(q_, static_cast<double>(gap))).first->second;
}

EdssPanel s2_generate_panel(const std::string& id, const SubjectDraw& draw, const std::vector<int>& visits,
                            const StateProbs& probs, TransitionCache& trans, Rng& rng) {
    EdssPanel p;
    p.id = id;
    p.arm = draw.arm;
    p.frailty = draw.frailty;
    p.days = visits;
    int state = rng.categorical(probs.begin(), probs.end());
    p.scores.push_back(state_to_score(state + 1));
    for (std::size_t k = 1; k < visits.size(); ++k) {
        const Mat12& P = trans.at(visits[k] - visits[k - 1]);
        double w[kStates];
        for (int j = 0; j < kStates; ++j) w[j] = std::max(0.0, P(state, j));
        state = rng.categorical(w, w + kStates);
        p.scores.push_back(state_to_score(state + 1));
    }
    return p;
}

DesignOutcome apply_trial_design(const std::vector<DesignInput>& subjects, TrialDesign design, int n_first_events,
                                 double fixed_horizon, double end_recruit, double eps) {
    DesignOutcome out;
    const std::size_t n = subjects.size();
    out.followup.resize(n);
    if (design == TrialDesign::TIME_FIXED) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto& s = subjects[i];
            out.followup[i] = std::min(s.dropout, fixed_horizon);
            out.study_duration = std::max(out.study_duration, s.recruit + out.followup[i]);
            if (std::isfinite(s.first_event) && s.first_event <= out.followup[i]) ++out.first_events;
        }
        return out;
    }
    std::vector<std::pair<double, std::size_t>> cal;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = subjects[i];
        if (std::isfinite(s.first_event) && s.first_event <= s.dropout) cal.emplace_back(s.recruit + s.first_event, i);
    }
    if (static_cast<int>(cal.size()) < n_first_events) {
        throw Error(ErrorCode::INSUFFICIENT_EVENTS, std::to_string(cal.size()) + " first events, need " +
                                                        std::to_string(n_first_events));
    }
    std::stable_sort(cal.begin(), cal.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    double closure = cal[static_cast<std::size_t>(n_first_events) - 1].first + eps;
    if (closure < end_recruit) {
        throw Error(ErrorCode::RECRUIT_OVERRUN, "target number of first events reached before recruitment ended");
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = subjects[i];
        out.followup[i] = std::max(0.0, std::min(s.recruit + s.dropout, closure) - s.recruit);
        if (std::isfinite(s.first_event) && s.first_event <= s.dropout && s.first_event < out.followup[i]) ++out.first_events;
    }
    out.study_duration = closure;
    return out;
}

namespace {

void summarize_trial(Trial& t) {
    auto& s = t.summary;
    s.total_events = 0;
    s.first_events = 0;
    for (const auto& sp : subject_spans(t.table)) {
        int k = t.table.rows[sp.begin].nevents;
        s.total_events += k;
        if (k > 0) ++s.first_events;
        if (static_cast<int>(s.events_histogram.size()) <= k) s.events_histogram.resize(k + 1, 0);
        ++s.events_histogram[k];
    }
}

}  // namespace

Trial generate_trial(const ScenarioConfig& cfg, std::uint64_t master_seed, std::uint64_t replicate,
                     bool keep_panels) {
    cfg.validate();
    const int n = cfg.n;
    Trial trial;
    Rng trial_rng(master_seed, replicate, kTrialStream);
    std::vector<int> arms = block_randomize(n, trial_rng);

    const bool s2 = cfg.setup == Setup::S2;
    std::vector<SubjectDraw> draws(n);
    std::vector<DesignInput> inputs(n);
    std::vector<std::vector<double>> s1_events(s2 ? 0 : n);
    std::vector<EdssPanel> panels(s2 ? n : 0);
    std::vector<std::vector<int>> flags(s2 ? n : 0);

    const VisitSchedule sched{cfg.visit_spacing, cfg.noise_df, cfg.noise_ncp, cfg.noise_clamp};
    std::vector<TransitionCache> shared;
    if (s2 && cfg.phi <= 0.0) {
        for (int z = 0; z < 2; ++z) shared.emplace_back(s2_build_q(z, 1.0, cfg.effect, cfg.heterogeneity, cfg.q0));
    }

    for (int i = 0; i < n; ++i) {
        Rng rng(master_seed, replicate, static_cast<std::uint64_t>(i));
        SubjectDraw& d = draws[i];
        d.arm = arms[i];
        d.frailty = draw_frailty(cfg.phi, rng);
        d.recruit = rng.uniform(0.0, cfg.end_recruit);
        d.dropout = rng.exponential(cfg.lambda);
        DesignInput& in = inputs[i];
        if (!s2) {
            s1_events[i] = s1_generate_subject(d, d.dropout, cfg.effect, cfg.eta, cfg.nu, rng);
            if (!s1_events[i].empty()) in.first_event = s1_events[i].front();
        } else {
            d.recruit = std::nearbyint(d.recruit);
            d.dropout = std::max(1.0, std::nearbyint(std::min(d.dropout, cfg.dropout_cap)));
            if (cfg.design == TrialDesign::TIME_FIXED) {
                d.dropout = std::max(1.0, std::nearbyint(std::min(d.dropout, cfg.horizon())));
            }
            auto visits = s2_generate_visits(static_cast<int>(d.dropout), sched, rng);
            std::string id = std::to_string(i + 1);
            if (cfg.phi <= 0.0) {
                panels[i] = s2_generate_panel(id, d, visits, cfg.baseline_probs, shared[d.arm], rng);
            } else {
                TransitionCache own(s2_build_q(d.arm, d.frailty, cfg.effect, cfg.heterogeneity, cfg.q0));
                panels[i] = s2_generate_panel(id, d, visits, cfg.baseline_probs, own, rng);
            }
            flags[i] = derive_cdp(panels[i], cfg.endpoint).flags;
            for (std::size_t k = 0; k < flags[i].size(); ++k) {
                if (flags[i][k]) {
                    in.first_event = panels[i].days[k];
                    break;
                }
            }
        }
        in.recruit = d.recruit;
        in.dropout = d.dropout;
    }

    DesignOutcome design =
        apply_trial_design(inputs, cfg.design, cfg.n_first_events, cfg.horizon(), cfg.end_recruit);
    trial.summary.study_duration = design.study_duration;

    for (int i = 0; i < n; ++i) {
        SubjectDraw& d = draws[i];
        d.followup = design.followup[i];
        std::string id = std::to_string(i + 1);
        std::vector<EventRow> rows;
        if (!s2) {
            std::vector<double> kept;
            for (double t : s1_events[i]) {
                if (t < d.followup) kept.push_back(t);
            }
            rows = subject_rows(id, d.arm, kept, d.followup, d.frailty);
        } else {
            EdssPanel& p = panels[i];
            std::size_t keep = 1;
            while (keep < p.days.size() && p.days[keep] <= d.followup) ++keep;
            p.days.resize(keep);
            p.scores.resize(keep);
            flags[i].resize(keep);
            rows = flags_to_rows(p, flags[i]);
            d.followup = p.days.back();
        }
        trial.table.rows.insert(trial.table.rows.end(), rows.begin(), rows.end());
    }
    if (s2 && keep_panels) trial.panels = std::move(panels);
    trial.draws = std::move(draws);
    summarize_trial(trial);
    return trial;
}

}  // namespace recur
