#include "recur/nonparam.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <map>

#include "recur/errors.hpp"
#include "recur/stats.hpp"

namespace recur {

double StepFunction::at(double t, double initial) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return initial;
    return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

namespace {

// Distinct event times with (events, at risk just before).
struct Jump {
    double time;
    int d;
    int y;
};

std::vector<Jump> risk_table(const std::vector<TimeEvent>& data) {
    if (data.empty()) throw Error(ErrorCode::EMPTY_INPUT, "no observations");
    std::vector<TimeEvent> s(data);
    std::sort(s.begin(), s.end(), [](const TimeEvent& a, const TimeEvent& b) { return a.time < b.time; });
    std::vector<Jump> out;
    int n = static_cast<int>(s.size());
    int i = 0;
    while (i < n) {
        int j = i;
        int d = 0;
        while (j < n && s[j].time == s[i].time) d += s[j++].event;
        if (d > 0) out.push_back({s[i].time, d, n - i});
        i = j;
    }
    return out;
}

struct Subject {
    int arm;
    double censor;
    std::vector<double> events;
};

std::vector<Subject> collect_subjects(const RecurrentEventTable& table) {
    if (table.rows.empty()) throw Error(ErrorCode::EMPTY_INPUT, "empty table");
    std::vector<Subject> out;
    for (const auto& sp : subject_spans(table)) {
        Subject s{table.rows[sp.begin].arm, 0.0, {}};
        for (std::size_t k = sp.begin; k < sp.end; ++k) {
            const auto& r = table.rows[k];
            if (r.event) s.events.push_back(r.tstop);
            s.censor = std::max(s.censor, r.tstop);
        }
        out.push_back(std::move(s));
    }
    return out;
}

// Number of subjects with censor >= t, from ascending censor times.
int at_risk(const std::vector<double>& sorted_censor, double t) {
    auto it = std::lower_bound(sorted_censor.begin(), sorted_censor.end(), t);
    return static_cast<int>(sorted_censor.end() - it);
}

}  // namespace

StepFunction nelson_aalen(const std::vector<TimeEvent>& data) {
    StepFunction f;
    double a = 0.0, v = 0.0;
    for (const auto& j : risk_table(data)) {
        a += static_cast<double>(j.d) / j.y;
        v += static_cast<double>(j.d) / (static_cast<double>(j.y) * j.y);
        f.times.push_back(j.time);
        f.values.push_back(a);
        f.variance.push_back(v);
    }
    return f;
}

StepFunction kaplan_meier(const std::vector<TimeEvent>& data) {
    StepFunction f;
    double s = 1.0, g = 0.0;
    for (const auto& j : risk_table(data)) {
        s *= 1.0 - static_cast<double>(j.d) / j.y;
        if (j.y > j.d) g += static_cast<double>(j.d) / (static_cast<double>(j.y) * (j.y - j.d));
        f.times.push_back(j.time);
        f.values.push_back(s);
        f.variance.push_back(s * s * g);
    }
    return f;
}

std::vector<TimeEvent> first_event_data(const RecurrentEventTable& table) {
    std::vector<TimeEvent> out;
    for (const auto& r : table.rows) {
        if (r.sevent == 1) out.push_back({r.tstop, r.event});
    }
    return out;
}

StepFunction cmf(const RecurrentEventTable& table) {
    auto subjects = collect_subjects(table);
    std::vector<double> cens;
    std::map<double, int> dn;
    for (const auto& s : subjects) {
        cens.push_back(s.censor);
        for (double t : s.events) dn[t] += 1;
    }
    std::sort(cens.begin(), cens.end());

    StepFunction f;
    std::vector<double> dmu;
    std::vector<int> y;
    double mu = 0.0;
    for (const auto& [t, d] : dn) {
        int yt = at_risk(cens, t);
        f.times.push_back(t);
        y.push_back(yt);
        dmu.push_back(static_cast<double>(d) / yt);
        mu += dmu.back();
        f.values.push_back(mu);
    }

    // per-subject influence psi_i(t) = sum_{u<=t} Y_i(u)/Y(u) (dN_i(u) - dmu(u))
    const std::size_t J = f.times.size();
    f.variance.assign(J, 0.0);
    std::vector<double> own(J);
    for (const auto& s : subjects) {
        std::fill(own.begin(), own.end(), 0.0);
        for (double t : s.events) {
            auto k = static_cast<std::size_t>(std::lower_bound(f.times.begin(), f.times.end(), t) - f.times.begin());
            own[k] += 1.0;
        }
        double psi = 0.0;
        for (std::size_t k = 0; k < J && f.times[k] <= s.censor; ++k) {
            psi += (own[k] - dmu[k]) / y[k];
            f.variance[k] += psi * psi;
        }
        // psi stays constant after the subject leaves the risk set
        for (std::size_t k = 0; k < J; ++k) {
            if (f.times[k] > s.censor) f.variance[k] += psi * psi;
        }
    }
    return f;
}

Interval cmf_interval(double value, double variance, double level) {
    if (value <= 0.0) return {0.0, 0.0};
    double z = normal_quantile(0.5 + 0.5 * level);
    double h = z * std::sqrt(variance) / value;
    return {value * std::exp(-h), value * std::exp(h)};
}

CmfTest cmf_test(const RecurrentEventTable& table, double tau) {
    auto subjects = collect_subjects(table);
    std::vector<double> cens[2];
    std::map<double, std::array<int, 2>> dn;
    for (const auto& s : subjects) {
        cens[s.arm].push_back(s.censor);
        for (double t : s.events) {
            if (t <= tau) dn[t][s.arm] += 1;
        }
    }
    for (int k = 0; k < 2; ++k) {
        std::sort(cens[k].begin(), cens[k].end());
        if (cens[k].empty() || cens[k].back() <= 0.0) {
            throw Error(ErrorCode::DEGENERATE_ARM, "arm " + std::to_string(k) + " has no time at risk");
        }
    }

    std::vector<double> times;
    std::vector<double> wy[2];   // w / Y_k at each jump
    std::vector<double> g[2];    // cumulative w dN_k / Y_k^2
    double gk[2] = {0.0, 0.0};
    CmfTest res;
    for (const auto& [t, d] : dn) {
        int y1 = at_risk(cens[1], t);
        int y0 = at_risk(cens[0], t);
        double w = (y0 > 0 && y1 > 0) ? static_cast<double>(y0) * y1 / (y0 + y1) : 0.0;
        times.push_back(t);
        int yk[2] = {y0, y1};
        for (int k = 0; k < 2; ++k) {
            double r = yk[k] > 0 ? w / yk[k] : 0.0;
            wy[k].push_back(r);
            gk[k] += r * d[k] / std::max(1, yk[k]);
            g[k].push_back(gk[k]);
        }
        double inc1 = y1 > 0 ? static_cast<double>(d[1]) / y1 : 0.0;
        double inc0 = y0 > 0 ? static_cast<double>(d[0]) / y0 : 0.0;
        res.w += w * (inc1 - inc0);
    }

    for (const auto& s : subjects) {
        int k = s.arm;
        double psi = 0.0;
        for (double t : s.events) {
            if (t > tau) continue;
            auto j = static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), t) - times.begin());
            psi += wy[k][j];
        }
        double stop = std::min(s.censor, tau);
        auto j = std::upper_bound(times.begin(), times.end(), stop) - times.begin();
        if (j > 0) psi -= g[k][static_cast<std::size_t>(j) - 1];
        if (k == 0) psi = -psi;
        res.variance += psi * psi;
    }

    if (res.variance > 0.0) {
        res.statistic = res.w * res.w / res.variance;
    } else {
        res.statistic = res.w == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    res.p_value = chisq1_upper(res.statistic);
    if (std::isinf(res.statistic)) res.p_value = 0.0;
    return res;
}

}  // namespace recur
