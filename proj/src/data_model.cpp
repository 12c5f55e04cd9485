#include "recur/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "recur/errors.hpp"
#include "recur/stats.hpp"

namespace recur {

const char* error_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::BAD_INPUT: return "BAD_INPUT";
        case ErrorCode::EMPTY_INPUT: return "EMPTY_INPUT";
        case ErrorCode::PANEL_TOO_SHORT: return "PANEL_TOO_SHORT";
        case ErrorCode::DEGENERATE_ARM: return "DEGENERATE_ARM";
        case ErrorCode::NO_EVENTS: return "NO_EVENTS";
        case ErrorCode::NON_CONVERGENCE: return "NON_CONVERGENCE";
        case ErrorCode::MONOTONE_LIKELIHOOD: return "MONOTONE_LIKELIHOOD";
        case ErrorCode::ZERO_COUNT_ARM: return "ZERO_COUNT_ARM";
        case ErrorCode::INSUFFICIENT_EVENTS: return "INSUFFICIENT_EVENTS";
        case ErrorCode::RECRUIT_OVERRUN: return "RECRUIT_OVERRUN";
        case ErrorCode::HR_ONE: return "HR_ONE";
        case ErrorCode::TOO_FEW_REPLICATES: return "TOO_FEW_REPLICATES";
    }
    return "UNKNOWN";
}

bool is_numerical(ErrorCode code) {
    return code == ErrorCode::NON_CONVERGENCE || code == ErrorCode::MONOTONE_LIKELIHOOD ||
           code == ErrorCode::ZERO_COUNT_ARM || code == ErrorCode::HR_ONE;
}

const char* model_name(ModelId m) {
    switch (m) {
        case ModelId::COX: return "COX";
        case ModelId::POISSON: return "POISSON";
        case ModelId::NB: return "NB";
        case ModelId::AG: return "AG";
        case ModelId::LWYY: return "LWYY";
        case ModelId::PWP_CP: return "PWP_CP";
        case ModelId::WLW: return "WLW";
        case ModelId::LWA: return "LWA";
        case ModelId::PCRB: return "PCRB";
    }
    return "?";
}

std::optional<ModelId> parse_model(const std::string& s) {
    std::string u;
    for (char ch : s) u += (ch == '-') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    for (ModelId m : {ModelId::COX, ModelId::POISSON, ModelId::NB, ModelId::AG, ModelId::LWYY, ModelId::PWP_CP,
                      ModelId::WLW, ModelId::LWA, ModelId::PCRB}) {
        if (u == model_name(m)) return m;
    }
    if (u == "PWP") return ModelId::PWP_CP;
    return std::nullopt;
}

void finish_coefficient(Coefficient& c, double level) {
    double z = normal_quantile(0.5 + 0.5 * level);
    double se = c.se();
    c.effect = std::exp(c.beta);
    c.ci_low = std::exp(c.beta - z * se);
    c.ci_high = std::exp(c.beta + z * se);
    if (se > 0.0 && std::isfinite(se)) {
        c.p_value = std::erfc(std::fabs(c.beta / se) / std::sqrt(2.0));
    } else {
        c.p_value = (c.beta == 0.0) ? 1.0 : 0.0;
    }
}

std::vector<SubjectSpan> subject_spans(const RecurrentEventTable& table) {
    std::vector<SubjectSpan> spans;
    const auto& rows = table.rows;
    std::size_t i = 0;
    while (i < rows.size()) {
        std::size_t j = i + 1;
        while (j < rows.size() && rows[j].id == rows[i].id) ++j;
        spans.push_back({i, j});
        i = j;
    }
    return spans;
}

static std::string fmt_row(std::size_t k) { return "row " + std::to_string(k + 1); }

ValidationReport validate_table(const RecurrentEventTable& table) {
    ValidationReport rep;
    auto add = [&](std::size_t row, std::string msg) { rep.violations.push_back({row, std::move(msg)}); };
    std::vector<std::string> seen;
    for (const auto& sp : subject_spans(table)) {
        const auto& first = table.rows[sp.begin];
        if (std::find(seen.begin(), seen.end(), first.id) != seen.end()) {
            add(sp.begin, "subject " + first.id + " rows are not contiguous");
        }
        seen.push_back(first.id);
        int nev = 0;
        for (std::size_t k = sp.begin; k < sp.end; ++k) nev += table.rows[k].event;
        for (std::size_t k = sp.begin; k < sp.end; ++k) {
            const auto& r = table.rows[k];
            std::size_t within = k - sp.begin;
            if (r.arm != 0 && r.arm != 1) add(k, fmt_row(k) + ": arm must be 0 or 1");
            if (r.event != 0 && r.event != 1) add(k, fmt_row(k) + ": event must be 0 or 1");
            if (!(r.tstart < r.tstop)) add(k, fmt_row(k) + ": tstart < tstop violated");
            if (r.tstart < 0.0) add(k, fmt_row(k) + ": negative tstart");
            if (within == 0 && r.tstart != 0.0) add(k, fmt_row(k) + ": first tstart must be 0");
            if (within > 0) {
                const auto& prev = table.rows[k - 1];
                if (r.tstart != prev.tstop) {
                    add(k, "tstart of row " + std::to_string(within + 1) + " != tstop of row " +
                               std::to_string(within) + " (subject " + r.id + ")");
                }
                if (r.tstop < prev.tstop) add(k, fmt_row(k) + ": rows not ordered by tstop");
                if (prev.event == 0) add(k - 1, fmt_row(k - 1) + ": event = 0 before the last row");
            }
            if (r.arm != first.arm) add(k, fmt_row(k) + ": arm changes within subject");
            if (r.sevent != static_cast<int>(within) + 1) add(k, fmt_row(k) + ": sevent is not the row index");
            if (r.nevents != nev) add(k, fmt_row(k) + ": nevents != sum of events");
        }
    }
    return rep;
}

std::vector<EventRow> subject_rows(const std::string& id, int arm, const std::vector<double>& event_times,
                                   double censor, std::optional<double> frailty) {
    std::vector<EventRow> out;
    int n = static_cast<int>(event_times.size());
    double prev = 0.0;
    for (int j = 0; j < n; ++j) {
        out.push_back({id, arm, prev, event_times[j], 1, j + 1, n, frailty});
        prev = event_times[j];
    }
    if (n == 0 || censor > prev) out.push_back({id, arm, prev, censor, 0, n + 1, n, frailty});
    return out;
}

WlwTable to_wlw(const RecurrentEventTable& table, int K) {
    if (K < 1) throw Error(ErrorCode::BAD_INPUT, "K must be >= 1");
    WlwTable out;
    out.K = K;
    for (const auto& sp : subject_spans(table)) {
        const auto& first = table.rows[sp.begin];
        std::vector<double> ev;
        double censor = 0.0;
        for (std::size_t k = sp.begin; k < sp.end; ++k) {
            if (table.rows[k].event) ev.push_back(table.rows[k].tstop);
            censor = std::max(censor, table.rows[k].tstop);
        }
        for (int k = 0; k < K; ++k) {
            if (k < static_cast<int>(ev.size())) {
                out.rows.push_back({first.id, first.arm, ev[k], 1, k + 1});
            } else {
                out.rows.push_back({first.id, first.arm, censor, 0, k + 1});
            }
        }
    }
    return out;
}

RecurrentEventTable first_event_rows(const RecurrentEventTable& table) {
    RecurrentEventTable out;
    for (const auto& r : table.rows) {
        if (r.sevent == 1) out.rows.push_back(r);
    }
    return out;
}

double state_to_score(int state) {
    if (state <= 1) return 2.0;
    if (state >= 12) return 7.5;
    return (state + 3) / 2.0;
}

int score_to_state(double score) {
    if (score <= 2.0) return 1;
    if (score >= 7.5) return 12;
    return static_cast<int>(std::lround(2.0 * score)) - 3;
}

}  // namespace recur
