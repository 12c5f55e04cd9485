#include "recur/endpoint.hpp"

#include "recur/errors.hpp"

namespace recur {

double required_increase(double reference) { return reference <= 5.5 ? 1.0 : 0.5; }

namespace {

// Lowered score held unchanged from its first occurrence for at least `period` days.
bool roving_confirmed(const EdssPanel& p, int i, double ref, int period) {
    double s = p.scores[i];
    if (!(s < ref)) return false;
    int j = i;
    while (j > 0 && p.scores[j - 1] == s) --j;
    return p.days[i] - p.days[j] >= period;
}

}  // namespace

CdpResult derive_cdp(const EdssPanel& panel, const EndpointConfig& cfg) {
    const int n = static_cast<int>(panel.scores.size());
    if (n < 1 || panel.days.size() != panel.scores.size()) {
        throw Error(ErrorCode::PANEL_TOO_SHORT, "panel " + panel.id + " has no visits");
    }
    const bool onset = cfg.timing == EventTiming::ONSET;
    const bool roving = cfg.reference == Reference::ROVING;
    const int window = cfg.confirm_days();

    CdpResult out;
    out.flags.assign(n, 0);
    ReferenceState ref{panel.scores[0], 0};
    out.references.push_back(ref);
    double inc = required_increase(ref.reference_score);
    bool pending = false;
    int idp = 0;

    int i = 0;
    while (i < n) {
        double chg = panel.scores[i] - ref.reference_score;
        if (!pending && chg >= inc) {
            pending = true;
            idp = i;
            ++i;
        } else if (pending && chg >= inc) {
            if (panel.days[i] >= panel.days[idp] + window) {
                out.flags[onset ? idp : i] = 1;
                ref = {panel.scores[idp], idp};
                out.references.push_back(ref);
                inc = required_increase(ref.reference_score);
                pending = false;
                // the current visit is re-examined against the new reference
                if (onset) i = idp;
            } else {
                ++i;
            }
        } else if (roving && roving_confirmed(panel, i, ref.reference_score, cfg.roving_days())) {
            ref = {panel.scores[i], i};
            out.references.push_back(ref);
            inc = required_increase(ref.reference_score);
            pending = false;
            ++i;
        } else {
            pending = false;
            ++i;
        }
    }
    for (int k = 0; k < n; ++k) {
        if (out.flags[k]) out.event_days.push_back(panel.days[k]);
    }
    return out;
}

std::vector<EventRow> flags_to_rows(const EdssPanel& panel, const std::vector<int>& flags) {
    std::vector<double> ev;
    std::size_t n = std::min(flags.size(), panel.days.size());
    for (std::size_t k = 0; k < n; ++k) {
        if (flags[k]) ev.push_back(panel.days[k]);
    }
    double censor = panel.days.empty() ? 0.0 : panel.days[n - 1];
    return subject_rows(panel.id, panel.arm, ev, censor, panel.frailty);
}

std::vector<EventRow> panel_to_event_table(const EdssPanel& panel, const EndpointConfig& cfg) {
    return flags_to_rows(panel, derive_cdp(panel, cfg).flags);
}

}  // namespace recur
