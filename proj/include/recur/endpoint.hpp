#pragma once

#include <vector>

#include "recur/data_model.hpp"

namespace recur {

enum class EventTiming { ONSET, CONFIRMATION };
enum class Reference { FIXED, ROVING };

struct EndpointConfig {
    EventTiming timing = EventTiming::CONFIRMATION;
    int confirm_weeks = 12;
    Reference reference = Reference::FIXED;
    int roving_weeks = 24;

    // 24 weeks maps to 161 days, not 168, for compatibility with the reference simulations.
    static int weeks_to_days(int weeks) { return weeks == 12 ? 84 : 161; }
    int confirm_days() const { return weeks_to_days(confirm_weeks); }
    int roving_days() const { return weeks_to_days(roving_weeks); }
};

struct ReferenceState {
    double reference_score = 0.0;
    int reference_index = 0;
};

// Minimum worsening counted as progression from a given reference score.
double required_increase(double reference);

struct CdpResult {
    std::vector<int> flags;      // 0/1 per visit
    std::vector<int> event_days; // ascending
    std::vector<ReferenceState> references;
};

CdpResult derive_cdp(const EdssPanel& panel, const EndpointConfig& cfg);

// Counting-process rows for one subject; the last visit day is the censoring day.
std::vector<EventRow> panel_to_event_table(const EdssPanel& panel, const EndpointConfig& cfg);

// Same, from already-derived flags (the panel may be truncated after derivation).
std::vector<EventRow> flags_to_rows(const EdssPanel& panel, const std::vector<int>& flags);

}  // namespace recur
