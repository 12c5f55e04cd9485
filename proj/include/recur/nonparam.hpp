#pragma once

#include <vector>

#include "recur/data_model.hpp"

namespace recur {

struct StepFunction {
    std::vector<double> times;
    std::vector<double> values;
    std::vector<double> variance;  // empty when not computed

    // Value at t: last jump at or before t, `initial` before the first jump.
    double at(double t, double initial = 0.0) const;
};

struct TimeEvent {
    double time = 0.0;
    int event = 0;
};

StepFunction nelson_aalen(const std::vector<TimeEvent>& data);
StepFunction kaplan_meier(const std::vector<TimeEvent>& data);

// Cumulative mean function with a subject-clustered pointwise variance.
StepFunction cmf(const RecurrentEventTable& table);

// Log-transformed pointwise interval for a CMF jump.
struct Interval {
    double low = 0.0;
    double high = 0.0;
};
Interval cmf_interval(double value, double variance, double level = 0.95);

struct CmfTest {
    double w = 0.0;
    double variance = 0.0;
    double statistic = 0.0;
    double p_value = 1.0;
};

// Weighted difference of arm-wise CMF increments up to tau, arm 1 minus arm 0.
CmfTest cmf_test(const RecurrentEventTable& table, double tau);

// First-event data of a recurrent table (one entry per subject).
std::vector<TimeEvent> first_event_data(const RecurrentEventTable& table);

}  // namespace recur
