#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "recur/data_model.hpp"

namespace testutil {

// Visits at baseline (day 1) and then every 12 weeks.
inline recur::EdssPanel weekly_panel(const std::vector<double>& scores, int arm = 0) {
    recur::EdssPanel p;
    p.id = "P";
    p.arm = arm;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        p.days.push_back(1 + 84 * static_cast<int>(k));
        p.scores.push_back(scores[k]);
    }
    return p;
}

inline int week_of(int day) { return (day - 1) / 84 * 12; }

inline void add_subject(recur::RecurrentEventTable& t, const std::string& id, int arm,
                        const std::vector<double>& events, double censor) {
    auto rows = recur::subject_rows(id, arm, events, censor);
    t.rows.insert(t.rows.end(), rows.begin(), rows.end());
}

// Small random recurrent-event table with continuous times; both arms present.
inline recur::RecurrentEventTable random_table(std::mt19937_64& g, int n, double rate = 0.3, double hr = 0.8) {
    recur::RecurrentEventTable t;
    std::uniform_real_distribution<double> cens(2.0, 10.0);
    for (int i = 0; i < n; ++i) {
        int arm = i % 2;
        double c = cens(g);
        std::exponential_distribution<double> gap(rate * (arm ? hr : 1.0));
        std::vector<double> ev;
        double s = gap(g);
        while (s < c) {
            ev.push_back(s);
            s += gap(g);
        }
        add_subject(t, std::to_string(i + 1), arm, ev, c);
    }
    return t;
}

// Same with integer times so that ties occur across subjects.
inline recur::RecurrentEventTable random_tied_table(std::mt19937_64& g, int n) {
    recur::RecurrentEventTable t;
    std::uniform_int_distribution<int> cens(3, 12);
    std::bernoulli_distribution ev(0.3);
    for (int i = 0; i < n; ++i) {
        int arm = i % 2;
        int c = cens(g);
        std::vector<double> e;
        for (int d = 1; d <= c; ++d) {
            if (ev(g)) e.push_back(d);
        }
        add_subject(t, std::to_string(i + 1), arm, e, c);
    }
    return t;
}

}  // namespace testutil
