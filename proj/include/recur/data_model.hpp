#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace recur {

// One at-risk interval (tstart, tstop] in counting-process layout.
struct EventRow {
    std::string id;
    int arm = 0;
    double tstart = 0.0;
    double tstop = 0.0;
    int event = 0;
    int sevent = 1;
    int nevents = 0;
    std::optional<double> frailty;

    double tgap() const { return tstop - tstart; }
};

// Rows of one subject are contiguous and ordered by tstop.
struct RecurrentEventTable {
    std::vector<EventRow> rows;
};

struct WlwRow {
    std::string id;
    int arm = 0;
    double tstop = 0.0;
    int event = 0;
    int sevent = 1;
};

struct WlwTable {
    int K = 0;
    std::vector<WlwRow> rows;
};

struct EdssPanel {
    std::string id;
    int arm = 0;
    double frailty = 1.0;
    std::vector<int> days;
    std::vector<double> scores;
};

enum class ModelId { COX, POISSON, NB, AG, LWYY, PWP_CP, WLW, LWA, PCRB };

const char* model_name(ModelId m);
std::optional<ModelId> parse_model(const std::string& s);

struct Coefficient {
    std::string term = "arm";
    double beta = 0.0;
    double se_naive = 0.0;
    std::optional<double> se_robust;
    double effect = 1.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double p_value = 1.0;

    double se() const { return se_robust ? *se_robust : se_naive; }
};

struct FitResult {
    ModelId model = ModelId::COX;
    std::vector<Coefficient> coefs;
    bool converged = false;
    bool fallback_used = false;
    bool monotone = false;
    double loglik = 0.0;
    int iterations = 0;
    std::optional<double> dispersion;
    std::string note;

    const Coefficient& main() const { return coefs.front(); }
    double beta() const { return coefs.front().beta; }
};

// Fills effect, Wald CI and two-sided p-value from beta and the preferred SE.
void finish_coefficient(Coefficient& c, double level = 0.95);

struct Violation {
    std::size_t row = 0;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate_table(const RecurrentEventTable& table);

// Half-open index ranges of contiguous subject blocks.
struct SubjectSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};
std::vector<SubjectSpan> subject_spans(const RecurrentEventTable& table);

WlwTable to_wlw(const RecurrentEventTable& table, int K);

// Rows with sevent == 1: the time-to-first-event dataset.
RecurrentEventTable first_event_rows(const RecurrentEventTable& table);

// Builds one subject's rows from sorted event days and a censoring day.
// An event on the censoring day closes the record without a trailing row.
std::vector<EventRow> subject_rows(const std::string& id, int arm, const std::vector<double>& event_times,
                                   double censor, std::optional<double> frailty = std::nullopt);

// EDSS state (1..12) to score and back.
double state_to_score(int state);
int score_to_state(double score);

// CSV helpers. Readers throw Error(BAD_INPUT) with the offending line.
RecurrentEventTable read_event_csv(std::istream& in);
void write_event_csv(std::ostream& out, const RecurrentEventTable& table);
WlwTable read_wlw_csv(std::istream& in);
void write_wlw_csv(std::ostream& out, const WlwTable& table);
std::vector<EdssPanel> read_edss_csv(std::istream& in);
void write_edss_csv(std::ostream& out, const std::vector<EdssPanel>& panels);

}  // namespace recur
