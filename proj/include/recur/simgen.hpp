#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "recur/data_model.hpp"
#include "recur/endpoint.hpp"
#include "recur/rng.hpp"

namespace recur {

inline constexpr int kStates = 12;
using Mat12 = Eigen::Matrix<double, kStates, kStates>;
using StateProbs = std::array<double, kStates>;

// Per-day EDSS transition intensities (PPMS calibration) and baseline state distribution.
Mat12 default_q0();
StateProbs default_baseline_probs();

// exp(A) by scaling and squaring with a degree-13 Pade approximant.
Eigen::MatrixXd expm(const Eigen::MatrixXd& A);
Mat12 matrix_exp(const Mat12& Q, double t);

enum class Setup { S1, S2 };
enum class Heterogeneity { U1, U2 };
enum class TrialDesign { EVENT_DRIVEN, TIME_FIXED };

struct ScenarioConfig {
    std::string name;
    Setup setup = Setup::S1;
    int n = 1000;
    double effect = 1.0;  // HR on the simulated scale
    double phi = 0.0;
    double lambda = 0.00025;
    double end_recruit = 365.0;
    TrialDesign design = TrialDesign::EVENT_DRIVEN;
    int n_first_events = 246;
    double fixed_horizon = 0.0;  // 0 selects 1513 (S1) or 673 (S2)
    // S1 Weibull-type mean function eta * t^nu
    double eta = 0.0009675564;
    double nu = 0.9161516;
    // S2 multistate model
    Heterogeneity heterogeneity = Heterogeneity::U1;
    EndpointConfig endpoint;
    StateProbs baseline_probs = default_baseline_probs();
    Mat12 q0 = default_q0();
    double dropout_cap = 2000.0;
    int visit_spacing = 84;
    double noise_df = 3.54;
    double noise_ncp = 0.25;
    int noise_clamp = 10;

    double horizon() const;
    void validate() const;  // throws Error(BAD_INPUT)
};

std::vector<int> block_randomize(int n, Rng& rng);
double draw_frailty(double phi, Rng& rng);

struct SubjectDraw {
    int arm = 0;
    double frailty = 1.0;
    double recruit = 0.0;
    double dropout = 0.0;
    double followup = 0.0;
};

// One step of the inversion recursion: next event time after `prev` for uniform w.
double s1_next_time(double prev, double w, double frailty, double hr, double eta, double nu);
// Conditional CDF of the gap g after `prev`.
double s1_gap_cdf(double prev, double g, double frailty, double hr, double eta, double nu);
// Event times strictly below `limit` for one subject; hr applies to arm 1.
std::vector<double> s1_generate_subject(const SubjectDraw& draw, double limit, double hr, double eta, double nu,
                                        Rng& rng);

struct VisitSchedule {
    int spacing = 84;
    double noise_df = 3.54;
    double noise_ncp = 0.25;
    int noise_clamp = 10;
};
int visit_noise(const VisitSchedule& s, Rng& rng);
std::vector<int> s2_generate_visits(int C, const VisitSchedule& s, Rng& rng);

Mat12 s2_build_q(int arm, double frailty, double hr, Heterogeneity het, const Mat12& q0);

// Memoised exp(gap * Q) for one intensity matrix.
class TransitionCache {
public:
    explicit TransitionCache(const Mat12& q) : q_(q) {}
    const Mat12& at(int gap);
    std::size_t size() const { return cache_.size(); }

private:
    Mat12 q_;
    std::unordered_map<int, Mat12> cache_;
};

EdssPanel s2_generate_panel(const std::string& id, const SubjectDraw& draw, const std::vector<int>& visits,
                            const StateProbs& probs, TransitionCache& trans, Rng& rng);

struct DesignInput {
    double recruit = 0.0;
    double dropout = 0.0;
    double first_event = std::numeric_limits<double>::infinity();  // infinity when none before dropout
};

struct DesignOutcome {
    std::vector<double> followup;
    double study_duration = 0.0;
    int first_events = 0;  // first events observed within follow-up
};

DesignOutcome apply_trial_design(const std::vector<DesignInput>& subjects, TrialDesign design, int n_first_events,
                                 double fixed_horizon, double end_recruit, double eps = 1e-4);

struct TrialSummary {
    double study_duration = 0.0;
    int total_events = 0;
    int first_events = 0;
    std::vector<int> events_histogram;  // index = events per subject
};

struct Trial {
    RecurrentEventTable table;
    std::vector<EdssPanel> panels;  // S2 only, truncated at follow-up
    std::vector<SubjectDraw> draws;
    TrialSummary summary;
};

Trial generate_trial(const ScenarioConfig& cfg, std::uint64_t master_seed, std::uint64_t replicate = 0,
                     bool keep_panels = false);

}  // namespace recur
