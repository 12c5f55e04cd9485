#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "recur/data_model.hpp"

namespace recur {

enum class RiskSet { UNRESTRICTED, RESTRICTED, SEMI_RESTRICTED };
enum class Baseline { COMMON, EVENT_SPECIFIC };
enum class Variance { NAIVE, ROBUST };

struct PartialLikelihoodSpec {
    RiskSet risk_set = RiskSet::UNRESTRICTED;
    Baseline baseline = Baseline::COMMON;
    // 0 = one common effect; K >= 1 = one effect per stratum, strata >= K pooled into the last
    int specific_effects = 0;
    Variance variance = Variance::NAIVE;
    bool first_event_only = false;
};

// Canonical spec for a model id; K sets the number of event-specific effects where relevant.
PartialLikelihoodSpec model_spec(ModelId m, int K = 0);

// Design rows for the Breslow partial likelihood: (start, stop] within a stratum, clustered by subject.
struct PlData {
    std::vector<int> cluster;
    std::vector<int> stratum;
    std::vector<double> start;
    std::vector<double> stop;
    std::vector<int> event;
    Eigen::MatrixXd x;  // rows x covariates
    int n_clusters = 0;

    std::size_t size() const { return stop.size(); }
};

PlData build_pl_data(const RecurrentEventTable& table, const PartialLikelihoodSpec& spec);
PlData build_pl_data(const WlwTable& table, const PartialLikelihoodSpec& spec);

struct PlEvaluation {
    double loglik = 0.0;
    Eigen::VectorXd score;
    Eigen::MatrixXd information;
};

// Precomputed risk-set ordering; evaluation is reentrant.
class PartialLikelihood {
public:
    explicit PartialLikelihood(const PlData& data);

    PlEvaluation evaluate(const Eigen::VectorXd& beta) const;
    // Per-cluster score residuals (rows = clusters).
    Eigen::MatrixXd score_residuals(const Eigen::VectorXd& beta) const;
    // Breslow cumulative baseline per stratum at the distinct event times.
    std::vector<std::pair<double, double>> breslow_baseline(const Eigen::VectorXd& beta, int stratum) const;

    int dim() const { return static_cast<int>(data_.x.cols()); }
    int n_events() const { return n_events_; }

private:
    struct Stratum {
        int id;
        std::vector<int> by_stop;   // descending stop
        std::vector<int> by_start;  // descending start
        std::vector<double> times;  // distinct event times, descending
    };
    const PlData& data_;
    std::vector<Stratum> strata_;
    int n_events_ = 0;
};

struct PlOptions {
    double tol = 1e-8;
    int max_iter = 50;
    double monotone_bound = 15.0;
};

FitResult pl_fit(const PlData& data, const PartialLikelihoodSpec& spec, ModelId model,
                 const PlOptions& opt = {});

// Fits a table-based model (COX, AG, LWYY, PWP_CP, PCRB); WLW/LWA convert with to_wlw(K).
FitResult fit_model(const RecurrentEventTable& table, ModelId model, int K = 0, const PlOptions& opt = {});
FitResult fit_wlw_model(const WlwTable& table, ModelId model, bool event_specific, const PlOptions& opt = {});

// Max |analytic score - central finite difference of log PL| over all coordinates.
double score_gradient_check(const PlData& data, const Eigen::VectorXd& beta, double h = 1e-5);

struct CountRecord {
    int arm = 0;
    int count = 0;
    double exposure = 0.0;
};
using CountData = std::vector<CountRecord>;

CountData to_count_data(const RecurrentEventTable& table);

FitResult poisson_fit(const CountData& data);

struct NbOptions {
    int max_iter = 25;     // alternations between the regression and dispersion steps
    int theta_limit = 25;  // Newton iterations per dispersion step
    double phi_min = 1e-8;
    double phi_max = 1e3;
    double tol = 1e-8;
};

FitResult nb_fit(const CountData& data, const NbOptions& opt = {});
// Regression coefficients with the dispersion held fixed (phi = 0 is the Poisson model).
FitResult nb_fit_fixed_phi(const CountData& data, double phi);
double nb_loglik(const CountData& data, double b0, double b1, double phi);

}  // namespace recur
