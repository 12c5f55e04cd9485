#include <algorithm>
#include <cmath>
#include <map>

#include "recur/errors.hpp"
#include "recur/regression.hpp"

namespace recur {

PartialLikelihoodSpec model_spec(ModelId m, int K) {
    PartialLikelihoodSpec s;
    switch (m) {
        case ModelId::COX:
            s.first_event_only = true;
            break;
        case ModelId::AG:
            break;
        case ModelId::LWYY:
            s.variance = Variance::ROBUST;
            break;
        case ModelId::PWP_CP:
            s.risk_set = RiskSet::RESTRICTED;
            s.baseline = Baseline::EVENT_SPECIFIC;
            s.specific_effects = K;
            break;
        case ModelId::PCRB:
            s.risk_set = RiskSet::RESTRICTED;
            s.baseline = Baseline::EVENT_SPECIFIC;
            s.specific_effects = K > 0 ? K : 3;
            s.variance = Variance::ROBUST;
            break;
        case ModelId::WLW:
            s.risk_set = RiskSet::SEMI_RESTRICTED;
            s.baseline = Baseline::EVENT_SPECIFIC;
            s.specific_effects = K;
            s.variance = Variance::ROBUST;
            break;
        case ModelId::LWA:
            s.risk_set = RiskSet::SEMI_RESTRICTED;
            s.baseline = Baseline::COMMON;
            s.variance = Variance::ROBUST;
            break;
        default:
            throw Error(ErrorCode::BAD_INPUT, std::string("not a partial-likelihood model: ") + model_name(m));
    }
    return s;
}

namespace {

int effect_column(int sevent, int K) { return K > 0 ? std::min(sevent, K) - 1 : 0; }

std::string term_label(int col, int K, bool pooled_tail) {
    if (K <= 0) return "arm";
    std::string s = "arm:" + std::to_string(col + 1);
    if (pooled_tail && col == K - 1) s += "+";
    return s;
}

}  // namespace

PlData build_pl_data(const RecurrentEventTable& table, const PartialLikelihoodSpec& spec) {
    if (spec.risk_set == RiskSet::SEMI_RESTRICTED) {
        throw Error(ErrorCode::BAD_INPUT, "semi-restricted risk sets need the WLW layout");
    }
    if (spec.risk_set == RiskSet::RESTRICTED && spec.baseline != Baseline::EVENT_SPECIFIC) {
        throw Error(ErrorCode::BAD_INPUT, "restricted risk sets need event-specific baselines");
    }
    const int K = spec.specific_effects;
    const int p = K > 0 ? K : 1;
    PlData d;
    std::vector<const EventRow*> use;
    std::vector<int> cl;
    int c = -1;
    std::string last;
    for (const auto& r : table.rows) {
        if (c < 0 || r.id != last) {
            ++c;
            last = r.id;
        }
        if (spec.first_event_only && r.sevent != 1) continue;
        use.push_back(&r);
        cl.push_back(c);
    }
    d.n_clusters = c + 1;
    d.x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(use.size()), p);
    for (std::size_t i = 0; i < use.size(); ++i) {
        const auto& r = *use[i];
        d.cluster.push_back(cl[i]);
        d.stratum.push_back(spec.baseline == Baseline::EVENT_SPECIFIC ? r.sevent : 0);
        d.start.push_back(r.tstart);
        d.stop.push_back(r.tstop);
        d.event.push_back(r.event);
        d.x(static_cast<Eigen::Index>(i), effect_column(r.sevent, K)) = r.arm;
    }
    return d;
}

PlData build_pl_data(const WlwTable& table, const PartialLikelihoodSpec& spec) {
    const int K = spec.specific_effects;
    const int p = K > 0 ? K : 1;
    PlData d;
    d.x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(table.rows.size()), p);
    int c = -1;
    std::string last;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& r = table.rows[i];
        if (c < 0 || r.id != last) {
            ++c;
            last = r.id;
        }
        d.cluster.push_back(c);
        // a common baseline pools all ranks into one risk set
        d.stratum.push_back(spec.baseline == Baseline::EVENT_SPECIFIC ? r.sevent : 0);
        d.start.push_back(0.0);
        d.stop.push_back(r.tstop);
        d.event.push_back(r.event);
        d.x(static_cast<Eigen::Index>(i), effect_column(r.sevent, K)) = r.arm;
    }
    d.n_clusters = c + 1;
    return d;
}

PartialLikelihood::PartialLikelihood(const PlData& data) : data_(data) {
    std::map<int, std::vector<int>> groups;
    for (std::size_t i = 0; i < data.size(); ++i) groups[data.stratum[i]].push_back(static_cast<int>(i));
    for (auto& [id, rows] : groups) {
        Stratum s;
        s.id = id;
        s.by_stop = rows;
        s.by_start = rows;
        std::sort(s.by_stop.begin(), s.by_stop.end(), [&](int a, int b) {
            return data.stop[a] != data.stop[b] ? data.stop[a] > data.stop[b] : a < b;
        });
        std::sort(s.by_start.begin(), s.by_start.end(), [&](int a, int b) {
            return data.start[a] != data.start[b] ? data.start[a] > data.start[b] : a < b;
        });
        for (int i : s.by_stop) {
            if (data.event[i]) {
                ++n_events_;
                if (s.times.empty() || s.times.back() != data.stop[i]) s.times.push_back(data.stop[i]);
            }
        }
        strata_.push_back(std::move(s));
    }
}

PlEvaluation PartialLikelihood::evaluate(const Eigen::VectorXd& beta) const {
    const int p = dim();
    PlEvaluation ev;
    ev.score = Eigen::VectorXd::Zero(p);
    ev.information = Eigen::MatrixXd::Zero(p, p);
    const Eigen::VectorXd eta = data_.x * beta;
    const Eigen::VectorXd w = eta.array().exp();

    Eigen::VectorXd s1(p), xsum(p);
    Eigen::MatrixXd s2(p, p);
    for (const auto& st : strata_) {
        double s0 = 0.0;
        s1.setZero();
        s2.setZero();
        std::size_t ai = 0, ri = 0;
        const std::size_t n = st.by_stop.size();
        for (double t : st.times) {
            while (ai < n && data_.stop[st.by_stop[ai]] >= t) {
                int i = st.by_stop[ai++];
                s0 += w[i];
                s1.noalias() += w[i] * data_.x.row(i).transpose();
                s2.noalias() += w[i] * data_.x.row(i).transpose() * data_.x.row(i);
            }
            while (ri < n && data_.start[st.by_start[ri]] >= t) {
                int i = st.by_start[ri++];
                s0 -= w[i];
                s1.noalias() -= w[i] * data_.x.row(i).transpose();
                s2.noalias() -= w[i] * data_.x.row(i).transpose() * data_.x.row(i);
            }
            // events at t are among the rows with stop == t, all added by now
            int d = 0;
            double eta_sum = 0.0;
            xsum.setZero();
            for (std::size_t k = ai; k-- > 0;) {
                int i = st.by_stop[k];
                if (data_.stop[i] != t) break;
                if (data_.event[i]) {
                    ++d;
                    eta_sum += eta[i];
                    xsum += data_.x.row(i).transpose();
                }
            }
            ev.loglik += eta_sum - d * std::log(s0);
            ev.score += xsum - (d / s0) * s1;
            ev.information += (d / s0) * (s2 - s1 * s1.transpose() / s0);
        }
    }
    return ev;
}

Eigen::MatrixXd PartialLikelihood::score_residuals(const Eigen::VectorXd& beta) const {
    const int p = dim();
    const Eigen::VectorXd eta = data_.x * beta;
    const Eigen::VectorXd w = eta.array().exp();
    Eigen::MatrixXd res = Eigen::MatrixXd::Zero(data_.n_clusters, p);

    for (const auto& st : strata_) {
        // ascending event times with cumulative hazard A and x-bar-weighted hazard B
        const std::size_t J = st.times.size();
        std::vector<double> times(st.times.rbegin(), st.times.rend());
        std::vector<double> dA(J);
        Eigen::MatrixXd xbar(p, J);
        double s0 = 0.0;
        Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
        std::size_t ai = 0, ri = 0;
        const std::size_t n = st.by_stop.size();
        for (std::size_t jj = 0; jj < J; ++jj) {
            double t = st.times[jj];
            while (ai < n && data_.stop[st.by_stop[ai]] >= t) {
                int i = st.by_stop[ai++];
                s0 += w[i];
                s1 += w[i] * data_.x.row(i).transpose();
            }
            while (ri < n && data_.start[st.by_start[ri]] >= t) {
                int i = st.by_start[ri++];
                s0 -= w[i];
                s1 -= w[i] * data_.x.row(i).transpose();
            }
            int d = 0;
            for (std::size_t k = ai; k-- > 0;) {
                int i = st.by_stop[k];
                if (data_.stop[i] != t) break;
                d += data_.event[i];
            }
            std::size_t j = J - 1 - jj;
            dA[j] = d / s0;
            xbar.col(static_cast<Eigen::Index>(j)) = s1 / s0;
        }
        std::vector<double> A(J + 1, 0.0);
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(p, J + 1);
        for (std::size_t j = 0; j < J; ++j) {
            A[j + 1] = A[j] + dA[j];
            B.col(static_cast<Eigen::Index>(j + 1)) =
                B.col(static_cast<Eigen::Index>(j)) + dA[j] * xbar.col(static_cast<Eigen::Index>(j));
        }
        auto upto = [&](double t) {
            return static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
        };
        for (int i : st.by_stop) {
            std::size_t a = upto(data_.start[i]);
            std::size_t b = upto(data_.stop[i]);
            Eigen::VectorXd xi = data_.x.row(i).transpose();
            Eigen::VectorXd r = -w[i] * (xi * (A[b] - A[a]) -
                                         (B.col(static_cast<Eigen::Index>(b)) - B.col(static_cast<Eigen::Index>(a))));
            if (data_.event[i] && b > 0) r += xi - xbar.col(static_cast<Eigen::Index>(b - 1));
            res.row(data_.cluster[i]) += r.transpose();
        }
    }
    return res;
}

std::vector<std::pair<double, double>> PartialLikelihood::breslow_baseline(const Eigen::VectorXd& beta,
                                                                           int stratum) const {
    std::vector<std::pair<double, double>> out;
    const Eigen::VectorXd w = (data_.x * beta).array().exp();
    for (const auto& st : strata_) {
        if (st.id != stratum) continue;
        std::vector<std::pair<double, double>> desc;
        double s0 = 0.0;
        std::size_t ai = 0, ri = 0;
        const std::size_t n = st.by_stop.size();
        for (double t : st.times) {
            while (ai < n && data_.stop[st.by_stop[ai]] >= t) s0 += w[st.by_stop[ai++]];
            while (ri < n && data_.start[st.by_start[ri]] >= t) s0 -= w[st.by_start[ri++]];
            int d = 0;
            for (std::size_t k = ai; k-- > 0;) {
                int i = st.by_stop[k];
                if (data_.stop[i] != t) break;
                d += data_.event[i];
            }
            desc.emplace_back(t, d / s0);
        }
        double cum = 0.0;
        for (auto it = desc.rbegin(); it != desc.rend(); ++it) {
            cum += it->second;
            out.emplace_back(it->first, cum);
        }
    }
    return out;
}

FitResult pl_fit(const PlData& data, const PartialLikelihoodSpec& spec, ModelId model, const PlOptions& opt) {
    PartialLikelihood pl(data);
    if (pl.n_events() == 0) throw Error(ErrorCode::NO_EVENTS, "no events in the risk sets");
    const int p = pl.dim();
    FitResult fit;
    fit.model = model;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    PlEvaluation ev = pl.evaluate(beta);
    int it = 0;
    bool converged = false;
    for (; it < opt.max_iter; ++it) {
        if (ev.score.lpNorm<Eigen::Infinity>() <= opt.tol) {
            converged = true;
            break;
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(ev.information);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
            ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
            fit.note = "singular information";
            break;
        }
        Eigen::VectorXd step = ldlt.solve(ev.score);
        Eigen::VectorXd next = beta + step;
        PlEvaluation nev = pl.evaluate(next);
        for (int h = 0; h < 30 && !(nev.loglik >= ev.loglik - 1e-12 * std::fabs(ev.loglik)); ++h) {
            step *= 0.5;
            next = beta + step;
            nev = pl.evaluate(next);
        }
        beta = next;
        ev = std::move(nev);
        if (beta.lpNorm<Eigen::Infinity>() > opt.monotone_bound) {
            fit.monotone = true;
            fit.note = "monotone likelihood";
            beta = beta.cwiseMax(-opt.monotone_bound).cwiseMin(opt.monotone_bound);
            ev = pl.evaluate(beta);
            ++it;
            break;
        }
        if (step.lpNorm<Eigen::Infinity>() < 1e-13) {
            // Newton has reached machine precision on this problem
            converged = ev.score.lpNorm<Eigen::Infinity>() <= 1e-6;
            ++it;
            break;
        }
    }
    if (!converged && !fit.monotone && fit.note.empty() && ev.score.lpNorm<Eigen::Infinity>() <= opt.tol) {
        converged = true;
    }
    if (!converged && fit.note.empty()) fit.note = "iteration limit";
    fit.converged = converged;
    fit.iterations = it;
    fit.loglik = ev.loglik;

    Eigen::MatrixXd inv = Eigen::MatrixXd::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
    Eigen::FullPivLU<Eigen::MatrixXd> lu(ev.information);
    if (lu.isInvertible()) inv = lu.inverse();
    Eigen::MatrixXd robust;
    if (spec.variance == Variance::ROBUST && lu.isInvertible()) {
        Eigen::MatrixXd L = pl.score_residuals(beta);
        robust = inv * (L.transpose() * L) * inv;
    }
    const int K = spec.specific_effects;
    const bool pooled_tail = spec.risk_set == RiskSet::RESTRICTED;
    for (int j = 0; j < p; ++j) {
        Coefficient c;
        c.term = term_label(j, K, pooled_tail);
        c.beta = beta[j];
        c.se_naive = std::sqrt(inv(j, j));
        if (robust.size() > 0) c.se_robust = std::sqrt(robust(j, j));
        finish_coefficient(c);
        fit.coefs.push_back(c);
    }
    return fit;
}

FitResult fit_model(const RecurrentEventTable& table, ModelId model, int K, const PlOptions& opt) {
    if (model == ModelId::WLW || model == ModelId::LWA) {
        int k = K;
        if (k <= 0) {
            for (const auto& r : table.rows) k = std::max(k, r.nevents);
            k = std::max(k, 1);
        }
        return fit_wlw_model(to_wlw(table, k), model, model == ModelId::WLW && K > 0, opt);
    }
    if (model == ModelId::POISSON) return poisson_fit(to_count_data(table));
    if (model == ModelId::NB) return nb_fit(to_count_data(table));
    auto spec = model_spec(model, K);
    return pl_fit(build_pl_data(table, spec), spec, model, opt);
}

FitResult fit_wlw_model(const WlwTable& table, ModelId model, bool event_specific, const PlOptions& opt) {
    auto spec = model_spec(model, 0);
    if (model == ModelId::WLW && event_specific) spec.specific_effects = table.K;
    return pl_fit(build_pl_data(table, spec), spec, model, opt);
}

double score_gradient_check(const PlData& data, const Eigen::VectorXd& beta, double h) {
    PartialLikelihood pl(data);
    PlEvaluation ev = pl.evaluate(beta);
    double dev = 0.0;
    for (int j = 0; j < pl.dim(); ++j) {
        Eigen::VectorXd up = beta, dn = beta;
        up[j] += h;
        dn[j] -= h;
        double fd = (pl.evaluate(up).loglik - pl.evaluate(dn).loglik) / (2.0 * h);
        dev = std::max(dev, std::fabs(fd - ev.score[j]));
    }
    return dev;
}

}  // namespace recur
