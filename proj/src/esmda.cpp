#include "neinfer/esmda.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "neinfer/error.hpp"
#include "neinfer/priors.hpp"

namespace neinfer {

std::vector<double> EsmdaConfig::inflation() const {
    if (!alphas.empty()) return alphas;
    return std::vector<double>(assimilations, double(assimilations));
}

void EsmdaConfig::validate() const {
    if (assimilations < 1) throw InvalidArgument("esmda: need at least one assimilation");
    const auto a = inflation();
    if (a.size() != assimilations) throw InvalidArgument("esmda: alpha count differs from assimilations");
    double inv_sum = 0.0;
    for (double v : a) {
        if (!(v > 0.0)) throw InvalidArgument("esmda: inflation factors must be > 0");
        inv_sum += 1.0 / v;
    }
    if (std::abs(inv_sum - 1.0) >= 1e-12) {
        throw InvalidArgument("esmda: sum of 1/alpha must equal 1");
    }
}

Eigen::MatrixXd draw_perturbations(std::span<const double> variance, std::size_t members,
                                   std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Eigen::MatrixXd e(Eigen::Index(variance.size()), Eigen::Index(members));
    for (Eigen::Index j = 0; j < e.cols(); ++j) {
        for (Eigen::Index i = 0; i < e.rows(); ++i) {
            e(i, j) = std::sqrt(variance[std::size_t(i)]) * normal(rng);
        }
    }
    return e;
}

namespace {

Eigen::MatrixXd centered(const Eigen::MatrixXd& x) {
    return x.colwise() - x.rowwise().mean();
}

// Dense solve of (C_dd + alpha C_e) X = R.
Eigen::MatrixXd solve_dense(const Eigen::MatrixXd& s, const Eigen::VectorXd& ce_alpha,
                            const Eigen::MatrixXd& r, double jitter) {
    Eigen::MatrixXd m = s * s.transpose();
    m.diagonal() += ce_alpha;
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) {
        const double scale = std::max(m.diagonal().mean(), 1e-300);
        m.diagonal().array() += jitter * scale;
        llt.compute(m);
        if (llt.info() != Eigen::Success) {
            throw Error("esmda: C_dd + alpha C_e is singular after regularisation");
        }
    }
    return llt.solve(r);
}

// Woodbury form for many observations with a positive diagonal C_e.
Eigen::MatrixXd solve_woodbury(const Eigen::MatrixXd& s, const Eigen::VectorXd& ce_alpha,
                               const Eigen::MatrixXd& r) {
    const Eigen::VectorXd w = ce_alpha.cwiseInverse();
    const Eigen::MatrixXd wr = w.asDiagonal() * r;
    const Eigen::MatrixXd ws = w.asDiagonal() * s;
    Eigen::MatrixXd inner = s.transpose() * ws;
    inner.diagonal().array() += 1.0;
    const Eigen::MatrixXd y = inner.llt().solve(s.transpose() * wr);
    return wr - ws * y;
}

}  // namespace

Eigen::MatrixXd esmda_update(const Eigen::MatrixXd& params, const Eigen::MatrixXd& responses,
                             std::span<const double> d_obs, std::span<const double> noise_variance,
                             double alpha, const Eigen::MatrixXd& perturbations, double jitter) {
    const Eigen::Index n = params.cols();
    const Eigen::Index n_obs = responses.rows();
    if (n < 2) throw InvalidArgument("esmda_update: ensemble size must be >= 2");
    if (responses.cols() != n || perturbations.cols() != n || perturbations.rows() != n_obs ||
        Eigen::Index(d_obs.size()) != n_obs || Eigen::Index(noise_variance.size()) != n_obs) {
        throw InvalidArgument("esmda_update: inconsistent shapes");
    }
    if (!(alpha > 0.0)) throw InvalidArgument("esmda_update: alpha must be > 0");

    const double norm = 1.0 / std::sqrt(double(n - 1));
    const Eigen::MatrixXd dm = centered(params) * norm;     // C_md = dm * s^T
    const Eigen::MatrixXd s = centered(responses) * norm;   // C_dd = s * s^T
    Eigen::VectorXd ce_alpha(n_obs);
    bool positive = true;
    for (Eigen::Index i = 0; i < n_obs; ++i) {
        if (noise_variance[std::size_t(i)] < 0.0) throw InvalidArgument("esmda_update: negative variance");
        ce_alpha(i) = alpha * noise_variance[std::size_t(i)];
        positive = positive && ce_alpha(i) > 0.0;
    }

    const Eigen::Map<const Eigen::VectorXd> dobs(d_obs.data(), n_obs);
    Eigen::MatrixXd innovation = (std::sqrt(alpha) * perturbations).colwise() + dobs;
    innovation -= responses;

    const Eigen::MatrixXd x = (positive && n_obs > 2000)
                                  ? solve_woodbury(s, ce_alpha, innovation)
                                  : solve_dense(s, ce_alpha, innovation, jitter);
    return params + dm * (s.transpose() * x);
}

namespace {

MisfitStats misfit_stats(std::size_t iteration, const ResponseEnsemble& responses,
                         std::size_t history_steps, const LossFunction& fn) {
    MisfitStats st{iteration, 0.0, std::numeric_limits<double>::infinity(),
                   -std::numeric_limits<double>::infinity()};
    const std::size_t ns = responses.n_series();
    const std::size_t steps = responses.n_steps();
    std::vector<double> hist(ns * history_steps);
    for (std::size_t r = 0; r < responses.rows(); ++r) {
        auto row = responses.row(r);
        for (std::size_t s = 0; s < ns; ++s) {
            std::copy_n(row.begin() + std::ptrdiff_t(s * steps), history_steps,
                        hist.begin() + std::ptrdiff_t(s * history_steps));
        }
        const double l = fn(hist);
        st.mean += l;
        st.min = std::min(st.min, l);
        st.max = std::max(st.max, l);
    }
    st.mean /= double(responses.rows());
    return st;
}

}  // namespace

EsmdaResult run_esmda(const ForwardModel& model, const std::vector<RockRealization>& prior,
                      const Observation& obs, const EsmdaConfig& config,
                      std::size_t history_steps, std::size_t prediction_steps,
                      std::size_t workers, RunCounter* counter) {
    config.validate();
    const std::size_t n = prior.size();
    if (n < 2) throw InvalidArgument("run_esmda: ensemble size must be >= 2");
    const std::size_t ns = model.series_names().size();
    if (obs.size() != ns * history_steps) throw InvalidArgument("run_esmda: observation width mismatch");

    const LossFunction fn(obs);
    std::vector<double> variance(obs.size());
    for (std::size_t c = 0; c < obs.size(); ++c) variance[c] = obs.noise_scale[c] * obs.noise_scale[c];

    const std::size_t n_cells = prior.front().size();
    Eigen::MatrixXd h(static_cast<Eigen::Index>(n_cells), static_cast<Eigen::Index>(n));
    for (std::size_t j = 0; j < n; ++j) {
        const auto hj = perm_to_h(prior[j]);
        for (std::size_t c = 0; c < n_cells; ++c) h(Eigen::Index(c), Eigen::Index(j)) = hj[c];
    }
    const auto to_rocks = [&](const Eigen::MatrixXd& hm) {
        std::vector<RockRealization> rocks(n);
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<double> col(n_cells);
            for (std::size_t c = 0; c < n_cells; ++c) col[c] = hm(Eigen::Index(c), Eigen::Index(j));
            rocks[j] = h_to_perm(col, 1.0);
            rocks[j].porosity = prior[j].porosity;
        }
        return rocks;
    };

    EsmdaResult result;
    RunCounter local;
    std::mt19937_64 rng(config.seed);
    const auto alphas = config.inflation();
    for (std::size_t it = 0; it < alphas.size(); ++it) {
        const auto rocks = it == 0 ? prior : to_rocks(h);
        std::vector<ForwardRun> runs;
        try {
            runs = run_ensemble(model, rocks, history_steps, workers, &local);
        } catch (const SolverFailure& e) {
            throw SolverFailure("esmda iteration " + std::to_string(it) + ": " + e.what(),
                                e.residual(), e.iterations());
        } catch (const Error& e) {
            throw Error("esmda iteration " + std::to_string(it) + ": " + e.what());
        }
        const ResponseEnsemble resp = ResponseEnsemble::from_runs(runs, model.series_names());
        result.trace.push_back(misfit_stats(it, resp, history_steps, fn));

        Eigen::MatrixXd d(Eigen::Index(obs.size()), Eigen::Index(n));
        for (std::size_t j = 0; j < n; ++j) {
            auto row = resp.row(j);
            for (std::size_t c = 0; c < obs.size(); ++c) d(Eigen::Index(c), Eigen::Index(j)) = row[c];
        }
        const Eigen::MatrixXd e = draw_perturbations(variance, n, rng);
        h = esmda_update(h, d, obs.d_obs, variance, alphas[it], e, config.jitter);
    }

    result.posterior = to_rocks(h);
    std::vector<ForwardRun> runs;
    try {
        runs = run_ensemble(model, result.posterior, history_steps + prediction_steps, workers, &local);
    } catch (const SolverFailure& e) {
        throw SolverFailure("esmda posterior run: " + std::string(e.what()), e.residual(),
                            e.iterations());
    } catch (const Error& e) {
        throw Error("esmda posterior run: " + std::string(e.what()));
    }
    result.posterior_responses = ResponseEnsemble::from_runs(runs, model.series_names());
    result.trace.push_back(
        misfit_stats(alphas.size(), result.posterior_responses, history_steps, fn));

    result.posterior_h.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        result.posterior_h[j].resize(n_cells);
        for (std::size_t c = 0; c < n_cells; ++c) result.posterior_h[j][c] = h(Eigen::Index(c), Eigen::Index(j));
    }
    result.forward_runs = local.value();
    if (counter) counter->add(local.value());
    return result;
}

}  // namespace neinfer
