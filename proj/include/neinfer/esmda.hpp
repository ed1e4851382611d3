#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "neinfer/forward_model.hpp"
#include "neinfer/inference.hpp"

namespace neinfer {

struct EsmdaConfig {
    std::size_t assimilations = 4;
    /// Inflation per assimilation; empty means alpha_i = assimilations.
    std::vector<double> alphas;
    std::uint64_t seed = 0;
    /// Relative diagonal jitter used once if C_dd + alpha C_e is singular.
    double jitter = 1e-10;

    std::vector<double> inflation() const;
    void validate() const;
};

/// Columns of N(0, diag(variance)) draws, one per member.
Eigen::MatrixXd draw_perturbations(std::span<const double> variance, std::size_t members,
                                   std::mt19937_64& rng);

/// One ensemble-smoother update.
///
/// params is n_param x N, responses n_obs x N (one column per member), and
/// perturbations n_obs x N drawn from N(0, C_e). Each member moves by
///   C_md (C_dd + alpha C_e)^-1 (d_obs + sqrt(alpha) e_j - d_j)
/// with sample covariances normalised by N - 1.
Eigen::MatrixXd esmda_update(const Eigen::MatrixXd& params, const Eigen::MatrixXd& responses,
                             std::span<const double> d_obs, std::span<const double> noise_variance,
                             double alpha, const Eigen::MatrixXd& perturbations,
                             double jitter = 1e-10);

struct MisfitStats {
    std::size_t iteration = 0;
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
};

struct EsmdaResult {
    std::vector<RockRealization> posterior;
    std::vector<std::vector<double>> posterior_h;
    /// Entry 0 is the prior; entry i follows the i-th update.
    std::vector<MisfitStats> trace;
    /// Posterior responses over history + prediction.
    ResponseEnsemble posterior_responses;
    std::size_t forward_runs = 0;
};

/// Runs `assimilations` update cycles in h = log2(10 k) space, then simulates
/// the posterior once over history + prediction. Forward runs total
/// (assimilations + 1) * N. Per-member misfit is the loss against `obs`.
EsmdaResult run_esmda(const ForwardModel& model, const std::vector<RockRealization>& prior,
                      const Observation& obs, const EsmdaConfig& config,
                      std::size_t history_steps, std::size_t prediction_steps,
                      std::size_t workers = 1, RunCounter* counter = nullptr);

}  // namespace neinfer
