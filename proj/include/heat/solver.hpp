#pragma once
#include <optional>
#include <vector>

#include <heat/dataset.hpp>
#include <heat/objective.hpp>
#include <heat/penalty.hpp>

namespace heat {

enum class RhoMode { free, fixed, unit };

struct SolverConfig
{
    int max_outer_iters = 500;
    int max_inner_iters = 200;
    double tol = 1e-7;             // relative objective change between outer iterations
    double kkt_tol = 1e-4;
    double inner_kkt_tol = 1e-5;   // Theta-block stationarity that ends an inner solve
    double backtrack = 0.5;
    bool acceleration = true;
    RhoMode rho_mode = RhoMode::free;
    Vector rho_fixed;              // used when rho_mode == fixed

    void validate(Index num_populations) const;
};

/*
 * A dataset together with the Gram statistics and penalty shape every fit on
 * it shares. Build once, then fit many (lambda, gamma) points.
 */
class HeatProblem
{
public:
    explicit HeatProblem(const MultiPopDataset& data);

    const MultiPopDataset& data() const { return *data_; }
    const SufficientStats& stats() const { return stats_; }
    double lipschitz() const { return lipschitz_; }
    PenaltyParams penalty(double lambda, double gamma) const;

    /// rho maximizing the likelihood at Theta = 0: sqrt(n_j / y_j'y_j).
    Vector null_rho() const;

    /// Gradient of L(., rho) at Theta = 0.
    Matrix gradient_at_zero(const Vector& rho) const;

private:
    const MultiPopDataset* data_;
    SufficientStats stats_;
    double lipschitz_;
    Mask masks_;
};

/// Exact estimator (rho_mode free), or fixed-rho variants selected by config.
FitResult fit_heat(const HeatProblem& problem, const PenaltyParams& params, const SolverConfig& config,
                   const CoefficientState* warm_start = nullptr);
FitResult fit_heat(const MultiPopDataset& data, const PenaltyParams& params, const SolverConfig& config = {});

/// Equal, unit variances: rho fixed at 1 and B_hat = Theta.
FitResult fit_reheat(const MultiPopDataset& data, const PenaltyParams& params, SolverConfig config = {});

/// rho fixed at 1 / sigma_true.
FitResult fit_heat_oracle(const MultiPopDataset& data, const PenaltyParams& params, SolverConfig config,
                          const Vector& sigma_true);

/// Warm-started fits along a descending lambda sequence with gamma = ratio * lambda.
std::vector<FitResult> fit_heat_path(const HeatProblem& problem, const std::vector<double>& lambdas,
                                     double gamma_ratio, const SolverConfig& config);

/// Back-transforms a standardized-scale state into a FitResult in original units.
FitResult make_fit_result(const MultiPopDataset& data, const CoefficientState& state, const PenaltyParams& params);

/// Full objective L(Theta, rho) + g(Theta).
double heat_objective(const HeatProblem& problem, const CoefficientState& state, const PenaltyParams& params);

} // namespace heat
