#pragma once
#include <string>
#include <vector>

#include <heat/penalty.hpp>
#include <heat/types.hpp>

namespace heat {

class MultiPopDataset;
struct PopulationBlock;

/// theta column j is beta_(j) / sigma_(j) on the standardized scale; rho_(j) = 1 / sigma_(j).
struct CoefficientState
{
    Matrix theta;
    Vector rho;
};

struct FitResult
{
    std::vector<std::string> labels;   // one per column
    Matrix B_hat;                       // original predictor units
    Vector sigma_hat;
    Vector intercepts;
    Matrix theta;                       // standardized scale
    Vector rho;
    std::vector<double> objective_trace;
    double kkt_residual = 0.0;
    int iterations = 0;
    bool converged = false;
    PenaltyParams params;
    std::string estimator;
};

// (1/2n) sum_j sum_i [(y rho_j - theta_j' x)^2 - log rho_j^2]
double loss_reparam(const CoefficientState& state, const MultiPopDataset& data);

// (1/2n) sum_j sum_i [(y - beta_j' x)^2 / sigma_j^2 + log sigma_j^2]
double loss_original(const Matrix& B, const Vector& sigma, const MultiPopDataset& data);

/// Column j: (1/n) X_j' (X_j theta_j - rho_j y_j).
Matrix grad_theta(const CoefficientState& state, const MultiPopDataset& data);

/// dL/drho_j = (1/n)(rho_j S_yy - S_ytheta) - n_j / (n rho_j).
Vector grad_rho(const CoefficientState& state, const MultiPopDataset& data);

/// Unique positive root of rho^2 S_yy - rho S_ytheta - n_j = 0.
double rho_update(double s_yy, double s_ytheta, double n_j);
double rho_update(const Vector& theta_j, const PopulationBlock& block, Index n_total);

/// Distance of -grad_theta to the subdifferential of g (max over rows), plus
/// max_j |dL/drho_j| when include_rho is set.
double kkt_residual(const CoefficientState& state, const MultiPopDataset& data, const PenaltyParams& params,
                    bool include_rho = true);

/// Theta-part of the residual from a precomputed gradient.
double kkt_residual_theta(const Matrix& theta, const Matrix& grad, const PenaltyParams& params);

/*
 * Per-population Gram statistics. L(Theta, rho) is a quadratic in Theta for
 * fixed rho, so every evaluation the solver needs reduces to
 *     S_yy = y'y,  c = X'y,  G = X'X.
 */
class SufficientStats
{
public:
    explicit SufficientStats(const MultiPopDataset& data);

    Index num_populations() const { return static_cast<Index>(gram_.size()); }
    Index num_predictors() const { return p_; }
    double n_total() const { return n_total_; }
    double n(Index j) const { return n_[static_cast<size_t>(j)]; }
    double yty(Index j) const { return yty_[static_cast<size_t>(j)]; }
    const Vector& xty(Index j) const { return xty_[static_cast<size_t>(j)]; }
    const Matrix& gram(Index j) const { return gram_[static_cast<size_t>(j)]; }

    /// Column j is G_j theta_j.
    Matrix gram_times(const Matrix& theta) const;

    /// L from a cached gram_times(theta).
    double loss(const Matrix& theta, const Matrix& g_theta, const Vector& rho) const;
    Matrix gradient(const Matrix& g_theta, const Vector& rho) const;
    Vector rho_gradient(const Matrix& theta, const Vector& rho) const;

    /// max_j ||X_j||_2^2 / n by power iteration.
    double lipschitz(int iterations = 20) const;

private:
    Index p_ = 0;
    double n_total_ = 0.0;
    std::vector<double> n_;
    std::vector<double> yty_;
    std::vector<Vector> xty_;
    std::vector<Matrix> gram_;
};

} // namespace heat
