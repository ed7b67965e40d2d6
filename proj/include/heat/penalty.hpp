#pragma once
#include <vector>

#include <heat/types.hpp>

namespace heat {

class MultiPopDataset;

/*
 * Sparse group lasso over the rows of a p* x J coefficient matrix:
 *
 *     lambda * sum_k w_k ||Theta[k, B(k)]||_2 + gamma * sum_k sum_{j in B(k)} |Theta[k, j]|
 *
 * where B(k) is the set of populations in which predictor k is available
 * (row_masks) and w_k defaults to sqrt(|B(k)|).
 */
struct PenaltyParams
{
    double lambda = 0.0;
    double gamma = 0.0;
    Mask row_masks;
    Vector row_weights;

    static PenaltyParams full(Index p, Index J, double lambda, double gamma);
    static PenaltyParams masked(const Mask& masks, double lambda, double gamma);
    static PenaltyParams for_dataset(const MultiPopDataset& data, double lambda, double gamma);

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

/// Throws std::invalid_argument if Theta has a nonzero entry outside the mask.
double penalty_value(const Matrix& theta, const PenaltyParams& params);

/// Proximal map of t * (lambda * weight * ||.||_2 + gamma * ||.||_1) for one
/// row restricted to its available entries: elementwise soft threshold at
/// t*gamma followed by group shrinkage at t*lambda*weight.
Vector prox_sparse_group(const Vector& v, double t, double lambda, double gamma, double weight);

/// Row-wise prox over a full matrix. Entries outside each row's mask are set
/// to zero.
Matrix prox_sparse_group(const Matrix& v, double t, const PenaltyParams& params);

/// Smallest lambda for which Theta = 0 is optimal for L(., rho) + g with
/// gamma = gamma_ratio * lambda and default weights.
double lambda_max(const MultiPopDataset& data, const Vector& rho, double gamma_ratio);

/// Same, from a precomputed gradient of L(., rho) at Theta = 0.
double lambda_max_from_gradient(const Matrix& grad_at_zero, const PenaltyParams& shape, double gamma_ratio);

/// Geometric sequence from lambda_max down to min_ratio * lambda_max.
std::vector<double> lambda_grid(double lambda_max, int size, double min_ratio = 0.01);

} // namespace heat
