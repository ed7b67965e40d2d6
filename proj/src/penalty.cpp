#include <heat/penalty.hpp>

#include <cmath>
#include <stdexcept>

#include <heat/dataset.hpp>
#include <heat/objective.hpp>

namespace heat {
namespace {

double soft(double x, double t)
{
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

// ||soft(g, gamma)||_2 for the available entries of one gradient row.
double thresholded_norm(const Matrix& g, Index k, const Mask& mask, double gamma)
{
    double ss = 0.0;
    for (Index j = 0; j < g.cols(); ++j) {
        if (!mask(k, j)) continue;
        const double s = soft(g(k, j), gamma);
        ss += s * s;
    }
    return std::sqrt(ss);
}

} // namespace

PenaltyParams PenaltyParams::full(Index p, Index J, double lambda, double gamma)
{
    return masked(Mask::Constant(p, J, true), lambda, gamma);
}

PenaltyParams PenaltyParams::masked(const Mask& masks, double lambda, double gamma)
{
    PenaltyParams params;
    params.lambda = lambda;
    params.gamma = gamma;
    params.row_masks = masks;
    params.row_weights.resize(masks.rows());
    for (Index k = 0; k < masks.rows(); ++k)
        params.row_weights(k) = std::sqrt(static_cast<double>(masks.row(k).count()));
    return params;
}

PenaltyParams PenaltyParams::for_dataset(const MultiPopDataset& data, double lambda, double gamma)
{
    return masked(data.availability(), lambda, gamma);
}

void PenaltyParams::validate() const
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite and >= 0");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be finite and >= 0");
    if (row_weights.size() != row_masks.rows())
        throw std::invalid_argument("row_weights must have one entry per predictor");
    for (Index k = 0; k < row_masks.rows(); ++k)
        if (row_masks.row(k).any() && !(row_weights(k) > 0.0))
            throw std::invalid_argument("row weight must be positive for a predictor available anywhere");
}

double penalty_value(const Matrix& theta, const PenaltyParams& params)
{
    if (theta.rows() != params.row_masks.rows() || theta.cols() != params.row_masks.cols())
        throw std::invalid_argument("penalty_value: Theta shape does not match the masks");
    double group = 0.0, l1 = 0.0;
    for (Index k = 0; k < theta.rows(); ++k) {
        double ss = 0.0;
        for (Index j = 0; j < theta.cols(); ++j) {
            const double v = theta(k, j);
            if (!params.row_masks(k, j)) {
                if (v != 0.0) throw std::invalid_argument("penalty_value: nonzero coefficient outside its mask");
                continue;
            }
            ss += v * v;
            l1 += std::abs(v);
        }
        group += params.row_weights(k) * std::sqrt(ss);
    }
    return params.lambda * group + params.gamma * l1;
}

Vector prox_sparse_group(const Vector& v, double t, double lambda, double gamma, double weight)
{
    Vector u(v.size());
    for (Index i = 0; i < v.size(); ++i) u(i) = soft(v(i), t * gamma);
    const double norm = u.norm();
    const double shrink = t * lambda * weight;
    if (norm <= shrink || norm == 0.0) return Vector::Zero(v.size());
    return u * (1.0 - shrink / norm);
}

Matrix prox_sparse_group(const Matrix& v, double t, const PenaltyParams& params)
{
    Matrix out = Matrix::Zero(v.rows(), v.cols());
    const double tg = t * params.gamma;
    for (Index k = 0; k < v.rows(); ++k) {
        double ss = 0.0;
        for (Index j = 0; j < v.cols(); ++j) {
            if (!params.row_masks(k, j)) continue;
            const double u = soft(v(k, j), tg);
            out(k, j) = u;
            ss += u * u;
        }
        if (ss == 0.0) continue;
        const double norm = std::sqrt(ss);
        const double shrink = t * params.lambda * params.row_weights(k);
        if (norm <= shrink) {
            out.row(k).setZero();
        } else {
            out.row(k) *= 1.0 - shrink / norm;
        }
    }
    return out;
}

double lambda_max_from_gradient(const Matrix& grad_at_zero, const PenaltyParams& shape, double gamma_ratio)
{
    if (gamma_ratio < 0.0) throw std::invalid_argument("gamma_ratio must be >= 0");
    double result = 0.0;
    for (Index k = 0; k < grad_at_zero.rows(); ++k) {
        const double w = shape.row_weights(k);
        if (!shape.row_masks.row(k).any()) continue;
        // Row k is zero at lambda iff ||soft(g_k, r*lambda)|| <= lambda*w. The
        // left side decreases and the right increases in lambda, so bisect.
        auto violated = [&](double lam) { return thresholded_norm(grad_at_zero, k, shape.row_masks, gamma_ratio * lam) > lam * w; };
        double hi = 0.0;
        for (Index j = 0; j < grad_at_zero.cols(); ++j)
            if (shape.row_masks(k, j)) hi = std::max(hi, std::abs(grad_at_zero(k, j)));
        if (hi == 0.0) continue;
        if (gamma_ratio == 0.0) {
            result = std::max(result, thresholded_norm(grad_at_zero, k, shape.row_masks, 0.0) / w);
            continue;
        }
        // at lambda = max|g|/r every entry is thresholded to zero
        double upper = std::min(hi / gamma_ratio, thresholded_norm(grad_at_zero, k, shape.row_masks, 0.0) / w);
        if (upper <= result || !violated(result)) continue;
        double lo = result;
        for (int it = 0; it < 200 && upper - lo > 1e-15 * upper; ++it) {
            const double mid = 0.5 * (lo + upper);
            if (violated(mid)) lo = mid; else upper = mid;
        }
        result = std::max(result, upper);
    }
    return result;
}

double lambda_max(const MultiPopDataset& data, const Vector& rho, double gamma_ratio)
{
    if (rho.size() != data.num_populations() || (rho.array() <= 0.0).any())
        throw std::invalid_argument("lambda_max: rho must be positive with one entry per population");
    CoefficientState zero{Matrix::Zero(data.num_predictors(), data.num_populations()), rho};
    return lambda_max_from_gradient(grad_theta(zero, data), PenaltyParams::for_dataset(data, 0.0, 0.0), gamma_ratio);
}

std::vector<double> lambda_grid(double lambda_max, int size, double min_ratio)
{
    if (size < 1) throw std::invalid_argument("grid size must be >= 1");
    std::vector<double> grid;
    grid.reserve(static_cast<size_t>(size));
    if (size == 1) return {lambda_max};
    const double step = std::log(min_ratio) / static_cast<double>(size - 1);
    for (int i = 0; i < size; ++i) grid.push_back(lambda_max * std::exp(step * i));
    return grid;
}

} // namespace heat
