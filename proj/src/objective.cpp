#include <heat/objective.hpp>

#include <cmath>
#include <stdexcept>

#include <heat/dataset.hpp>

namespace heat {

double loss_reparam(const CoefficientState& state, const MultiPopDataset& data)
{
    const Index J = data.num_populations();
    if (state.rho.size() != J || state.theta.cols() != J || state.theta.rows() != data.num_predictors())
        throw std::invalid_argument("loss_reparam: state shape does not match the dataset");
    if ((state.rho.array() <= 0.0).any()) throw std::invalid_argument("loss_reparam: rho must be positive");
    const double n = static_cast<double>(data.total_samples());
    double total = 0.0;
    for (Index j = 0; j < J; ++j) {
        const auto& b = data.population(j);
        const Vector r = b.y * state.rho(j) - b.X * state.theta.col(j);
        total += r.squaredNorm() - static_cast<double>(b.n()) * std::log(state.rho(j) * state.rho(j));
    }
    return total / (2.0 * n);
}

double loss_original(const Matrix& B, const Vector& sigma, const MultiPopDataset& data)
{
    const Index J = data.num_populations();
    if (sigma.size() != J || B.cols() != J || B.rows() != data.num_predictors())
        throw std::invalid_argument("loss_original: shape does not match the dataset");
    if ((sigma.array() <= 0.0).any()) throw std::invalid_argument("loss_original: sigma must be positive");
    const double n = static_cast<double>(data.total_samples());
    double total = 0.0;
    for (Index j = 0; j < J; ++j) {
        const auto& b = data.population(j);
        const double s2 = sigma(j) * sigma(j);
        const Vector r = b.y - b.X * B.col(j);
        total += r.squaredNorm() / s2 + static_cast<double>(b.n()) * std::log(s2);
    }
    return total / (2.0 * n);
}

Matrix grad_theta(const CoefficientState& state, const MultiPopDataset& data)
{
    const double n = static_cast<double>(data.total_samples());
    Matrix g(data.num_predictors(), data.num_populations());
    for (Index j = 0; j < data.num_populations(); ++j) {
        const auto& b = data.population(j);
        const Vector r = b.X * state.theta.col(j) - state.rho(j) * b.y;
        g.col(j) = b.X.transpose() * r / n;
    }
    return g;
}

Vector grad_rho(const CoefficientState& state, const MultiPopDataset& data)
{
    const double n = static_cast<double>(data.total_samples());
    Vector g(data.num_populations());
    for (Index j = 0; j < data.num_populations(); ++j) {
        const auto& b = data.population(j);
        const double s_yy = b.y.squaredNorm();
        const double s_yt = b.y.dot(b.X * state.theta.col(j));
        g(j) = (state.rho(j) * s_yy - s_yt) / n - static_cast<double>(b.n()) / (n * state.rho(j));
    }
    return g;
}

double rho_update(double s_yy, double s_ytheta, double n_j)
{
    if (!(s_yy > 0.0)) throw std::invalid_argument("rho_update: response has zero sum of squares");
    return (s_ytheta + std::sqrt(s_ytheta * s_ytheta + 4.0 * s_yy * n_j)) / (2.0 * s_yy);
}

double rho_update(const Vector& theta_j, const PopulationBlock& block, Index /*n_total*/)
{
    // the 1/n factor multiplies every term of the scalar objective and cancels
    return rho_update(block.y.squaredNorm(), block.y.dot(block.X * theta_j), static_cast<double>(block.n()));
}

double kkt_residual_theta(const Matrix& theta, const Matrix& grad, const PenaltyParams& params)
{
    double worst = 0.0;
    const Index J = theta.cols();
    for (Index k = 0; k < theta.rows(); ++k) {
        double row_norm = 0.0;
        for (Index j = 0; j < J; ++j)
            if (params.row_masks(k, j)) row_norm += theta(k, j) * theta(k, j);
        row_norm = std::sqrt(row_norm);
        const double group = params.lambda * params.row_weights(k);
        double dist2 = 0.0;
        if (row_norm == 0.0) {
            // subdifferential is the Minkowski sum of a ball (radius group) and a box (half-width gamma)
            double ss = 0.0;
            for (Index j = 0; j < J; ++j) {
                if (!params.row_masks(k, j)) continue;
                const double z = std::max(std::abs(grad(k, j)) - params.gamma, 0.0);
                ss += z * z;
            }
            const double d = std::max(std::sqrt(ss) - group, 0.0);
            dist2 = d * d;
        } else {
            for (Index j = 0; j < J; ++j) {
                if (!params.row_masks(k, j)) continue;
                double d;
                if (theta(k, j) != 0.0) {
                    const double sub = group * theta(k, j) / row_norm + params.gamma * (theta(k, j) > 0 ? 1.0 : -1.0);
                    d = grad(k, j) + sub;
                } else {
                    d = std::max(std::abs(grad(k, j)) - params.gamma, 0.0);
                }
                dist2 += d * d;
            }
        }
        worst = std::max(worst, std::sqrt(dist2));
    }
    return worst;
}

double kkt_residual(const CoefficientState& state, const MultiPopDataset& data, const PenaltyParams& params,
                    bool include_rho)
{
    double r = kkt_residual_theta(state.theta, grad_theta(state, data), params);
    if (include_rho) r += grad_rho(state, data).cwiseAbs().maxCoeff();
    return r;
}

SufficientStats::SufficientStats(const MultiPopDataset& data)
    : p_(data.num_predictors()), n_total_(static_cast<double>(data.total_samples()))
{
    for (const auto& b : data.populations()) {
        n_.push_back(static_cast<double>(b.n()));
        yty_.push_back(b.y.squaredNorm());
        xty_.push_back(b.X.transpose() * b.y);
        Matrix g(p_, p_);
        g.setZero();
        g.selfadjointView<Eigen::Lower>().rankUpdate(b.X.transpose());
        gram_.push_back(g.selfadjointView<Eigen::Lower>());
    }
}

Matrix SufficientStats::gram_times(const Matrix& theta) const
{
    Matrix out(p_, num_populations());
    for (Index j = 0; j < num_populations(); ++j) out.col(j).noalias() = gram(j) * theta.col(j);
    return out;
}

double SufficientStats::loss(const Matrix& theta, const Matrix& g_theta, const Vector& rho) const
{
    double total = 0.0;
    for (Index j = 0; j < num_populations(); ++j) {
        const double r = rho(j);
        total += r * r * yty(j) - 2.0 * r * theta.col(j).dot(xty(j)) + theta.col(j).dot(g_theta.col(j)) -
                 n(j) * std::log(r * r);
    }
    return total / (2.0 * n_total_);
}

Matrix SufficientStats::gradient(const Matrix& g_theta, const Vector& rho) const
{
    Matrix grad(p_, num_populations());
    for (Index j = 0; j < num_populations(); ++j) grad.col(j) = (g_theta.col(j) - rho(j) * xty(j)) / n_total_;
    return grad;
}

Vector SufficientStats::rho_gradient(const Matrix& theta, const Vector& rho) const
{
    Vector g(num_populations());
    for (Index j = 0; j < num_populations(); ++j)
        g(j) = (rho(j) * yty(j) - theta.col(j).dot(xty(j))) / n_total_ - n(j) / (n_total_ * rho(j));
    return g;
}

double SufficientStats::lipschitz(int iterations) const
{
    double best = 0.0;
    for (Index j = 0; j < num_populations(); ++j) {
        Vector v = Vector::Ones(p_);
        if (v.norm() == 0.0) continue;
        v.normalize();
        double eig = 0.0;
        for (int it = 0; it < iterations; ++it) {
            Vector w = gram(j) * v;
            eig = w.norm();
            if (eig == 0.0) break;
            v = w / eig;
        }
        best = std::max(best, eig);
    }
    return best / n_total_;
}

} // namespace heat
