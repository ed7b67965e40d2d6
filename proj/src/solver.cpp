#include <heat/solver.hpp>

#include <cmath>
#include <stdexcept>

namespace heat {
namespace {

double masked_penalty(const Matrix& theta, const PenaltyParams& params)
{
    // prox output is always zero off-mask, so skip the contract check here
    double group = 0.0, l1 = 0.0;
    for (Index k = 0; k < theta.rows(); ++k) {
        const double ss = theta.row(k).squaredNorm();
        if (ss == 0.0) continue;
        group += params.row_weights(k) * std::sqrt(ss);
        l1 += theta.row(k).cwiseAbs().sum();
    }
    return params.lambda * group + params.gamma * l1;
}

struct InnerState
{
    Matrix theta;
    Matrix g_theta;   // G_j theta_j per column
    double step;
};

// Monotone FISTA on L(., rho) + g. Returns the number of accepted steps.
int solve_theta(const SufficientStats& stats, InnerState& s, const Vector& rho, const PenaltyParams& params,
                const SolverConfig& config)
{
    const double n = stats.n_total();
    Matrix x = s.theta, gx = s.g_theta;
    double fx = stats.loss(x, gx, rho) + masked_penalty(x, params);
    Matrix x_prev = x, gx_prev = gx;
    Matrix y = x, gy = gx;
    bool at_x = true;
    double momentum = 1.0;
    int accepted = 0;

    for (int it = 0; it < config.max_inner_iters; ++it) {
        if (kkt_residual_theta(x, stats.gradient(gx, rho), params) <= config.inner_kkt_tol) break;

        const Matrix grad = stats.gradient(gy, rho);
        Matrix z, gz;
        for (;;) {
            z = prox_sparse_group(y - s.step * grad, s.step, params);
            const Matrix d = z - y;
            const Matrix gd = stats.gram_times(d);
            const double curvature = (d.array() * gd.array()).sum() / n;
            if (curvature <= d.squaredNorm() / s.step * (1.0 + 1e-12) || d.squaredNorm() == 0.0) {
                gz = gy + gd;
                break;
            }
            s.step *= config.backtrack;
        }
        const double fz = stats.loss(z, gz, rho) + masked_penalty(z, params);

        if (fz > fx && !at_x) {
            // adaptive restart: drop momentum and retake the step from x
            y = x;
            gy = gx;
            at_x = true;
            momentum = 1.0;
            continue;
        }

        x_prev.swap(x);
        gx_prev.swap(gx);
        x = std::move(z);
        gx = std::move(gz);
        fx = fz;
        ++accepted;

        if (config.acceleration) {
            const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
            const double beta = (momentum - 1.0) / next;
            momentum = next;
            y = x + beta * (x - x_prev);
            gy = gx + beta * (gx - gx_prev);
            at_x = beta == 0.0;
        } else {
            y = x;
            gy = gx;
            at_x = true;
        }
    }
    s.theta = std::move(x);
    s.g_theta = std::move(gx);
    return accepted;
}

} // namespace

void SolverConfig::validate(Index num_populations) const
{
    if (!(tol > 0.0) || !(kkt_tol > 0.0) || !(inner_kkt_tol > 0.0))
        throw std::invalid_argument("solver tolerances must be positive");
    if (!(backtrack > 0.0 && backtrack < 1.0)) throw std::invalid_argument("backtracking factor must lie in (0, 1)");
    if (max_outer_iters < 1 || max_inner_iters < 1) throw std::invalid_argument("iteration limits must be >= 1");
    if (rho_mode == RhoMode::fixed) {
        if (rho_fixed.size() != num_populations) throw std::invalid_argument("rho_fixed needs one entry per population");
        if (!rho_fixed.allFinite() || (rho_fixed.array() <= 0.0).any())
            throw std::invalid_argument("rho_fixed must be positive and finite");
    }
}

HeatProblem::HeatProblem(const MultiPopDataset& data)
    : data_(&data), stats_(data), lipschitz_(stats_.lipschitz()), masks_(data.availability())
{
}

PenaltyParams HeatProblem::penalty(double lambda, double gamma) const
{
    return PenaltyParams::masked(masks_, lambda, gamma);
}

Vector HeatProblem::null_rho() const
{
    Vector rho(stats_.num_populations());
    for (Index j = 0; j < rho.size(); ++j) rho(j) = rho_update(stats_.yty(j), 0.0, stats_.n(j));
    return rho;
}

Matrix HeatProblem::gradient_at_zero(const Vector& rho) const
{
    return stats_.gradient(Matrix::Zero(stats_.num_predictors(), stats_.num_populations()), rho);
}

double heat_objective(const HeatProblem& problem, const CoefficientState& state, const PenaltyParams& params)
{
    const auto& st = problem.stats();
    return st.loss(state.theta, st.gram_times(state.theta), state.rho) + penalty_value(state.theta, params);
}

FitResult make_fit_result(const MultiPopDataset& data, const CoefficientState& state, const PenaltyParams& params)
{
    const Index p = data.num_predictors(), J = data.num_populations();
    FitResult r;
    r.theta = state.theta;
    r.rho = state.rho;
    r.params = params;
    r.B_hat = Matrix::Zero(p, J);
    r.sigma_hat = state.rho.cwiseInverse();
    r.intercepts = Vector::Zero(J);
    for (Index j = 0; j < J; ++j) {
        const auto& b = data.population(j);
        r.labels.push_back(b.label);
        double intercept = b.response_mean;
        for (Index k = 0; k < p; ++k) {
            if (!b.available[static_cast<size_t>(k)]) continue;
            const double beta = state.theta(k, j) / state.rho(j) / b.column_scales(k);
            r.B_hat(k, j) = beta;
            intercept -= b.column_means(k) * beta;
        }
        r.intercepts(j) = intercept;
    }
    return r;
}

FitResult fit_heat(const HeatProblem& problem, const PenaltyParams& params, const SolverConfig& config,
                   const CoefficientState* warm_start)
{
    const auto& st = problem.stats();
    const Index p = st.num_predictors(), J = st.num_populations();
    params.validate();
    config.validate(J);
    if (params.row_masks.rows() != p || params.row_masks.cols() != J)
        throw std::invalid_argument("fit_heat: penalty masks do not match the dataset");

    InnerState inner;
    inner.theta = warm_start ? warm_start->theta : Matrix::Zero(p, J);
    if (inner.theta.rows() != p || inner.theta.cols() != J) throw std::invalid_argument("fit_heat: bad warm start");
    for (Index k = 0; k < p; ++k)
        for (Index j = 0; j < J; ++j)
            if (!params.row_masks(k, j)) inner.theta(k, j) = 0.0;
    inner.g_theta = st.gram_times(inner.theta);
    inner.step = problem.lipschitz() > 0.0 ? 1.0 / problem.lipschitz() : 1.0;

    Vector rho;
    switch (config.rho_mode) {
    case RhoMode::free:
        rho = Vector(J);
        for (Index j = 0; j < J; ++j) rho(j) = rho_update(st.yty(j), inner.theta.col(j).dot(st.xty(j)), st.n(j));
        break;
    case RhoMode::fixed:
        rho = config.rho_fixed;
        break;
    case RhoMode::unit:
        rho = Vector::Ones(J);
        break;
    }

    // with rho held fixed the inner solve is the whole problem, so it only
    // needs to reach the outer tolerance
    SolverConfig inner_config = config;
    if (config.rho_mode != RhoMode::free) inner_config.inner_kkt_tol = std::max(config.inner_kkt_tol, config.kkt_tol);

    FitResult result;
    std::vector<double> trace;
    double objective = st.loss(inner.theta, inner.g_theta, rho) + masked_penalty(inner.theta, params);
    trace.push_back(objective);
    bool converged = false;
    double kkt = 0.0;
    int outer = 0;
    for (; outer < config.max_outer_iters && !converged;) {
        ++outer;
        if (config.rho_mode == RhoMode::free)
            for (Index j = 0; j < J; ++j)
                rho(j) = rho_update(st.yty(j), inner.theta.col(j).dot(st.xty(j)), st.n(j));

        solve_theta(st, inner, rho, params, inner_config);

        const double next = st.loss(inner.theta, inner.g_theta, rho) + masked_penalty(inner.theta, params);
        kkt = kkt_residual_theta(inner.theta, st.gradient(inner.g_theta, rho), params);
        if (config.rho_mode == RhoMode::free) kkt += st.rho_gradient(inner.theta, rho).cwiseAbs().maxCoeff();
        const double change = std::abs(objective - next) / std::max(1.0, std::abs(next));
        objective = next;
        trace.push_back(objective);
        // the KKT residual alone certifies optimality when rho is held fixed
        converged = kkt <= config.kkt_tol && (config.rho_mode != RhoMode::free || change < config.tol);
    }

    result = make_fit_result(problem.data(), CoefficientState{inner.theta, rho}, params);
    result.objective_trace = std::move(trace);
    result.kkt_residual = kkt;
    result.iterations = outer;
    result.converged = converged;
    switch (config.rho_mode) {
    case RhoMode::free: result.estimator = "heat"; break;
    case RhoMode::fixed: result.estimator = "heat-fixed-rho"; break;
    case RhoMode::unit: result.estimator = "reheat"; break;
    }
    return result;
}

FitResult fit_heat(const MultiPopDataset& data, const PenaltyParams& params, const SolverConfig& config)
{
    const HeatProblem problem(data);
    return fit_heat(problem, params, config);
}

FitResult fit_reheat(const MultiPopDataset& data, const PenaltyParams& params, SolverConfig config)
{
    config.rho_mode = RhoMode::unit;
    return fit_heat(data, params, config);
}

FitResult fit_heat_oracle(const MultiPopDataset& data, const PenaltyParams& params, SolverConfig config,
                          const Vector& sigma_true)
{
    if (sigma_true.size() != data.num_populations() || (sigma_true.array() <= 0.0).any())
        throw std::invalid_argument("fit_heat_oracle: sigma_true must be positive with one entry per population");
    config.rho_mode = RhoMode::fixed;
    config.rho_fixed = sigma_true.cwiseInverse();
    FitResult r = fit_heat(data, params, config);
    r.estimator = "heat-oracle";
    return r;
}

std::vector<FitResult> fit_heat_path(const HeatProblem& problem, const std::vector<double>& lambdas,
                                     double gamma_ratio, const SolverConfig& config)
{
    std::vector<FitResult> out;
    out.reserve(lambdas.size());
    CoefficientState warm;
    for (size_t i = 0; i < lambdas.size(); ++i) {
        const auto params = problem.penalty(lambdas[i], gamma_ratio * lambdas[i]);
        out.push_back(fit_heat(problem, params, config, i == 0 ? nullptr : &warm));
        warm = CoefficientState{out.back().theta, out.back().rho};
    }
    return out;
}

} // namespace heat
