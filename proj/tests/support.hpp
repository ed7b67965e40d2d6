#pragma once
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <heat/dataset.hpp>
#include <heat/objective.hpp>
#include <heat/penalty.hpp>

#include "oracles.hpp"

namespace testing_support {

using heat::Index;
using heat::Matrix;
using heat::Vector;

inline std::string name(Index k)
{
    return "x" + std::to_string(k);
}

inline Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng)
{
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = z(rng);
    return m;
}

/// Sparse linear model per population with noise sd sigma[j]. Predictors in
/// drop[j] are left out of population j's file.
inline std::vector<heat::RawPopulation> random_raw(const std::vector<Index>& n, Index p, const std::vector<double>& sigma,
                                                   std::mt19937_64& rng,
                                                   const std::vector<std::vector<Index>>& drop = {})
{
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<heat::RawPopulation> out;
    for (size_t j = 0; j < n.size(); ++j) {
        heat::RawPopulation r;
        r.label = "P" + std::to_string(j);
        std::vector<Index> keep;
        for (Index k = 0; k < p; ++k) {
            bool dropped = false;
            if (j < drop.size())
                for (Index d : drop[j]) dropped = dropped || d == k;
            if (!dropped) keep.push_back(k);
        }
        const Matrix full = gaussian(n[j], p, rng);
        r.X.resize(n[j], static_cast<Index>(keep.size()));
        Vector y = Vector::Constant(n[j], 0.5 * static_cast<double>(j));
        for (size_t c = 0; c < keep.size(); ++c) {
            r.X.col(static_cast<Index>(c)) = full.col(keep[c]) * (1.0 + 0.5 * static_cast<double>(c % 3));
            r.predictors.push_back(name(keep[c]));
            if (keep[c] % 2 == 0) y += (keep[c] % 4 == 0 ? 1.0 : -0.7) * r.X.col(static_cast<Index>(c));
        }
        for (Index i = 0; i < n[j]; ++i) y(i) += sigma[j] * z(rng);
        r.y = y;
        out.push_back(std::move(r));
    }
    return out;
}

/// The standardized problem as seen by the solver, in the oracle's terms.
inline oracle::Problem to_oracle(const heat::MultiPopDataset& data, const heat::PenaltyParams& params)
{
    oracle::Problem pr;
    for (const auto& b : data.populations()) {
        pr.y.push_back(b.y);
        pr.X.push_back(b.X);
    }
    pr.mask = params.row_masks;
    pr.weights = params.row_weights;
    pr.lambda = params.lambda;
    pr.gamma = params.gamma;
    return pr;
}

inline double max_rel(const Matrix& a, const Matrix& b)
{
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

} // namespace testing_support
