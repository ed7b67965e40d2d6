#pragma once
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <heat/dataset.hpp>
#include <heat/objective.hpp>

namespace heat {

inline constexpr int kModelFileVersion = 1;

class ModelError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct ModelPopulation
{
    std::string label;
    double intercept = 0.0;
    double sigma_hat = 1.0;
    std::vector<std::pair<std::string, double>> coefficients;   // nonzero only, original units
};

struct ModelFile
{
    int version = kModelFileVersion;
    std::string estimator;
    double lambda = 0.0;
    double gamma = 0.0;
    bool converged = false;
    int iterations = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> predictors;                        // union predictor set of the training data
    std::vector<ModelPopulation> populations;

    const ModelPopulation& population(const std::string& label) const;
    /// Throws ModelError when an invariant fails.
    void validate() const;
};

ModelFile model_from_fit(const FitResult& fit, const std::vector<std::string>& predictors, std::uint64_t seed);

std::string to_text(const ModelFile& model);
void write_model(std::ostream& out, const ModelFile& model);
void write_model(const std::filesystem::path& path, const ModelFile& model);
ModelFile parse_model(const std::string& text, const std::string& source = "<model>");
ModelFile read_model(const std::filesystem::path& path);

/// yhat = intercept + x'beta, joining coefficients to columns by name. Missing
/// predictors that carry a nonzero weight are an error listing their names.
Vector predict(const ModelPopulation& model, const std::vector<std::string>& names, const Matrix& X);

/// population,predictor,weight rows for every nonzero coefficient.
void write_weights(std::ostream& out, const ModelFile& model);

} // namespace heat
