#include <heat/model_file.hpp>

#include <algorithm>
#include <charconv>
#include <string_view>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace heat {

using json = nlohmann::ordered_json;

const ModelPopulation& ModelFile::population(const std::string& label) const
{
    for (const auto& p : populations)
        if (p.label == label) return p;
    throw ModelError("model has no population '" + label + "'");
}

void ModelFile::validate() const
{
    if (version != kModelFileVersion)
        throw ModelError("unsupported model file version " + std::to_string(version) + " (expected " +
                         std::to_string(kModelFileVersion) + ")");
    if (populations.empty()) throw ModelError("model has no populations");
    const std::set<std::string> known(predictors.begin(), predictors.end());
    std::set<std::string> labels;
    for (const auto& p : populations) {
        if (!labels.insert(p.label).second) throw ModelError("duplicate population '" + p.label + "'");
        if (!(p.sigma_hat > 0.0) || !std::isfinite(p.sigma_hat))
            throw ModelError("population '" + p.label + "' has non-positive sigma");
        if (!std::isfinite(p.intercept)) throw ModelError("population '" + p.label + "' has a non-finite intercept");
        for (const auto& [name, value] : p.coefficients) {
            if (!known.count(name)) throw ModelError("coefficient '" + name + "' is not a model predictor");
            if (!std::isfinite(value)) throw ModelError("coefficient '" + name + "' is not finite");
        }
    }
}

ModelFile model_from_fit(const FitResult& fit, const std::vector<std::string>& predictors, std::uint64_t seed)
{
    if (static_cast<Index>(predictors.size()) != fit.B_hat.rows())
        throw ModelError("predictor names do not match the fitted coefficients");
    ModelFile m;
    m.estimator = fit.estimator;
    m.lambda = fit.params.lambda;
    m.gamma = fit.params.gamma;
    m.converged = fit.converged;
    m.iterations = fit.iterations;
    m.seed = seed;
    m.predictors = predictors;
    for (size_t c = 0; c < fit.labels.size(); ++c) {
        const Index col = static_cast<Index>(c);
        ModelPopulation p;
        p.label = fit.labels[c];
        p.intercept = fit.intercepts(col);
        p.sigma_hat = fit.sigma_hat(col);
        for (Index k = 0; k < fit.B_hat.rows(); ++k)
            if (fit.B_hat(k, col) != 0.0) p.coefficients.emplace_back(predictors[static_cast<size_t>(k)], fit.B_hat(k, col));
        m.populations.push_back(std::move(p));
    }
    m.validate();
    return m;
}

std::string to_text(const ModelFile& model)
{
    json j;
    j["version"] = model.version;
    j["fit"] = {{"estimator", model.estimator}, {"lambda", model.lambda},   {"gamma", model.gamma},
                {"converged", model.converged}, {"iterations", model.iterations}, {"seed", model.seed}};
    j["predictors"] = model.predictors;
    json pops = json::array();
    for (const auto& p : model.populations) {
        json coefs = json::array();
        for (const auto& [name, value] : p.coefficients) coefs.push_back({{"predictor", name}, {"beta", value}});
        pops.push_back({{"label", p.label}, {"intercept", p.intercept}, {"sigma", p.sigma_hat}, {"coefficients", coefs}});
    }
    j["populations"] = pops;
    return j.dump(2) + "\n";
}

void write_model(std::ostream& out, const ModelFile& model)
{
    out << to_text(model);
}

void write_model(const std::filesystem::path& path, const ModelFile& model)
{
    std::ofstream out(path);
    if (!out) throw ModelError(path.string() + ": cannot open for writing");
    write_model(out, model);
    if (!out) throw ModelError(path.string() + ": write failed");
}

ModelFile parse_model(const std::string& text, const std::string& source)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ModelError(source + ": " + e.what());
    }
    ModelFile m;
    try {
        m.version = j.at("version").get<int>();
        if (m.version != kModelFileVersion)
            throw ModelError(source + ": unsupported model file version " + std::to_string(m.version));
        const auto& fit = j.at("fit");
        m.estimator = fit.at("estimator").get<std::string>();
        m.lambda = fit.at("lambda").get<double>();
        m.gamma = fit.at("gamma").get<double>();
        m.converged = fit.at("converged").get<bool>();
        m.iterations = fit.at("iterations").get<int>();
        m.seed = fit.at("seed").get<std::uint64_t>();
        m.predictors = j.at("predictors").get<std::vector<std::string>>();
        for (const auto& pj : j.at("populations")) {
            ModelPopulation p;
            p.label = pj.at("label").get<std::string>();
            p.intercept = pj.at("intercept").get<double>();
            p.sigma_hat = pj.at("sigma").get<double>();
            for (const auto& c : pj.at("coefficients"))
                p.coefficients.emplace_back(c.at("predictor").get<std::string>(), c.at("beta").get<double>());
            m.populations.push_back(std::move(p));
        }
        m.validate();
    } catch (const json::exception& e) {
        throw ModelError(source + ": malformed model file: " + e.what());
    } catch (const ModelError& e) {
        const std::string what = e.what();
        if (what.rfind(source, 0) == 0) throw;
        throw ModelError(source + ": " + what);
    }
    return m;
}

ModelFile read_model(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ModelError(path.string() + ": cannot open model file");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str(), path.string());
}

Vector predict(const ModelPopulation& model, const std::vector<std::string>& names, const Matrix& X)
{
    if (static_cast<Index>(names.size()) != X.cols()) throw ModelError("predict: names do not match design columns");
    std::unordered_map<std::string, Index> column;
    for (size_t c = 0; c < names.size(); ++c) column.emplace(names[c], static_cast<Index>(c));
    std::vector<std::string> missing;
    Vector yhat = Vector::Constant(X.rows(), model.intercept);
    for (const auto& [name, value] : model.coefficients) {
        const auto it = column.find(name);
        if (it == column.end()) {
            missing.push_back(name);
            continue;
        }
        yhat += value * X.col(it->second);
    }
    if (!missing.empty()) {
        std::string msg = "data lacks model predictors:";
        for (const auto& n : missing) msg += " " + n;
        throw ModelError(msg);
    }
    return yhat;
}

void write_weights(std::ostream& out, const ModelFile& model)
{
    out << "population,predictor,weight\n";
    char buf[40];
    for (const auto& p : model.populations)
        for (const auto& [name, value] : p.coefficients) {
            const auto res = std::to_chars(buf, buf + sizeof buf, value);
            out << p.label << ',' << name << ',' << std::string_view(buf, static_cast<size_t>(res.ptr - buf)) << '\n';
        }
}

} // namespace heat
