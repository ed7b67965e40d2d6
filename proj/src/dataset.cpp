#include <heat/dataset.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace heat {
namespace {

bool is_constant(const Eigen::Ref<const Vector>& col)
{
    if (col.size() == 0) return true;
    const double first = col(0);
    const double tol = 1e-12 * std::max(1.0, std::abs(first));
    return ((col.array() - first).abs() <= tol).all();
}

double scale_for(const Eigen::Ref<const Vector>& col, ScaleMode mode)
{
    const double n = static_cast<double>(col.size());
    switch (mode) {
    case ScaleMode::none:
        return 1.0;
    case ScaleMode::unit_norm_bounded:
        // ||x / s||^2 = n
        return std::sqrt(col.squaredNorm() / n);
    case ScaleMode::unit_variance: {
        if (col.size() < 2) return 1.0;
        const double mean = col.mean();
        return std::sqrt((col.array() - mean).square().sum() / (n - 1.0));
    }
    }
    return 1.0;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char delim)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, delim)) out.push_back(trim(cell));
    if (!line.empty() && line.back() == delim) out.emplace_back();
    return out;
}

} // namespace

PopulationBlock standardize(PopulationBlock block, ScaleMode mode)
{
    const Index p = block.X.cols();
    if (block.column_scales.size() != p) block.column_scales = Vector::Ones(p);
    if (block.column_means.size() != p) block.column_means = Vector::Zero(p);
    if (block.available.size() != static_cast<size_t>(p)) block.available.assign(static_cast<size_t>(p), true);

    for (Index k = 0; k < p; ++k) {
        auto col = block.X.col(k);
        if (!block.available[static_cast<size_t>(k)]) {
            col.setZero();
            continue;
        }
        if (is_constant(col)) {
            // constant columns carry no information within the population;
            // fold them into the mean record and drop availability
            block.column_means(k) += col.size() ? col(0) : 0.0;
            col.setZero();
            block.available[static_cast<size_t>(k)] = false;
            block.column_scales(k) = 1.0;
            continue;
        }
        const double s = scale_for(col, mode);
        col /= s;
        block.column_scales(k) *= s;
    }
    return block;
}

Matrix destandardize_design(const PopulationBlock& block)
{
    Matrix raw = block.X * block.column_scales.asDiagonal();
    raw.rowwise() += block.column_means.transpose();
    return raw;
}

Vector destandardize_response(const PopulationBlock& block)
{
    return block.y.array() + block.response_mean;
}

Index MultiPopDataset::total_samples() const
{
    Index n = 0;
    for (const auto& b : pops_) n += b.n();
    return n;
}

Mask MultiPopDataset::availability() const
{
    Mask m(num_predictors(), num_populations());
    for (Index j = 0; j < num_populations(); ++j)
        for (Index k = 0; k < num_predictors(); ++k)
            m(k, j) = pops_[static_cast<size_t>(j)].available[static_cast<size_t>(k)];
    return m;
}

Index MultiPopDataset::find(const std::string& label) const
{
    for (size_t j = 0; j < pops_.size(); ++j)
        if (pops_[j].label == label) return static_cast<Index>(j);
    return -1;
}

MultiPopDataset MultiPopDataset::from_raw(const std::vector<RawPopulation>& raw, StandardizeOptions options)
{
    if (raw.empty()) throw DataError("dataset has no populations");

    std::set<std::string> union_names;
    std::set<std::string> labels;
    for (const auto& pop : raw) {
        if (!labels.insert(pop.label).second)
            throw DataError("duplicate population label '" + pop.label + "'");
        if (pop.y.size() == 0) throw DataError("population '" + pop.label + "' is empty");
        if (pop.X.rows() != pop.y.size())
            throw DataError("population '" + pop.label + "': design has " + std::to_string(pop.X.rows()) +
                            " rows but response has " + std::to_string(pop.y.size()));
        if (pop.X.cols() != static_cast<Index>(pop.predictors.size()))
            throw DataError("population '" + pop.label + "': design/predictor-name count mismatch");
        if (!pop.y.allFinite() || !pop.X.allFinite())
            throw DataError("population '" + pop.label + "' contains missing or non-finite values");
        std::set<std::string> seen;
        for (const auto& name : pop.predictors) {
            if (!seen.insert(name).second)
                throw DataError("population '" + pop.label + "': duplicate predictor '" + name + "'");
            union_names.insert(name);
        }
    }

    MultiPopDataset ds;
    ds.options_ = options;
    ds.names_.assign(union_names.begin(), union_names.end());
    const Index p = ds.num_predictors();
    std::map<std::string, Index> position;
    for (Index k = 0; k < p; ++k) position[ds.names_[static_cast<size_t>(k)]] = k;

    for (const auto& pop : raw) {
        PopulationBlock b;
        b.label = pop.label;
        const Index n = pop.y.size();
        b.response_mean = pop.y.mean();
        b.y = pop.y.array() - b.response_mean;
        b.X = Matrix::Zero(n, p);
        b.available.assign(static_cast<size_t>(p), false);
        b.column_means = Vector::Zero(p);
        b.column_scales = Vector::Ones(p);
        for (size_t c = 0; c < pop.predictors.size(); ++c) {
            const Index k = position.at(pop.predictors[c]);
            const double mean = pop.X.col(static_cast<Index>(c)).mean();
            b.X.col(k) = pop.X.col(static_cast<Index>(c)).array() - mean;
            b.column_means(k) = mean;
            b.available[static_cast<size_t>(k)] = true;
        }
        ds.pops_.push_back(std::move(b));
    }

    if (options.scope == ScaleScope::per_population) {
        for (auto& b : ds.pops_) b = standardize(std::move(b), options.mode);
    } else {
        // demote constants first, then share one divisor per predictor
        for (auto& b : ds.pops_) b = standardize(std::move(b), ScaleMode::none);
        for (Index k = 0; k < p; ++k) {
            double ss = 0.0, count = 0.0;
            for (const auto& b : ds.pops_) {
                if (!b.available[static_cast<size_t>(k)]) continue;
                ss += b.X.col(k).squaredNorm();
                count += static_cast<double>(b.n());
            }
            if (count == 0.0 || ss == 0.0 || options.mode == ScaleMode::none) continue;
            const double denom = options.mode == ScaleMode::unit_variance ? std::max(count - 1.0, 1.0) : count;
            const double s = std::sqrt(ss / denom);
            for (auto& b : ds.pops_) {
                if (!b.available[static_cast<size_t>(k)]) continue;
                b.X.col(k) /= s;
                b.column_scales(k) = s;
            }
        }
    }
    return ds;
}

std::vector<RawPopulation> MultiPopDataset::to_raw() const
{
    std::vector<RawPopulation> out;
    for (const auto& b : pops_) {
        RawPopulation r;
        r.label = b.label;
        r.y = destandardize_response(b);
        const Matrix full = destandardize_design(b);
        std::vector<Index> keep;
        for (Index k = 0; k < num_predictors(); ++k) {
            // demoted constant columns are reinstated; the rebuild demotes them again
            const bool constant_demoted = !b.available[static_cast<size_t>(k)] && b.column_means(k) != 0.0;
            if (b.available[static_cast<size_t>(k)] || constant_demoted) keep.push_back(k);
        }
        r.X.resize(b.n(), static_cast<Index>(keep.size()));
        for (size_t c = 0; c < keep.size(); ++c) {
            r.X.col(static_cast<Index>(c)) = full.col(keep[c]);
            r.predictors.push_back(names_[static_cast<size_t>(keep[c])]);
        }
        out.push_back(std::move(r));
    }
    return out;
}

MultiPopDataset MultiPopDataset::subset(const std::vector<std::vector<Index>>& rows) const
{
    if (rows.size() != pops_.size()) throw std::invalid_argument("subset: one row list per population required");
    auto raw = to_raw();
    for (size_t j = 0; j < raw.size(); ++j) {
        const auto& idx = rows[j];
        Vector y(static_cast<Index>(idx.size()));
        Matrix X(static_cast<Index>(idx.size()), raw[j].X.cols());
        for (size_t i = 0; i < idx.size(); ++i) {
            y(static_cast<Index>(i)) = raw[j].y(idx[i]);
            X.row(static_cast<Index>(i)) = raw[j].X.row(idx[i]);
        }
        raw[j].y = std::move(y);
        raw[j].X = std::move(X);
    }
    MultiPopDataset out = from_raw(raw, options_);
    // keep the parent's predictor indexing even if a predictor vanished
    if (out.names_ != names_) {
        std::map<std::string, Index> position;
        for (Index k = 0; k < out.num_predictors(); ++k) position[out.names_[static_cast<size_t>(k)]] = k;
        for (auto& b : out.pops_) {
            PopulationBlock nb;
            nb.label = b.label;
            nb.y = b.y;
            nb.response_mean = b.response_mean;
            nb.X = Matrix::Zero(b.n(), num_predictors());
            nb.available.assign(names_.size(), false);
            nb.column_means = Vector::Zero(num_predictors());
            nb.column_scales = Vector::Ones(num_predictors());
            for (Index k = 0; k < num_predictors(); ++k) {
                auto it = position.find(names_[static_cast<size_t>(k)]);
                if (it == position.end()) continue;
                nb.X.col(k) = b.X.col(it->second);
                nb.available[static_cast<size_t>(k)] = b.available[static_cast<size_t>(it->second)];
                nb.column_means(k) = b.column_means(it->second);
                nb.column_scales(k) = b.column_scales(it->second);
            }
            b = std::move(nb);
        }
        out.names_ = names_;
    }
    return out;
}

RawPopulation read_population_file(const std::filesystem::path& path, const std::string& label, bool response_optional)
{
    std::ifstream in(path);
    if (!in) throw DataError(path.string() + ": cannot open file");

    std::string line;
    Index line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) throw DataError(path.string() + ": empty file");
    const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
    header = split(line, delim);
    const bool has_response = !header.empty() && header.front() == "response";
    if (!has_response && !response_optional)
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": first column must be 'response'");
    const Index skip = has_response ? 1 : 0;

    RawPopulation pop;
    pop.label = label;
    pop.predictors.assign(header.begin() + skip, header.end());
    for (const auto& name : pop.predictors)
        if (name.empty()) throw DataError(path.string() + ":" + std::to_string(line_no) + ": empty predictor name");

    std::vector<double> values;
    Index rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split(line, delim);
        if (cells.size() != header.size())
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, found " + std::to_string(cells.size()));
        for (size_t c = 0; c < cells.size(); ++c) {
            const auto& cell = cells[c];
            double v = 0.0;
            const char* first = cell.data();
            const char* last = cell.data() + cell.size();
            if (!cell.empty() && *first == '+') ++first;
            auto [ptr, ec] = std::from_chars(first, last, v);
            if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
                throw DataError(path.string() + ":" + std::to_string(line_no) + ": non-numeric cell '" + cell +
                                "' in column '" + header[c] + "'");
            values.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) throw DataError(path.string() + ": population '" + label + "' has no rows");

    const Index cols = static_cast<Index>(header.size());
    pop.y = Vector::Zero(has_response ? rows : 0);
    pop.X.resize(rows, cols - skip);
    for (Index i = 0; i < rows; ++i) {
        if (has_response) pop.y(i) = values[static_cast<size_t>(i * cols)];
        for (Index c = skip; c < cols; ++c) pop.X(i, c - skip) = values[static_cast<size_t>(i * cols + c)];
    }
    return pop;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest)
{
    std::ifstream in(manifest);
    if (!in) throw DataError(manifest.string() + ": cannot open manifest");
    std::vector<ManifestEntry> out;
    std::string line;
    Index line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError(manifest.string() + ":" + std::to_string(line_no) + ": expected 'label = path'");
        ManifestEntry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
        if (e.label.empty() || e.path.empty())
            throw DataError(manifest.string() + ":" + std::to_string(line_no) + ": expected 'label = path'");
        if (e.path.is_relative()) e.path = manifest.parent_path() / e.path;
        out.push_back(std::move(e));
    }
    if (out.empty()) throw DataError(manifest.string() + ": manifest lists no populations");
    return out;
}

MultiPopDataset load_dataset(const std::vector<ManifestEntry>& entries, StandardizeOptions options)
{
    std::vector<RawPopulation> raw;
    for (const auto& e : entries) raw.push_back(read_population_file(e.path, e.label));
    return MultiPopDataset::from_raw(raw, options);
}

MultiPopDataset load_dataset(const std::filesystem::path& manifest, StandardizeOptions options)
{
    return load_dataset(read_manifest(manifest), options);
}

ScaleMode parse_scale_mode(const std::string& s)
{
    if (s == "none") return ScaleMode::none;
    if (s == "unit_norm_bounded" || s == "unit-norm") return ScaleMode::unit_norm_bounded;
    if (s == "unit_variance" || s == "unit-variance") return ScaleMode::unit_variance;
    throw std::invalid_argument("unknown standardization mode '" + s + "'");
}

} // namespace heat
