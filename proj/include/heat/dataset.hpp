#pragma once
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <heat/types.hpp>

namespace heat {

/// Raised for malformed input files and inconsistent raw data. Carries the
/// offending file and line when known.
class DataError : public std::runtime_error
{
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class ScaleMode { none, unit_norm_bounded, unit_variance };
enum class ScaleScope { per_population, joint };

struct StandardizeOptions
{
    ScaleMode mode = ScaleMode::unit_norm_bounded;
    ScaleScope scope = ScaleScope::per_population;
};

/// One population as it arrives from disk or a generator: its own predictor
/// names, in its own column order.
struct RawPopulation
{
    std::string label;
    Vector y;
    Matrix X;
    std::vector<std::string> predictors;
};

/*
 * A population after alignment to the union predictor set.
 *
 * X holds the centered, scaled design with exactly p* columns; columns the
 * population does not have are identically zero. Raw values are recovered as
 *     X_raw = X * column_scales + column_means    (column-wise)
 *     y_raw = y + response_mean
 */
struct PopulationBlock
{
    std::string label;
    Vector y;
    Matrix X;
    std::vector<bool> available;
    Vector column_means;
    Vector column_scales;
    double response_mean = 0.0;

    Index n() const { return y.size(); }
};

/// Rescales the available columns of block.X in place of the given copy and
/// records the divisors in column_scales. Does not center. Constant available
/// columns are marked unavailable and zeroed.
PopulationBlock standardize(PopulationBlock block, ScaleMode mode);

/// Inverse of centering + scaling: the raw design (zero-padded columns stay at
/// their recorded mean, which is 0 for padding).
Matrix destandardize_design(const PopulationBlock& block);
Vector destandardize_response(const PopulationBlock& block);

class MultiPopDataset
{
public:
    MultiPopDataset() = default;

    /// Aligns populations by predictor name (lexicographic union), pads missing
    /// columns with zeros, centers per population and standardizes.
    static MultiPopDataset from_raw(const std::vector<RawPopulation>& raw,
                                    StandardizeOptions options = {});

    const std::vector<PopulationBlock>& populations() const { return pops_; }
    const PopulationBlock& population(Index j) const { return pops_.at(static_cast<size_t>(j)); }
    const std::vector<std::string>& predictors() const { return names_; }
    const StandardizeOptions& options() const { return options_; }

    Index num_predictors() const { return static_cast<Index>(names_.size()); }
    Index num_populations() const { return static_cast<Index>(pops_.size()); }
    Index total_samples() const;

    /// p* x J availability (after zero-variance demotion).
    Mask availability() const;

    /// Index of the population with this label, or -1.
    Index find(const std::string& label) const;

    /// Raw form of every population, restricted to its available predictors.
    std::vector<RawPopulation> to_raw() const;

    /// Rebuilds from the raw rows selected per population, re-centering and
    /// re-standardizing on the subset. Predictor union is kept.
    MultiPopDataset subset(const std::vector<std::vector<Index>>& rows) const;

private:
    std::vector<PopulationBlock> pops_;
    std::vector<std::string> names_;
    StandardizeOptions options_;
};

/// Reads one delimited population file (comma or tab). The first column must
/// be named `response` unless response_optional is set, in which case a file
/// without it yields an empty y.
RawPopulation read_population_file(const std::filesystem::path& path, const std::string& label,
                                   bool response_optional = false);

struct ManifestEntry
{
    std::string label;
    std::filesystem::path path;
};

/// `label = path` lines; `#` starts a comment; relative paths resolve against
/// the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);

MultiPopDataset load_dataset(const std::vector<ManifestEntry>& entries, StandardizeOptions options = {});
MultiPopDataset load_dataset(const std::filesystem::path& manifest, StandardizeOptions options = {});

ScaleMode parse_scale_mode(const std::string& s);

} // namespace heat
