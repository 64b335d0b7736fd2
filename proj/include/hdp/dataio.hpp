#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hdp::data {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class AttributeKind { Categorical, Numeric };

struct Attribute {
  std::string name;
  AttributeKind kind = AttributeKind::Numeric;
  std::vector<int> domain;  // categorical only, ascending
  bool non_negative = false;

  bool categorical() const { return kind == AttributeKind::Categorical; }
  bool admits(double value) const;
};

// Predictor attributes only; the diagnosis column is handled separately.
using Schema = std::vector<Attribute>;

// The 13 predictors of the 14-attribute heart-disease projection, in file order.
Schema cleveland_schema();

struct Record {
  std::vector<std::optional<double>> values;
  int num = 0;  // diagnosis 0..4

  bool complete() const;
  friend bool operator==(const Record&, const Record&) = default;
};

struct Dataset {
  std::string name;
  Schema schema;
  std::vector<Record> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  // Throws DataError when the attribute is not in the schema.
  std::size_t index_of(const std::string& attribute) const;
  std::optional<std::size_t> find(const std::string& attribute) const;
  Dataset with_records(std::vector<Record> rows) const;
};

Dataset parse_csv(const std::filesystem::path& path, const Schema& schema = cleveland_schema());
Dataset parse_csv(std::istream& in, const Schema& schema, std::string name);

// Header row plus one line per record; missing cells are written as "?".
void write_csv(std::ostream& out, const Dataset& ds);
std::string format_value(double v);

// 0 -> 0, 1..4 -> 1.
int binarize_label(int num);

struct ImputeReport {
  std::map<std::string, std::size_t> filled;  // attribute -> cells
  std::size_t total() const;
};

// Fills each missing cell from its k nearest records in normalized
// (age, chol, trestbps) space that have the attribute present.
Dataset impute_missing(const Dataset& ds, int k = 5, ImputeReport* report = nullptr);

struct RedundancyReport {
  std::size_t duplicate_rows = 0;
  std::vector<std::string> constant_attributes;
};

Dataset remove_redundancy(const Dataset& ds, RedundancyReport* report = nullptr);

// Always has keys 1..4.
std::map<int, Dataset> stratify_by_chest_pain(const Dataset& ds);

struct Range {
  double min = 0.0;
  double max = 0.0;
};

// Per-attribute affine map onto [0,1]. Categorical attributes use (0, domain max).
struct NormalizationTable {
  std::vector<std::string> names;
  std::vector<Range> ranges;

  std::size_t size() const { return names.size(); }
  // (x - min) / (max - min) clamped to [0,1]; degenerate ranges map to 0.
  double apply(std::size_t attribute, double value) const;
};

NormalizationTable fit_normalization(const Dataset& ds);
Dataset apply_normalization(const Dataset& ds, const NormalizationTable& table);

struct Normalized {
  Dataset data;
  NormalizationTable table;
};

Normalized normalize_minmax(const Dataset& ds);

struct Fold {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> test_rows;  // indices into the source dataset
};

// Label-stratified k-fold partition, deterministic in seed.
std::vector<Fold> kfold_split(const Dataset& ds, int k, std::uint64_t seed);

// Row-major design matrix over the given attribute columns. Requires complete rows.
Eigen::MatrixXd feature_matrix(const Dataset& ds, const std::vector<std::size_t>& columns);
Eigen::VectorXd binary_labels(const Dataset& ds);

struct PreprocessReport {
  std::size_t input_rows = 0;
  ImputeReport imputed;
  RedundancyReport redundancy;
  std::size_t output_rows = 0;

  std::string to_text() const;
};

// Imputation followed by redundancy removal.
Dataset preprocess(const Dataset& raw, int impute_k, PreprocessReport* report = nullptr);

}  // namespace hdp::data
