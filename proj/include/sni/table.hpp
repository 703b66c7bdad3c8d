#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sni {

enum class FeatureKind { Continuous, Categorical };

struct Feature {
  std::string name;
  FeatureKind kind = FeatureKind::Continuous;
  std::vector<std::string> categories;  // categorical only

  bool is_categorical() const { return kind == FeatureKind::Categorical; }
  int n_categories() const { return static_cast<int>(categories.size()); }
};

struct FeatureSchema {
  std::vector<Feature> features;

  int size() const { return static_cast<int>(features.size()); }
  const Feature& at(int j) const { return features.at(static_cast<size_t>(j)); }
  int find(const std::string& name) const;  // -1 if absent

  // Throws on duplicate feature names or duplicate category labels.
  void validate() const;

  static FeatureSchema from_json_text(const std::string& text);
  static FeatureSchema from_json_file(const std::string& path);
  std::string to_json_text() const;
};

// Mixed-type table with an explicit observation mask. Continuous cells hold
// real values; categorical cells hold category indices. Unobserved cells are
// never read through get().
class MixedTable {
 public:
  MixedTable(FeatureSchema schema, int n_rows);

  int n_rows() const { return n_; }
  int n_features() const { return schema_.size(); }
  const FeatureSchema& schema() const { return schema_; }

  bool observed(int r, int j) const { return mask_[idx(r, j)] != 0; }
  double get(int r, int j) const;
  void set(int r, int j, double v);
  void set_missing(int r, int j);

  int64_t n_missing() const;
  bool complete() const { return n_missing() == 0; }
  int n_observed(int j) const;
  std::vector<int> features_with_missing() const;

 private:
  size_t idx(int r, int j) const {
    return static_cast<size_t>(r) * static_cast<size_t>(schema_.size()) +
           static_cast<size_t>(j);
  }

  FeatureSchema schema_;
  int n_ = 0;
  std::vector<double> cells_;
  std::vector<uint8_t> mask_;
};

// Per-feature standardization statistics from observed cells only.
// std is the sample standard deviation floored at 1e-8.
struct StandardizerStats {
  double mean = 0.0;
  double std = 1.0;
  double observed_min = 0.0;
  double observed_max = 0.0;
};

constexpr double kStdFloor = 1e-8;

// nullopt for categorical features. Throws if a feature has no observed cell.
std::vector<std::optional<StandardizerStats>> compute_standardizers(
    const MixedTable& t);

// Numeric design matrix: z-scored continuous columns, one-hot categorical
// groups. column_groups maps each feature to its (offset, width) span.
struct CorrelationDesign {
  Eigen::MatrixXd matrix;
  std::vector<std::pair<int, int>> column_groups;

  int width() const { return static_cast<int>(matrix.cols()); }
};

// `filled` is a complete row-major n x d value matrix (imputed cells included).
// Standardization uses `stats`, which must come from the table's observed
// cells only.
CorrelationDesign build_correlation_design(
    const MixedTable& t, const std::vector<double>& filled,
    const std::vector<std::optional<StandardizerStats>>& stats);

struct Partition {
  std::vector<int> train, validation, test;
};

// Shuffles rows with the given seed and splits by fractions (which must be
// positive and sum to 1). Every split is non-empty; requires n >= 3.
Partition partition_rows(int n, const std::array<double, 3>& fractions,
                         uint64_t seed);

double clip_to_observed_range(double v, const StandardizerStats& s);

// CSV layer. The header must match the schema feature names in order.
// Cells matching any entry of `missing_tokens` load as unobserved.
MixedTable load_csv(const std::string& path, FeatureSchema schema,
                    const std::vector<std::string>& missing_tokens = {"",
                                                                      "NA"});
void write_csv(const MixedTable& t, const std::string& path,
               const std::string& missing_token = "NA");

// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

}  // namespace sni
