#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cdrc {

enum class Role { baseline_covariate, time_covariate, treatment, outcome, censoring };
enum class ValueKind { continuous, binary, categorical };

std::string_view to_string(Role role);
std::string_view to_string(ValueKind kind);
Role parse_role(std::string_view text);
ValueKind parse_value_kind(std::string_view text);

struct ColumnRole {
  std::string name;
  Role role = Role::baseline_covariate;
  std::optional<int> time_index;  // absent for baseline covariates
  ValueKind kind = ValueKind::continuous;
};

/// Parses the JSON sidecar: either `{"columns": [...]}` or a bare array of
/// `{name, role, time_index, value_kind}` objects.
std::vector<ColumnRole> parse_schema_json(std::string_view text);
std::vector<ColumnRole> load_schema(const std::filesystem::path& path);
std::string schema_to_json(std::span<const ColumnRole> schema);

/// Wide-format longitudinal data, one row per unit. Immutable after
/// construction; every structural invariant is checked by the constructor.
///
/// Cells are doubles; missing cells are NaN. Categorical columns hold level
/// codes 0..k-1 in order of first appearance, so level 0 is the reference
/// level of any one-hot expansion.
class Dataset {
 public:
  struct Column {
    std::vector<double> values;
    std::vector<std::string> levels;  // categorical only
  };

  Dataset(std::vector<ColumnRole> schema, std::vector<Column> columns);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return schema_.size(); }
  int horizon() const noexcept { return horizon_; }  // T; time points are 0..T

  const ColumnRole& schema(std::size_t j) const { return schema_.at(j); }
  const std::vector<ColumnRole>& schema() const noexcept { return schema_; }
  std::span<const double> column(std::size_t j) const { return columns_.at(j).values; }
  double at(std::size_t row, std::size_t col) const { return columns_[col].values[row]; }
  const std::vector<std::string>& levels(std::size_t j) const { return columns_.at(j).levels; }

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;  // throws SchemaError

  std::size_t treatment(int t) const;
  std::size_t outcome(int t) const;
  std::optional<std::size_t> censoring(int t) const;
  bool has_censoring() const noexcept { return first_censoring_ >= 0; }

  /// L_t: time-varying covariates at t; at t = 0 baseline covariates come first.
  std::vector<std::size_t> covariates(int t) const;
  /// H_t: every column that precedes A_t in temporal order.
  std::vector<std::size_t> history(int t) const;
  /// Column indices in temporal order L_t -> A_t -> C_t -> Y_t per time point.
  const std::vector<std::size_t>& ordering() const noexcept { return ordering_; }
  std::size_t position(std::size_t col) const { return position_.at(col); }

  /// Bootstrap-style row selection (indices may repeat).
  Dataset select_rows(std::span<const std::size_t> rows) const;

 private:
  void validate_schema() const;
  void validate_cells() const;

  std::vector<ColumnRole> schema_;
  std::vector<Column> columns_;
  std::size_t rows_ = 0;
  int horizon_ = 0;
  int first_censoring_ = -1;
  std::vector<std::size_t> treatment_;
  std::vector<std::size_t> outcome_;
  std::vector<std::optional<std::size_t>> censoring_;
  std::vector<std::size_t> ordering_;
  std::vector<std::size_t> position_;
};

/// Reads a header-first CSV and binds it to `schema`. Header columns that are
/// not in the schema are ignored. Cells "", "NA", "NaN" are missing.
Dataset load_dataset(const std::filesystem::path& path, const std::vector<ColumnRole>& schema);
Dataset read_dataset(std::istream& in, const std::vector<ColumnRole>& schema);
void save_dataset(const Dataset& data, const std::filesystem::path& path);
void write_dataset(const Dataset& data, std::ostream& out);

/// The set of intervention trajectories to evaluate; each has length T+1.
class InterventionGrid {
 public:
  InterventionGrid(std::vector<std::vector<double>> trajectories,
                   std::vector<std::string> labels = {});

  std::size_t size() const noexcept { return trajectories_.size(); }
  std::size_t length() const noexcept { return trajectories_.front().size(); }
  std::span<const double> trajectory(std::size_t j) const { return trajectories_.at(j); }
  const std::string& label(std::size_t j) const { return labels_.at(j); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  /// Same trajectories truncated to the first `length` time points.
  InterventionGrid prefix(std::size_t length) const;

 private:
  std::vector<std::vector<double>> trajectories_;
  std::vector<std::string> labels_;
};

/// One trajectory per value, constant over T+1 time points.
InterventionGrid constant_grid(std::span<const double> values, int horizon);
/// "from:to:step" or "v1,v2,..." constant strategies.
InterventionGrid parse_grid_spec(std::string_view spec, int horizon);
/// CSV with header `label,a0,a1,...` (label column optional).
InterventionGrid load_grid_csv(const std::filesystem::path& path);

enum class Estimand { cdrc_sequential, cdrc_parametric, weighted };
std::string_view to_string(Estimand estimand);
Estimand parse_estimand(std::string_view text);

struct CurvePoint {
  std::size_t trajectory = 0;
  int time = 0;
  double value = 0.0;
  bool undefined = false;
};

struct CurveMeta {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string learner;
};

struct CurveEstimate {
  Estimand estimand = Estimand::cdrc_sequential;
  std::optional<double> c;
  std::vector<std::string> labels;
  std::vector<CurvePoint> points;
  CurveMeta meta;

  const CurvePoint& at(std::size_t trajectory, int time) const;
  double value(std::size_t trajectory, int time) const { return at(trajectory, time).value; }
  bool any_undefined() const;
};

/// `trajectory_label,time,estimand,c,value,undefined_flag`
void write_curve_csv(const CurveEstimate& curve, std::ostream& out);

}  // namespace cdrc
