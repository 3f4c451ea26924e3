#include "cdrc/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cdrc/csv.hpp"
#include "cdrc/error.hpp"

namespace cdrc {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string column_label(const ColumnRole& c) {
  return "'" + c.name + "'";
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::baseline_covariate: return "baseline_covariate";
    case Role::time_covariate: return "time_covariate";
    case Role::treatment: return "treatment";
    case Role::outcome: return "outcome";
    case Role::censoring: return "censoring";
  }
  return "?";
}

std::string_view to_string(ValueKind kind) {
  switch (kind) {
    case ValueKind::continuous: return "continuous";
    case ValueKind::binary: return "binary";
    case ValueKind::categorical: return "categorical";
  }
  return "?";
}

Role parse_role(std::string_view text) {
  for (Role r : {Role::baseline_covariate, Role::time_covariate, Role::treatment, Role::outcome,
                 Role::censoring}) {
    if (to_string(r) == text) return r;
  }
  throw SchemaError("unknown column role '" + std::string(text) + "'");
}

ValueKind parse_value_kind(std::string_view text) {
  for (ValueKind k : {ValueKind::continuous, ValueKind::binary, ValueKind::categorical}) {
    if (to_string(k) == text) return k;
  }
  throw SchemaError("unknown value kind '" + std::string(text) + "'");
}

std::vector<ColumnRole> parse_schema_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("schema JSON: ") + e.what());
  }
  const nlohmann::json& list = doc.is_object() && doc.contains("columns") ? doc["columns"] : doc;
  if (!list.is_array()) throw SchemaError("schema must be an array of column objects");
  std::vector<ColumnRole> schema;
  for (const auto& item : list) {
    if (!item.is_object() || !item.contains("name") || !item.contains("role")) {
      throw SchemaError("schema entry needs at least 'name' and 'role'");
    }
    ColumnRole c;
    c.name = item["name"].get<std::string>();
    c.role = parse_role(item["role"].get<std::string>());
    if (item.contains("time_index") && !item["time_index"].is_null()) {
      c.time_index = item["time_index"].get<int>();
    }
    if (item.contains("value_kind")) c.kind = parse_value_kind(item["value_kind"].get<std::string>());
    schema.push_back(std::move(c));
  }
  return schema;
}

std::vector<ColumnRole> load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open schema file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_schema_json(buffer.str());
}

std::string schema_to_json(std::span<const ColumnRole> schema) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : schema) {
    nlohmann::json item;
    item["name"] = c.name;
    item["role"] = std::string(to_string(c.role));
    if (c.time_index) item["time_index"] = *c.time_index;
    item["value_kind"] = std::string(to_string(c.kind));
    list.push_back(std::move(item));
  }
  nlohmann::json doc;
  doc["columns"] = std::move(list);
  return doc.dump(2) + "\n";
}

Dataset::Dataset(std::vector<ColumnRole> schema, std::vector<Column> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {
  if (schema_.empty()) throw SchemaError("schema has no columns");
  if (columns_.size() != schema_.size()) {
    throw SchemaError("schema lists " + std::to_string(schema_.size()) + " columns but " +
                      std::to_string(columns_.size()) + " were supplied");
  }
  rows_ = columns_.front().values.size();
  for (const auto& col : columns_) {
    if (col.values.size() != rows_) throw SchemaError("columns have unequal lengths");
  }
  if (rows_ == 0) throw SchemaError("dataset has no rows");
  validate_schema();

  position_.assign(schema_.size(), 0);
  for (int t = 0; t <= horizon_; ++t) {
    auto append = [&](auto&& pred) {
      for (std::size_t j = 0; j < schema_.size(); ++j) {
        if (pred(schema_[j])) ordering_.push_back(j);
      }
    };
    if (t == 0) append([](const ColumnRole& c) { return c.role == Role::baseline_covariate; });
    append([t](const ColumnRole& c) { return c.role == Role::time_covariate && *c.time_index == t; });
    ordering_.push_back(treatment_[t]);
    if (censoring_[t]) ordering_.push_back(*censoring_[t]);
    ordering_.push_back(outcome_[t]);
  }
  for (std::size_t k = 0; k < ordering_.size(); ++k) position_[ordering_[k]] = k;
  validate_cells();
}

void Dataset::validate_schema() const {
  std::set<std::string> names;
  int max_t = -1;
  std::set<int> times;
  for (const auto& c : schema_) {
    if (c.name.empty()) throw SchemaError("column with empty name");
    if (!names.insert(c.name).second) throw SchemaError("duplicate column " + column_label(c));
    if (c.role == Role::baseline_covariate) {
      if (c.time_index) throw SchemaError("baseline covariate " + column_label(c) + " has a time index");
      continue;
    }
    if (!c.time_index) throw SchemaError("column " + column_label(c) + " needs a time index");
    if (*c.time_index < 0) throw SchemaError("negative time index on " + column_label(c));
    times.insert(*c.time_index);
    max_t = std::max(max_t, *c.time_index);
  }
  if (max_t < 0) throw SchemaError("schema has no time-indexed columns");
  for (int t = 0; t <= max_t; ++t) {
    if (!times.count(t)) {
      throw SchemaError("time indices are not contiguous: " + std::to_string(t) + " is missing");
    }
  }
  auto& self = const_cast<Dataset&>(*this);
  self.horizon_ = max_t;
  self.treatment_.assign(max_t + 1, 0);
  self.outcome_.assign(max_t + 1, 0);
  self.censoring_.assign(max_t + 1, std::nullopt);
  std::vector<int> n_treat(max_t + 1, 0), n_out(max_t + 1, 0), n_cens(max_t + 1, 0);
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    const auto& c = schema_[j];
    if (!c.time_index) continue;
    const int t = *c.time_index;
    switch (c.role) {
      case Role::treatment:
        if (c.kind == ValueKind::categorical) {
          throw SchemaError("treatment " + column_label(c) + " must be numeric");
        }
        self.treatment_[t] = j;
        ++n_treat[t];
        break;
      case Role::outcome:
        if (c.kind == ValueKind::categorical) {
          throw SchemaError("outcome " + column_label(c) + " must be continuous or binary");
        }
        self.outcome_[t] = j;
        ++n_out[t];
        break;
      case Role::censoring:
        if (c.kind != ValueKind::binary) {
          throw SchemaError("censoring column " + column_label(c) + " must be binary");
        }
        self.censoring_[t] = j;
        ++n_cens[t];
        break;
      default:
        break;
    }
  }
  for (int t = 0; t <= max_t; ++t) {
    if (n_treat[t] != 1) {
      throw SchemaError("time " + std::to_string(t) + " has " + std::to_string(n_treat[t]) +
                        " treatment columns (need exactly one)");
    }
    if (n_out[t] != 1) {
      throw SchemaError("time " + std::to_string(t) + " has " + std::to_string(n_out[t]) +
                        " outcome columns (need exactly one)");
    }
    if (n_cens[t] > 1) throw SchemaError("time " + std::to_string(t) + " has several censoring columns");
    if (n_cens[t] == 1 && self.first_censoring_ < 0) self.first_censoring_ = t;
  }
  if (first_censoring_ >= 0) {
    for (int t = first_censoring_; t <= max_t; ++t) {
      if (n_cens[t] != 1) {
        throw SchemaError("censoring column missing at time " + std::to_string(t) +
                          " after first appearance at " + std::to_string(first_censoring_));
      }
    }
  }
}

void Dataset::validate_cells() const {
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    const auto& c = schema_[j];
    const auto& col = columns_[j];
    for (std::size_t i = 0; i < rows_; ++i) {
      const double v = col.values[i];
      if (std::isnan(v)) continue;
      if (!std::isfinite(v)) {
        throw ParseError("non-finite value in column " + column_label(c) + " row " + std::to_string(i + 1));
      }
      if (c.kind == ValueKind::binary && v != 0.0 && v != 1.0) {
        throw ParseError("binary column " + column_label(c) + " holds " + csv::format_number(v) +
                         " at row " + std::to_string(i + 1));
      }
      if (c.kind == ValueKind::categorical &&
          (v < 0 || v != std::floor(v) || v >= static_cast<double>(col.levels.size()))) {
        throw ParseError("invalid level code in column " + column_label(c));
      }
    }
  }
  for (std::size_t i = 0; i < rows_; ++i) {
    bool censored = false;
    for (std::size_t j : ordering_) {
      const double v = columns_[j].values[i];
      if (std::isnan(v)) {
        if (!censored) {
          throw ParseError("missing value in column " + column_label(schema_[j]) + " at row " +
                           std::to_string(i + 1) + " without prior censoring");
        }
        continue;
      }
      if (schema_[j].role == Role::censoring && v == 1.0) censored = true;
    }
  }
}

std::optional<std::size_t> Dataset::find(std::string_view name) const {
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    if (schema_[j].name == name) return j;
  }
  return std::nullopt;
}

std::size_t Dataset::index_of(std::string_view name) const {
  if (auto j = find(name)) return *j;
  throw SchemaError("no column named '" + std::string(name) + "'");
}

std::size_t Dataset::treatment(int t) const { return treatment_.at(static_cast<std::size_t>(t)); }
std::size_t Dataset::outcome(int t) const { return outcome_.at(static_cast<std::size_t>(t)); }
std::optional<std::size_t> Dataset::censoring(int t) const {
  return censoring_.at(static_cast<std::size_t>(t));
}

std::vector<std::size_t> Dataset::covariates(int t) const {
  std::vector<std::size_t> out;
  for (std::size_t j : ordering_) {
    const auto& c = schema_[j];
    if (c.role == Role::time_covariate && *c.time_index == t) out.push_back(j);
    if (t == 0 && c.role == Role::baseline_covariate) out.push_back(j);
  }
  return out;
}

std::vector<std::size_t> Dataset::history(int t) const {
  const std::size_t stop = position_[treatment(t)];
  return {ordering_.begin(), ordering_.begin() + static_cast<std::ptrdiff_t>(stop)};
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  std::vector<Column> cols(columns_.size());
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    cols[j].levels = columns_[j].levels;
    cols[j].values.reserve(rows.size());
    for (std::size_t i : rows) cols[j].values.push_back(columns_[j].values.at(i));
  }
  return Dataset(schema_, std::move(cols));
}

Dataset read_dataset(std::istream& in, const std::vector<ColumnRole>& schema) {
  const csv::Table table = csv::read(in);
  std::map<std::string, std::size_t> header_index;
  for (std::size_t k = 0; k < table.header.size(); ++k) header_index[table.header[k]] = k;
  std::vector<std::size_t> source(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    auto it = header_index.find(schema[j].name);
    if (it == header_index.end()) {
      throw SchemaError("column '" + schema[j].name + "' from schema not found in CSV header");
    }
    source[j] = it->second;
  }
  if (table.rows.empty()) throw ParseError("CSV has a header but no data rows");

  std::vector<Dataset::Column> columns(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    auto& col = columns[j];
    col.values.reserve(table.rows.size());
    std::map<std::string, double> codes;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const std::string& token = table.rows[i][source[j]];
      if (csv::is_missing_token(token)) {
        col.values.push_back(kNaN);
        continue;
      }
      if (schema[j].kind == ValueKind::categorical) {
        auto [it, inserted] = codes.emplace(token, static_cast<double>(col.levels.size()));
        if (inserted) col.levels.push_back(token);
        col.values.push_back(it->second);
        continue;
      }
      auto value = csv::parse_number(token);
      if (!value) {
        throw ParseError("non-numeric cell '" + token + "' in " + std::string(to_string(schema[j].role)) +
                         " column '" + schema[j].name + "' at data row " + std::to_string(i + 1));
      }
      col.values.push_back(*value);
    }
  }
  return Dataset(schema, std::move(columns));
}

Dataset load_dataset(const std::filesystem::path& path, const std::vector<ColumnRole>& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open data file " + path.string());
  return read_dataset(in, schema);
}

void write_dataset(const Dataset& data, std::ostream& out) {
  for (std::size_t j = 0; j < data.cols(); ++j) {
    if (j) out << ',';
    out << csv::escape(data.schema(j).name);
  }
  out << '\n';
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < data.cols(); ++j) {
      if (j) out << ',';
      const double v = data.at(i, j);
      if (std::isnan(v)) {
        out << "NA";
      } else if (data.schema(j).kind == ValueKind::categorical) {
        out << csv::escape(data.levels(j)[static_cast<std::size_t>(v)]);
      } else {
        out << csv::format_number(v);
      }
    }
    out << '\n';
  }
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_dataset(data, out);
}

InterventionGrid::InterventionGrid(std::vector<std::vector<double>> trajectories,
                                   std::vector<std::string> labels)
    : trajectories_(std::move(trajectories)), labels_(std::move(labels)) {
  if (trajectories_.empty()) throw ArgumentError("intervention grid is empty");
  const std::size_t len = trajectories_.front().size();
  if (len == 0) throw ArgumentError("intervention trajectories must have at least one time point");
  std::set<std::vector<double>> seen;
  for (const auto& tr : trajectories_) {
    if (tr.size() != len) throw ArgumentError("intervention trajectories differ in length");
    for (double v : tr) {
      if (!std::isfinite(v)) throw ArgumentError("intervention values must be finite");
    }
    if (!seen.insert(tr).second) throw ArgumentError("duplicate intervention trajectory");
  }
  if (labels_.empty()) {
    for (const auto& tr : trajectories_) {
      const bool constant = std::all_of(tr.begin(), tr.end(), [&](double v) { return v == tr.front(); });
      std::string label;
      if (constant) {
        label = csv::format_number(tr.front());
      } else {
        for (std::size_t k = 0; k < tr.size(); ++k) {
          if (k) label += '_';
          label += csv::format_number(tr[k]);
        }
      }
      labels_.push_back(std::move(label));
    }
  } else if (labels_.size() != trajectories_.size()) {
    throw ArgumentError("grid labels do not match trajectory count");
  }
}

InterventionGrid InterventionGrid::prefix(std::size_t len) const {
  if (len == 0 || len > length()) throw ArgumentError("invalid grid prefix length");
  std::vector<std::vector<double>> out;
  for (const auto& tr : trajectories_) out.emplace_back(tr.begin(), tr.begin() + static_cast<std::ptrdiff_t>(len));
  return InterventionGrid(std::move(out), labels_);
}

InterventionGrid constant_grid(std::span<const double> values, int horizon) {
  if (values.empty()) throw ArgumentError("constant grid needs at least one value");
  if (horizon < 0) throw ArgumentError("horizon must be >= 0");
  std::vector<std::vector<double>> tr;
  for (double v : values) tr.emplace_back(static_cast<std::size_t>(horizon) + 1, v);
  return InterventionGrid(std::move(tr));
}

InterventionGrid parse_grid_spec(std::string_view spec, int horizon) {
  std::vector<double> values;
  auto number = [&](std::string_view tok) {
    auto v = csv::parse_number(tok);
    if (!v) throw ArgumentError("bad number '" + std::string(tok) + "' in grid spec");
    return *v;
  };
  if (spec.find(':') != std::string_view::npos) {
    std::vector<double> parts;
    std::size_t start = 0;
    for (;;) {
      const auto pos = spec.find(':', start);
      parts.push_back(number(spec.substr(start, pos - start)));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
    if (parts.size() < 2 || parts.size() > 3) throw ArgumentError("grid range must be from:to[:step]");
    const double step = parts.size() == 3 ? parts[2] : 1.0;
    if (!(step > 0) || parts[1] < parts[0]) throw ArgumentError("grid range needs step > 0 and from <= to");
    const auto count = static_cast<long>(std::floor((parts[1] - parts[0]) / step + 1e-9));
    for (long k = 0; k <= count; ++k) {
      // Round to kill accumulated representation noise (0.1 steps etc.).
      const double v = parts[0] + static_cast<double>(k) * step;
      values.push_back(std::round(v * 1e9) / 1e9);
    }
  } else {
    for (const auto& tok : csv::split_line(spec)) values.push_back(number(tok));
  }
  return constant_grid(values, horizon);
}

InterventionGrid load_grid_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open grid file " + path.string());
  const auto table = csv::read(in);
  const bool has_label = !table.header.empty() && table.header.front() == "label";
  std::vector<std::vector<double>> tr;
  std::vector<std::string> labels;
  for (const auto& row : table.rows) {
    std::vector<double> values;
    for (std::size_t k = has_label ? 1 : 0; k < row.size(); ++k) {
      auto v = csv::parse_number(row[k]);
      if (!v) throw ArgumentError("non-numeric grid value '" + row[k] + "'");
      values.push_back(*v);
    }
    tr.push_back(std::move(values));
    if (has_label) labels.push_back(row.front());
  }
  return InterventionGrid(std::move(tr), std::move(labels));
}

std::string_view to_string(Estimand estimand) {
  switch (estimand) {
    case Estimand::cdrc_sequential: return "cdrc_sequential";
    case Estimand::cdrc_parametric: return "cdrc_parametric";
    case Estimand::weighted: return "weighted";
  }
  return "?";
}

Estimand parse_estimand(std::string_view text) {
  for (Estimand e : {Estimand::cdrc_sequential, Estimand::cdrc_parametric, Estimand::weighted}) {
    if (to_string(e) == text) return e;
  }
  throw ArgumentError("unknown estimand '" + std::string(text) +
                      "' (expected cdrc_sequential, cdrc_parametric or weighted)");
}

const CurvePoint& CurveEstimate::at(std::size_t trajectory, int time) const {
  for (const auto& p : points) {
    if (p.trajectory == trajectory && p.time == time) return p;
  }
  throw ArgumentError("curve has no point for trajectory " + std::to_string(trajectory) + " at time " +
                      std::to_string(time));
}

bool CurveEstimate::any_undefined() const {
  return std::any_of(points.begin(), points.end(), [](const CurvePoint& p) { return p.undefined; });
}

void write_curve_csv(const CurveEstimate& curve, std::ostream& out) {
  out << "trajectory_label,time,estimand,c,value,undefined_flag\n";
  const std::string c = curve.c ? csv::format_number(*curve.c) : std::string();
  for (const auto& p : curve.points) {
    out << csv::escape(curve.labels.at(p.trajectory)) << ',' << p.time << ',' << to_string(curve.estimand)
        << ',' << c << ',' << csv::format_number(p.value) << ',' << (p.undefined ? 1 : 0) << '\n';
  }
}

}  // namespace cdrc
