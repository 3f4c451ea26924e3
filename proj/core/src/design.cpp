#include "cdrc/design.hpp"

#include <algorithm>
#include <cmath>

#include "cdrc/error.hpp"

namespace cdrc {

std::string_view to_string(Basis basis) {
  switch (basis) {
    case Basis::linear: return "linear";
    case Basis::polynomial: return "polynomial";
    case Basis::interactions: return "interactions";
    case Basis::saturated: return "saturated";
  }
  return "?";
}

Basis parse_basis(std::string_view text) {
  for (Basis b : {Basis::linear, Basis::polynomial, Basis::interactions, Basis::saturated}) {
    if (to_string(b) == text) return b;
  }
  throw ArgumentError("unknown basis '" + std::string(text) + "'");
}

RawFrame raw_frame(const Dataset& data) {
  RawFrame raw(data.rows(), data.cols());
  for (std::size_t j = 0; j < data.cols(); ++j) {
    const auto col = data.column(j);
    for (std::size_t i = 0; i < data.rows(); ++i) raw(i, j) = col[i];
  }
  return raw;
}

Design::Design(const Dataset& data, ModelMatrixSpec spec, const RawFrame& raw,
               std::span<const std::size_t> fit_rows)
    : spec_(std::move(spec)) {
  for (std::size_t i : fit_rows) {
    for (std::size_t c : spec_.columns) {
      if (std::isnan(raw(i, c))) {
        throw FitError("missing value in '" + data.schema(c).name + "' among fitting rows");
      }
    }
  }
  std::vector<std::string> base_names;
  std::vector<bool> base_continuous;
  for (std::size_t c : spec_.columns) {
    const auto& role = data.schema(c);
    if (role.kind == ValueKind::categorical) {
      for (std::size_t k = 1; k < data.levels(c).size(); ++k) {
        base_.push_back({Feature::Op::level, c, static_cast<double>(k)});
        base_names.push_back(role.name + "=" + data.levels(c)[k]);
        base_continuous.push_back(false);
      }
    } else {
      base_.push_back({Feature::Op::value, c, 0});
      base_names.push_back(role.name);
      base_continuous.push_back(role.kind == ValueKind::continuous);
    }
  }

  std::vector<Feature> candidates;
  std::vector<std::string> candidate_names;
  auto add_base = [&] {
    for (std::size_t b = 0; b < base_.size(); ++b) {
      candidates.push_back(base_[b]);
      candidate_names.push_back(base_names[b]);
    }
  };
  switch (spec_.basis) {
    case Basis::linear:
      add_base();
      break;
    case Basis::polynomial:
      add_base();
      for (int d = 2; d <= spec_.degree; ++d) {
        for (std::size_t b = 0; b < base_.size(); ++b) {
          if (!base_continuous[b]) continue;
          candidates.push_back({Feature::Op::power, base_[b].source, static_cast<double>(d)});
          candidate_names.push_back(base_names[b] + "^" + std::to_string(d));
        }
      }
      break;
    case Basis::interactions:
      add_base();
      for (std::size_t l = 0; l < base_.size(); ++l) {
        for (std::size_t r = l + 1; r < base_.size(); ++r) {
          if (base_[l].source == base_[r].source) continue;
          Feature f{Feature::Op::product};
          f.left = l;
          f.right = r;
          candidates.push_back(f);
          candidate_names.push_back(base_names[l] + ":" + base_names[r]);
        }
      }
      break;
    case Basis::saturated: {
      for (std::size_t i : fit_rows) cells_.emplace(cell_key(&raw(i, 0)), 0);
      std::size_t k = 0;
      for (auto& [key, index] : cells_) index = k++;
      for (std::size_t cell = 1; cell < cells_.size(); ++cell) {
        Feature f{Feature::Op::cell};
        f.cell = cell;
        candidates.push_back(f);
        candidate_names.push_back("cell" + std::to_string(cell));
      }
      break;
    }
  }

  // Drop features that are constant over the fitting rows.
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const Feature& f = candidates[k];
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i : fit_rows) {
      const double v = base_value(f, &raw(i, 0));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (!(hi > lo)) continue;
    bool is_protected = false;
    auto guarded = [&](std::size_t source) {
      return std::find(spec_.protected_columns.begin(), spec_.protected_columns.end(), source) !=
             spec_.protected_columns.end();
    };
    if (f.op == Feature::Op::product) {
      is_protected = guarded(base_[f.left].source) || guarded(base_[f.right].source);
    } else if (f.op == Feature::Op::cell) {
      is_protected = !spec_.protected_columns.empty();
    } else {
      is_protected = guarded(f.source);
    }
    features_.push_back(f);
    names_.push_back(candidate_names[k]);
    protected_.push_back(is_protected);
  }
}

std::vector<double> Design::cell_key(const double* row) const {
  std::vector<double> key;
  key.reserve(spec_.columns.size());
  for (std::size_t c : spec_.columns) key.push_back(row[c]);
  return key;
}

double Design::base_value(const Feature& f, const double* row) const {
  switch (f.op) {
    case Feature::Op::value:
      return row[f.source];
    case Feature::Op::level:
      return row[f.source] == f.level ? 1.0 : 0.0;
    case Feature::Op::power:
      return std::pow(row[f.source], f.level);
    case Feature::Op::product:
      return base_value(base_[f.left], row) * base_value(base_[f.right], row);
    case Feature::Op::cell: {
      // Unseen cells fall back to the reference cell (all indicators zero).
      auto it = cells_.find(cell_key(row));
      return it != cells_.end() && it->second == f.cell ? 1.0 : 0.0;
    }
  }
  return 0.0;
}

Eigen::MatrixXd Design::expand(const RawFrame& raw, std::span<const std::size_t> rows) const {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(features_.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double* row = &raw(static_cast<Eigen::Index>(rows[r]), 0);
    if (spec_.basis == Basis::saturated) {
      X.row(static_cast<Eigen::Index>(r)).setZero();
      auto it = cells_.find(cell_key(row));
      if (it == cells_.end()) continue;
      for (std::size_t k = 0; k < features_.size(); ++k) {
        if (features_[k].cell == it->second) X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = 1.0;
      }
      continue;
    }
    for (std::size_t k = 0; k < features_.size(); ++k) {
      X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = base_value(features_[k], row);
    }
  }
  return X;
}

Eigen::MatrixXd Design::expand(const RawFrame& raw) const {
  std::vector<std::size_t> rows(static_cast<std::size_t>(raw.rows()));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return expand(raw, rows);
}

}  // namespace cdrc
