#include "sni/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "sni/rng.hpp"

namespace sni {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

}  // namespace

int FeatureSchema::find(const std::string& name) const {
  for (int j = 0; j < size(); ++j)
    if (features[static_cast<size_t>(j)].name == name) return j;
  return -1;
}

void FeatureSchema::validate() const {
  std::set<std::string> names;
  for (const auto& f : features) {
    if (f.name.empty()) fail("schema: empty feature name");
    if (!names.insert(f.name).second)
      fail("schema: duplicate feature name '" + f.name + "'");
    if (f.is_categorical()) {
      std::set<std::string> cats(f.categories.begin(), f.categories.end());
      if (cats.size() != f.categories.size())
        fail("schema: duplicate category label in feature '" + f.name + "'");
    } else if (!f.categories.empty()) {
      fail("schema: continuous feature '" + f.name + "' declares categories");
    }
  }
}

FeatureSchema FeatureSchema::from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  FeatureSchema s;
  if (!j.contains("features") || !j["features"].is_array())
    fail("schema: missing 'features' array");
  for (const auto& e : j["features"]) {
    Feature f;
    f.name = e.at("name").get<std::string>();
    const std::string kind = e.at("kind").get<std::string>();
    if (kind == "continuous") {
      f.kind = FeatureKind::Continuous;
    } else if (kind == "categorical") {
      f.kind = FeatureKind::Categorical;
      if (e.contains("categories"))
        f.categories = e["categories"].get<std::vector<std::string>>();
    } else {
      fail("schema: unknown kind '" + kind + "'");
    }
    s.features.push_back(std::move(f));
  }
  s.validate();
  return s;
}

FeatureSchema FeatureSchema::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open schema file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string FeatureSchema::to_json_text() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& f : features) {
    nlohmann::json e;
    e["name"] = f.name;
    e["kind"] = f.is_categorical() ? "categorical" : "continuous";
    if (f.is_categorical()) e["categories"] = f.categories;
    arr.push_back(e);
  }
  return nlohmann::json{{"features", arr}}.dump(2);
}

MixedTable::MixedTable(FeatureSchema schema, int n_rows)
    : schema_(std::move(schema)), n_(n_rows) {
  if (n_ < 0) fail("table: negative row count");
  schema_.validate();
  const size_t cells =
      static_cast<size_t>(n_) * static_cast<size_t>(schema_.size());
  cells_.assign(cells, std::numeric_limits<double>::quiet_NaN());
  mask_.assign(cells, 0);
}

double MixedTable::get(int r, int j) const {
  const size_t i = idx(r, j);
  if (!mask_[i]) fail("table: read of unobserved cell");
  return cells_[i];
}

void MixedTable::set(int r, int j, double v) {
  const Feature& f = schema_.at(j);
  if (f.is_categorical()) {
    const double rounded = std::nearbyint(v);
    if (rounded != v || v < 0 || v >= f.n_categories())
      fail("table: invalid category index for feature '" + f.name + "'");
  } else if (!std::isfinite(v)) {
    fail("table: non-finite value for feature '" + f.name + "'");
  }
  const size_t i = idx(r, j);
  cells_[i] = v;
  mask_[i] = 1;
}

void MixedTable::set_missing(int r, int j) {
  const size_t i = idx(r, j);
  cells_[i] = std::numeric_limits<double>::quiet_NaN();
  mask_[i] = 0;
}

int64_t MixedTable::n_missing() const {
  int64_t m = 0;
  for (uint8_t b : mask_) m += (b == 0);
  return m;
}

int MixedTable::n_observed(int j) const {
  int c = 0;
  for (int r = 0; r < n_; ++r) c += observed(r, j);
  return c;
}

std::vector<int> MixedTable::features_with_missing() const {
  std::vector<int> out;
  for (int j = 0; j < n_features(); ++j)
    if (n_observed(j) < n_) out.push_back(j);
  return out;
}

std::vector<std::optional<StandardizerStats>> compute_standardizers(
    const MixedTable& t) {
  std::vector<std::optional<StandardizerStats>> out(
      static_cast<size_t>(t.n_features()));
  for (int j = 0; j < t.n_features(); ++j) {
    if (t.schema().at(j).is_categorical()) continue;
    double sum = 0.0;
    int n_obs = 0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < t.n_rows(); ++r) {
      if (!t.observed(r, j)) continue;
      const double v = t.get(r, j);
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      ++n_obs;
    }
    if (n_obs == 0)
      fail("standardizer: feature '" + t.schema().at(j).name +
           "' has no observed cells");
    StandardizerStats s;
    s.mean = sum / n_obs;
    double ss = 0.0;
    for (int r = 0; r < t.n_rows(); ++r) {
      if (!t.observed(r, j)) continue;
      const double d = t.get(r, j) - s.mean;
      ss += d * d;
    }
    s.std = n_obs > 1 ? std::sqrt(ss / (n_obs - 1)) : 0.0;
    s.std = std::max(s.std, kStdFloor);
    s.observed_min = lo;
    s.observed_max = hi;
    out[static_cast<size_t>(j)] = s;
  }
  return out;
}

CorrelationDesign build_correlation_design(
    const MixedTable& t, const std::vector<double>& filled,
    const std::vector<std::optional<StandardizerStats>>& stats) {
  const int n = t.n_rows();
  const int d = t.n_features();
  if (filled.size() != static_cast<size_t>(n) * static_cast<size_t>(d))
    fail("design: filled matrix has wrong size");

  CorrelationDesign cd;
  int width = 0;
  for (int j = 0; j < d; ++j) {
    const Feature& f = t.schema().at(j);
    const int w = f.is_categorical() ? f.n_categories() : 1;
    cd.column_groups.emplace_back(width, w);
    width += w;
  }
  cd.matrix = Eigen::MatrixXd::Zero(n, width);
  for (int j = 0; j < d; ++j) {
    const Feature& f = t.schema().at(j);
    const auto [off, w] = cd.column_groups[static_cast<size_t>(j)];
    for (int r = 0; r < n; ++r) {
      const double v =
          filled[static_cast<size_t>(r) * static_cast<size_t>(d) +
                 static_cast<size_t>(j)];
      if (f.is_categorical()) {
        const int c = static_cast<int>(std::llround(v));
        if (c < 0 || c >= w) fail("design: category index out of range");
        cd.matrix(r, off + c) = 1.0;
      } else {
        const auto& s = stats[static_cast<size_t>(j)];
        if (!s) fail("design: missing standardizer for continuous feature");
        cd.matrix(r, off) = (v - s->mean) / s->std;
      }
    }
  }
  return cd;
}

Partition partition_rows(int n, const std::array<double, 3>& fractions,
                         uint64_t seed) {
  for (double f : fractions)
    if (!(f > 0.0)) fail("partition: fractions must be positive");
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9) fail("partition: fractions must sum to 1");
  if (n < 3) fail("partition: need at least 3 rows");

  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);

  int n_tr = static_cast<int>(std::llround(n * fractions[0]));
  n_tr = std::clamp(n_tr, 1, n - 2);
  int n_val = static_cast<int>(std::llround(n * fractions[1]));
  n_val = std::clamp(n_val, 1, n - 1 - n_tr);

  Partition p;
  p.train.assign(idx.begin(), idx.begin() + n_tr);
  p.validation.assign(idx.begin() + n_tr, idx.begin() + n_tr + n_val);
  p.test.assign(idx.begin() + n_tr + n_val, idx.end());
  return p;
}

double clip_to_observed_range(double v, const StandardizerStats& s) {
  return std::clamp(v, s.observed_min, s.observed_max);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) fail("format_double: conversion failed");
  return std::string(buf, ptr);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

MixedTable load_csv(const std::string& path, FeatureSchema schema,
                    const std::vector<std::string>& missing_tokens) {
  schema.validate();
  std::ifstream in(path);
  if (!in) fail("cannot open CSV file '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) fail("CSV '" + path + "': empty file");
  const auto header = split_line(line);
  if (static_cast<int>(header.size()) != schema.size())
    fail("CSV '" + path + "': header has " + std::to_string(header.size()) +
         " columns, schema has " + std::to_string(schema.size()));
  for (int j = 0; j < schema.size(); ++j)
    if (header[static_cast<size_t>(j)] != schema.at(j).name)
      fail("CSV '" + path + "': header column " + std::to_string(j + 1) +
           " is '" + header[static_cast<size_t>(j)] + "', schema expects '" +
           schema.at(j).name + "'");

  const auto is_missing = [&](const std::string& tok) {
    return std::find(missing_tokens.begin(), missing_tokens.end(), tok) !=
           missing_tokens.end();
  };

  // Categories not declared in the schema are interned in first-seen order.
  std::vector<std::vector<std::string>> raw_rows;
  std::vector<bool> fixed_cats(static_cast<size_t>(schema.size()));
  for (int j = 0; j < schema.size(); ++j)
    fixed_cats[static_cast<size_t>(j)] = !schema.at(j).categories.empty();

  int row_no = 0;
  while (std::getline(in, line)) {
    if (line.empty() && in.eof()) break;
    ++row_no;
    auto cells = split_line(line);
    if (static_cast<int>(cells.size()) != schema.size())
      fail("CSV '" + path + "': row " + std::to_string(row_no) + " has " +
           std::to_string(cells.size()) + " cells, expected " +
           std::to_string(schema.size()));
    for (int j = 0; j < schema.size(); ++j) {
      Feature& f = schema.features[static_cast<size_t>(j)];
      const std::string& tok = cells[static_cast<size_t>(j)];
      if (is_missing(tok) || !f.is_categorical()) continue;
      if (std::find(f.categories.begin(), f.categories.end(), tok) ==
          f.categories.end()) {
        if (fixed_cats[static_cast<size_t>(j)])
          fail("CSV '" + path + "': row " + std::to_string(row_no) +
               ", column '" + f.name + "': unknown category '" + tok + "'");
        f.categories.push_back(tok);
      }
    }
    raw_rows.push_back(std::move(cells));
  }

  for (int j = 0; j < schema.size(); ++j) {
    const Feature& f = schema.at(j);
    if (f.is_categorical() && f.n_categories() < 2)
      fail("CSV '" + path + "': categorical feature '" + f.name +
           "' has fewer than 2 categories");
  }

  MixedTable t(schema, static_cast<int>(raw_rows.size()));
  for (size_t r = 0; r < raw_rows.size(); ++r) {
    for (int j = 0; j < t.n_features(); ++j) {
      const Feature& f = t.schema().at(j);
      const std::string& tok = raw_rows[r][static_cast<size_t>(j)];
      if (is_missing(tok)) continue;
      if (f.is_categorical()) {
        const auto it =
            std::find(f.categories.begin(), f.categories.end(), tok);
        t.set(static_cast<int>(r), j,
              static_cast<double>(it - f.categories.begin()));
      } else {
        double v = 0.0;
        const char* b = tok.data();
        const char* e = tok.data() + tok.size();
        auto [ptr, ec] = std::from_chars(b, e, v);
        if (ec != std::errc() || ptr != e)
          fail("CSV '" + path + "': row " + std::to_string(r + 1) +
               ", column '" + f.name + "': cannot parse '" + tok +
               "' as a number");
        t.set(static_cast<int>(r), j, v);
      }
    }
  }
  return t;
}

void write_csv(const MixedTable& t, const std::string& path,
               const std::string& missing_token) {
  std::ofstream out(path);
  if (!out) fail("cannot open '" + path + "' for writing");
  for (int j = 0; j < t.n_features(); ++j) {
    if (j) out << ',';
    out << t.schema().at(j).name;
  }
  out << '\n';
  for (int r = 0; r < t.n_rows(); ++r) {
    for (int j = 0; j < t.n_features(); ++j) {
      if (j) out << ',';
      if (!t.observed(r, j)) {
        out << missing_token;
      } else if (t.schema().at(j).is_categorical()) {
        out << t.schema().at(j).categories[static_cast<size_t>(
            std::llround(t.get(r, j)))];
      } else {
        out << format_double(t.get(r, j));
      }
    }
    out << '\n';
  }
  if (!out) fail("write to '" + path + "' failed");
}

}  // namespace sni
