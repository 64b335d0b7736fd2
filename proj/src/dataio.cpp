#include "hdp/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "hdp/random.hpp"

namespace hdp::data {

namespace {

Attribute numeric(std::string name, bool non_negative) {
  return Attribute{std::move(name), AttributeKind::Numeric, {}, non_negative};
}

Attribute categorical(std::string name, std::vector<int> domain) {
  return Attribute{std::move(name), AttributeKind::Categorical, std::move(domain), true};
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::optional<double> parse_number(std::string_view token) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

bool is_missing_token(std::string_view token) { return token.empty() || token == "?"; }

std::string row_key(const Record& r) {
  std::string key;
  for (const auto& v : r.values) {
    key += v ? format_value(*v) : std::string("?");
    key += ',';
  }
  key += std::to_string(r.num);
  return key;
}

}  // namespace

bool Attribute::admits(double value) const {
  if (categorical()) {
    return std::any_of(domain.begin(), domain.end(),
                       [value](int d) { return static_cast<double>(d) == value; });
  }
  return !non_negative || value >= 0.0;
}

Schema cleveland_schema() {
  return {
      numeric("age", true),
      categorical("sex", {0, 1}),
      categorical("cp", {1, 2, 3, 4}),
      numeric("trestbps", true),
      numeric("chol", true),
      categorical("fbs", {0, 1}),
      categorical("restecg", {0, 1, 2}),
      numeric("thalach", true),
      categorical("exang", {0, 1}),
      numeric("oldpeak", true),
      categorical("slope", {1, 2, 3}),
      categorical("ca", {0, 1, 2, 3}),
      categorical("thal", {3, 6, 7}),
  };
}

bool Record::complete() const {
  return std::all_of(values.begin(), values.end(), [](const auto& v) { return v.has_value(); });
}

std::optional<std::size_t> Dataset::find(const std::string& attribute) const {
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].name == attribute) return i;
  }
  return std::nullopt;
}

std::size_t Dataset::index_of(const std::string& attribute) const {
  if (auto i = find(attribute)) return *i;
  throw DataError("attribute '" + attribute + "' is not in the schema of dataset '" + name + "'");
}

Dataset Dataset::with_records(std::vector<Record> rows) const {
  return Dataset{name, schema, std::move(rows)};
}

Dataset parse_csv(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_csv(in, schema, path.stem().string());
}

Dataset parse_csv(std::istream& in, const Schema& schema, std::string name) {
  Dataset ds{std::move(name), schema, {}};
  const std::size_t arity = schema.size() + 1;
  std::string line;
  std::size_t line_no = 0;
  bool seen_content = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto fields = split_fields(text);
    if (!seen_content) {
      seen_content = true;
      if (!is_missing_token(fields.front()) && !parse_number(fields.front())) continue;  // header
    }
    if (fields.size() != arity) {
      throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(arity) +
                      " columns, found " + std::to_string(fields.size()));
    }
    Record rec;
    rec.values.reserve(schema.size());
    for (std::size_t c = 0; c < schema.size(); ++c) {
      if (is_missing_token(fields[c])) {
        rec.values.emplace_back(std::nullopt);
        continue;
      }
      const auto value = parse_number(fields[c]);
      if (!value) {
        throw DataError("line " + std::to_string(line_no) + ": non-numeric token '" +
                        std::string(fields[c]) + "' in column " + schema[c].name);
      }
      if (!schema[c].admits(*value)) {
        throw DataError("line " + std::to_string(line_no) + ": value " + std::string(fields[c]) +
                        " out of domain for attribute " + schema[c].name);
      }
      rec.values.emplace_back(*value);
    }
    const auto label_token = fields.back();
    const auto label = is_missing_token(label_token) ? std::nullopt : parse_number(label_token);
    if (!label || *label != std::floor(*label) || *label < 0 || *label > 4) {
      throw DataError("line " + std::to_string(line_no) + ": value '" + std::string(label_token) +
                      "' out of domain for attribute num");
    }
    rec.num = static_cast<int>(*label);
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

std::string format_value(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_csv(std::ostream& out, const Dataset& ds) {
  for (const auto& a : ds.schema) out << a.name << ',';
  out << "num\n";
  for (const auto& r : ds.records) {
    for (const auto& v : r.values) out << (v ? format_value(*v) : std::string("?")) << ',';
    out << r.num << '\n';
  }
}

int binarize_label(int num) {
  if (num < 0 || num > 4) throw std::domain_error("diagnosis value " + std::to_string(num) + " outside 0..4");
  return num >= 1 ? 1 : 0;
}

std::size_t ImputeReport::total() const {
  std::size_t n = 0;
  for (const auto& [_, count] : filled) n += count;
  return n;
}

Dataset impute_missing(const Dataset& ds, int k, ImputeReport* report) {
  if (k < 1) throw DataError("impute_missing: k must be >= 1");
  Dataset out = ds;

  // Distance space: whichever of the key attributes survive in the schema.
  std::vector<std::size_t> keys;
  for (const char* name : {"age", "chol", "trestbps"}) {
    if (auto i = ds.find(name)) keys.push_back(*i);
  }
  std::vector<Range> key_ranges;
  for (auto key : keys) {
    Range r{INFINITY, -INFINITY};
    for (const auto& rec : ds.records) {
      if (rec.values[key]) {
        r.min = std::min(r.min, *rec.values[key]);
        r.max = std::max(r.max, *rec.values[key]);
      }
    }
    key_ranges.push_back(r);
  }
  const auto distance = [&](const Record& a, const Record& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const auto& x = a.values[keys[i]];
      const auto& y = b.values[keys[i]];
      const double span = key_ranges[i].max - key_ranges[i].min;
      if (!x || !y || !(span > 0.0)) continue;
      const double diff = (*x - *y) / span;
      d += diff * diff;
    }
    return d;
  };

  for (std::size_t a = 0; a < ds.schema.size(); ++a) {
    std::vector<std::size_t> donors;
    bool any_missing = false;
    for (std::size_t r = 0; r < ds.size(); ++r) {
      if (ds.records[r].values[a]) donors.push_back(r);
      else any_missing = true;
    }
    if (!any_missing) continue;
    if (donors.empty()) {
      throw DataError("impute_missing: attribute " + ds.schema[a].name + " is missing in every record");
    }
    for (std::size_t r = 0; r < ds.size(); ++r) {
      if (ds.records[r].values[a]) continue;
      std::vector<std::pair<double, std::size_t>> ranked;
      ranked.reserve(donors.size());
      for (auto d : donors) ranked.emplace_back(distance(ds.records[r], ds.records[d]), d);
      const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
      std::partial_sort(ranked.begin(), ranked.begin() + take, ranked.end());
      std::vector<double> neighbours;
      for (std::size_t i = 0; i < take; ++i) neighbours.push_back(*ds.records[ranked[i].second].values[a]);
      std::sort(neighbours.begin(), neighbours.end());

      double fill = 0.0;
      if (ds.schema[a].categorical()) {
        // Mode; ties go to the smallest value.
        std::size_t best_count = 0;
        for (std::size_t i = 0; i < neighbours.size();) {
          std::size_t j = i;
          while (j < neighbours.size() && neighbours[j] == neighbours[i]) ++j;
          if (j - i > best_count) {
            best_count = j - i;
            fill = neighbours[i];
          }
          i = j;
        }
      } else {
        const auto n = neighbours.size();
        fill = n % 2 == 1 ? neighbours[n / 2] : 0.5 * (neighbours[n / 2 - 1] + neighbours[n / 2]);
      }
      out.records[r].values[a] = fill;
      if (report) ++report->filled[ds.schema[a].name];
    }
  }
  return out;
}

Dataset remove_redundancy(const Dataset& ds, RedundancyReport* report) {
  RedundancyReport local;
  std::vector<Record> kept;
  std::set<std::string> seen;
  for (const auto& r : ds.records) {
    if (seen.insert(row_key(r)).second) kept.push_back(r);
    else ++local.duplicate_rows;
  }

  std::vector<std::size_t> keep_columns;
  for (std::size_t a = 0; a < ds.schema.size(); ++a) {
    bool constant = kept.size() >= 2;
    for (std::size_t r = 1; constant && r < kept.size(); ++r) {
      constant = kept[r].values[a] == kept[0].values[a];
    }
    if (constant) local.constant_attributes.push_back(ds.schema[a].name);
    else keep_columns.push_back(a);
  }

  Dataset out{ds.name, {}, {}};
  for (auto a : keep_columns) out.schema.push_back(ds.schema[a]);
  out.records.reserve(kept.size());
  for (const auto& r : kept) {
    Record rec{{}, r.num};
    for (auto a : keep_columns) rec.values.push_back(r.values[a]);
    out.records.push_back(std::move(rec));
  }
  if (report) *report = std::move(local);
  return out;
}

std::map<int, Dataset> stratify_by_chest_pain(const Dataset& ds) {
  std::map<int, Dataset> parts;
  for (int cp = 1; cp <= 4; ++cp) parts[cp] = ds.with_records({});
  if (ds.empty()) return parts;
  const auto cp_col = ds.index_of("cp");
  for (const auto& r : ds.records) {
    const auto& v = r.values[cp_col];
    if (!v) throw DataError("stratify_by_chest_pain: cp is missing");
    parts.at(static_cast<int>(*v)).records.push_back(r);
  }
  return parts;
}

double NormalizationTable::apply(std::size_t attribute, double value) const {
  const auto& r = ranges.at(attribute);
  const double span = r.max - r.min;
  if (!(span > 0.0)) return 0.0;
  return std::clamp((value - r.min) / span, 0.0, 1.0);
}

NormalizationTable fit_normalization(const Dataset& ds) {
  NormalizationTable table;
  for (std::size_t a = 0; a < ds.schema.size(); ++a) {
    const auto& attr = ds.schema[a];
    table.names.push_back(attr.name);
    if (attr.categorical()) {
      table.ranges.push_back({0.0, static_cast<double>(attr.domain.back())});
      continue;
    }
    Range r{INFINITY, -INFINITY};
    for (const auto& rec : ds.records) {
      if (rec.values[a]) {
        r.min = std::min(r.min, *rec.values[a]);
        r.max = std::max(r.max, *rec.values[a]);
      }
    }
    if (r.min > r.max) r = {0.0, 0.0};
    table.ranges.push_back(r);
  }
  return table;
}

Dataset apply_normalization(const Dataset& ds, const NormalizationTable& table) {
  if (table.size() != ds.schema.size()) throw DataError("normalization table does not match schema");
  Dataset out = ds;
  for (auto& rec : out.records) {
    for (std::size_t a = 0; a < rec.values.size(); ++a) {
      if (rec.values[a]) rec.values[a] = table.apply(a, *rec.values[a]);
    }
  }
  return out;
}

Normalized normalize_minmax(const Dataset& ds) {
  auto table = fit_normalization(ds);
  auto data = apply_normalization(ds, table);
  return {std::move(data), std::move(table)};
}

std::vector<Fold> kfold_split(const Dataset& ds, int k, std::uint64_t seed) {
  if (k < 2) throw DataError("kfold_split: k must be >= 2");
  if (static_cast<std::size_t>(k) > ds.size()) {
    throw DataError("kfold_split: k=" + std::to_string(k) + " exceeds dataset size " + std::to_string(ds.size()));
  }
  Rng rng(seed);
  std::vector<std::size_t> negatives, positives;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (binarize_label(ds.records[i].num) ? positives : negatives).push_back(i);
  }
  rng.shuffle(std::span(negatives));
  rng.shuffle(std::span(positives));

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(k));
  std::size_t slot = 0;
  for (const auto* group : {&negatives, &positives}) {
    for (auto idx : *group) members[slot++ % members.size()].push_back(idx);
  }

  std::vector<Fold> folds;
  for (auto& test_rows : members) {
    std::sort(test_rows.begin(), test_rows.end());
    Fold fold{ds.with_records({}), ds.with_records({}), test_rows};
    std::size_t t = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (t < test_rows.size() && test_rows[t] == i) {
        fold.test.records.push_back(ds.records[i]);
        ++t;
      } else {
        fold.train.records.push_back(ds.records[i]);
      }
    }
    folds.push_back(std::move(fold));
  }
  return folds;
}

Eigen::MatrixXd feature_matrix(const Dataset& ds, const std::vector<std::size_t>& columns) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto& v = ds.records[r].values.at(columns[c]);
      if (!v) throw DataError("feature_matrix: missing value in row " + std::to_string(r));
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = *v;
    }
  }
  return x;
}

Eigen::VectorXd binary_labels(const Dataset& ds) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(ds.size()));
  for (std::size_t r = 0; r < ds.size(); ++r) {
    y(static_cast<Eigen::Index>(r)) = binarize_label(ds.records[r].num);
  }
  return y;
}

std::string PreprocessReport::to_text() const {
  std::ostringstream os;
  os << "input_rows=" << input_rows << '\n';
  os << "imputed_cells=" << imputed.total() << '\n';
  for (const auto& [name, count] : imputed.filled) os << "imputed." << name << '=' << count << '\n';
  os << "dropped_duplicates=" << redundancy.duplicate_rows << '\n';
  os << "dropped_constants=" << redundancy.constant_attributes.size() << '\n';
  for (const auto& name : redundancy.constant_attributes) os << "dropped_constant." << name << "=1\n";
  os << "output_rows=" << output_rows << '\n';
  return os.str();
}

Dataset preprocess(const Dataset& raw, int impute_k, PreprocessReport* report) {
  PreprocessReport local;
  local.input_rows = raw.size();
  auto imputed = impute_missing(raw, impute_k, &local.imputed);
  auto cleaned = remove_redundancy(imputed, &local.redundancy);
  local.output_rows = cleaned.size();
  if (report) *report = std::move(local);
  return cleaned;
}

}  // namespace hdp::data
