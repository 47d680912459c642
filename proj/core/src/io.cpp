#include "ertl/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ertl/errors.hpp"

namespace ertl {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string location(const std::string& path, std::size_t line_no) {
  return path + " line " + std::to_string(line_no) + ": ";
}

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

int parse_int(const std::string& s, const std::string& where) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ValidationError(where + "'" + s + "' is not an integer");
  }
  return v;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ValidationError(where + "'" + s + "' is not a number");
  }
  return v;
}

/// Lines of a text file with trailing carriage returns stripped.
std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

void check_pair_header(const std::vector<std::string>& cols,
                       const std::string& path) {
  static const std::vector<std::string> expected = {"source_a", "id_a", "source_b",
                                                    "id_b"};
  if (cols.size() < 4 || !std::equal(expected.begin(), expected.end(), cols.begin())) {
    throw ValidationError(path + ": header must start with source_a,id_a,source_b,id_b");
  }
}

std::optional<int> row_label(const std::vector<std::string>& cols, std::size_t idx,
                             bool has_label, const std::string& where) {
  if (!has_label) return std::nullopt;
  return parse_int(cols[idx], where + "label ");
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, ptr};
}

SourceRegistry::SourceRegistry(std::vector<std::string> names)
    : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    for (std::size_t j = i + 1; j < names_.size(); ++j) {
      if (names_[i] == names_[j]) {
        throw ValidationError("duplicate source name '" + names_[i] + "'");
      }
    }
  }
}

int SourceRegistry::intern(const std::string& name) {
  const int found = find(name);
  if (found >= 0) return found;
  names_.push_back(name);
  return static_cast<int>(names_.size()) - 1;
}

int SourceRegistry::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  return -1;
}

const std::string& SourceRegistry::name(int index) const {
  if (index < 0 || index >= size()) {
    throw std::out_of_range("source index " + std::to_string(index) +
                            " out of range for " + std::to_string(size()) +
                            " sources");
  }
  return names_[static_cast<std::size_t>(index)];
}

std::vector<RawRecord> read_records_jsonl(const std::string& path,
                                          SourceRegistry& registry) {
  std::vector<RawRecord> records;
  const auto lines = read_lines(path);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    const std::string where = location(path, n + 1);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[n]);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where + e.what());
    }
    if (!j.is_object()) throw ValidationError(where + "expected a JSON object");
    RawRecord r;
    try {
      r.source = registry.intern(j.at("source").get<std::string>());
      r.id = j.at("id").get<std::string>();
      if (j.contains("title")) r.title = j["title"].get<std::string>();
      if (j.contains("alt_titles")) {
        r.alt_titles = j["alt_titles"].get<std::vector<std::string>>();
      }
      if (j.contains("year")) r.year = j["year"].get<int>();
      if (j.contains("runtime")) r.runtime = j["runtime"].get<int>();
      if (j.contains("cast")) r.cast = j["cast"].get<std::vector<std::string>>();
      if (j.contains("directors")) {
        r.directors = j["directors"].get<std::vector<std::string>>();
      }
      if (j.contains("attrs")) r.attrs = j["attrs"].get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(where + e.what());
    }
    records.push_back(std::move(r));
  }
  return records;
}

void write_records_jsonl(const std::string& path, std::span<const RawRecord> records,
                         const SourceRegistry& registry) {
  auto out = open_for_write(path);
  for (const auto& r : records) {
    ordered_json j;
    j["source"] = registry.name(r.source);
    j["id"] = r.id;
    if (!r.title.empty()) j["title"] = r.title;
    if (!r.alt_titles.empty()) j["alt_titles"] = r.alt_titles;
    if (r.year) j["year"] = *r.year;
    if (r.runtime) j["runtime"] = *r.runtime;
    if (!r.cast.empty()) j["cast"] = r.cast;
    if (!r.directors.empty()) j["directors"] = r.directors;
    if (!r.attrs.empty()) j["attrs"] = r.attrs;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

std::vector<PairRow> read_pairs_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ValidationError(path + ": empty file");
  const auto header = parse_csv_line(lines[0]);
  check_pair_header(header, path);
  bool has_label = false;
  if (header.size() == 5 && header[4] == "label") {
    has_label = true;
  } else if (header.size() != 4) {
    throw ValidationError(path + ": unexpected extra header columns");
  }
  std::vector<PairRow> rows;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    const std::string where = location(path, n + 1);
    const auto cols = parse_csv_line(lines[n]);
    if (cols.size() != header.size()) {
      throw ValidationError(where + "expected " + std::to_string(header.size()) +
                            " columns, found " + std::to_string(cols.size()));
    }
    rows.push_back({cols[0], cols[1], cols[2], cols[3],
                    row_label(cols, 4, has_label, where)});
  }
  return rows;
}

void write_pairs_csv(const std::string& path, std::span<const PairRow> rows) {
  const bool has_labels =
      std::any_of(rows.begin(), rows.end(), [](const PairRow& r) { return r.label.has_value(); });
  auto out = open_for_write(path);
  out << "source_a,id_a,source_b,id_b" << (has_labels ? ",label" : "") << '\n';
  for (const auto& r : rows) {
    if (has_labels && !r.label) {
      throw ValidationError(path + ": mixed labeled and unlabeled rows");
    }
    out << csv_field(r.source_a) << ',' << csv_field(r.id_a) << ','
        << csv_field(r.source_b) << ',' << csv_field(r.id_b);
    if (has_labels) out << ',' << *r.label;
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

void write_candidates_csv(const std::string& path,
                          std::span<const CandidatePair> candidates,
                          const SourceRegistry& registry) {
  auto out = open_for_write(path);
  out << "source_a,id_a,source_b,id_b\n";
  for (const auto& c : candidates) {
    out << csv_field(registry.name(c.source_a)) << ',' << csv_field(c.id_a) << ','
        << csv_field(registry.name(c.source_b)) << ',' << csv_field(c.id_b) << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

FeatureTable read_features_csv(const std::string& path) {
  const auto lines = read_lines(path);
  if (lines.empty()) throw ValidationError(path + ": empty file");
  const auto header = parse_csv_line(lines[0]);
  check_pair_header(header, path);
  FeatureTable table;
  std::size_t first_feature = 4;
  if (header.size() > 4 && header[4] == "label") {
    table.has_labels = true;
    first_feature = 5;
  }
  if (header.size() <= first_feature) {
    throw ValidationError(path + ": no feature columns");
  }
  table.feature_names.assign(header.begin() + first_feature, header.end());
  for (std::size_t n = 1; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    const std::string where = location(path, n + 1);
    const auto cols = parse_csv_line(lines[n]);
    if (cols.size() != header.size()) {
      throw ValidationError(where + "expected " + std::to_string(header.size()) +
                            " columns, found " + std::to_string(cols.size()));
    }
    table.pairs.push_back({cols[0], cols[1], cols[2], cols[3],
                           row_label(cols, 4, table.has_labels, where)});
    FeatureVector x;
    x.reserve(table.feature_names.size());
    for (std::size_t t = first_feature; t < cols.size(); ++t) {
      const double v = parse_double(cols[t], where);
      if (!std::isfinite(v)) throw ValidationError(where + "non-finite feature value");
      x.push_back(v);
    }
    table.features.push_back(std::move(x));
  }
  return table;
}

void write_features_csv(const std::string& path, const FeatureTable& table) {
  if (table.pairs.size() != table.features.size()) {
    throw ValidationError("feature table: " + std::to_string(table.pairs.size()) +
                          " pair rows but " + std::to_string(table.features.size()) +
                          " feature rows");
  }
  auto out = open_for_write(path);
  out << "source_a,id_a,source_b,id_b";
  if (table.has_labels) out << ",label";
  for (const auto& name : table.feature_names) out << ',' << csv_field(name);
  out << '\n';
  for (std::size_t k = 0; k < table.pairs.size(); ++k) {
    const auto& r = table.pairs[k];
    if (table.has_labels && !r.label) {
      throw ValidationError("feature table row " + std::to_string(k + 1) +
                            " is missing its label");
    }
    if (table.features[k].size() != table.feature_names.size()) {
      throw ValidationError("feature table row " + std::to_string(k + 1) +
                            " has the wrong feature count");
    }
    out << csv_field(r.source_a) << ',' << csv_field(r.id_a) << ','
        << csv_field(r.source_b) << ',' << csv_field(r.id_b);
    if (table.has_labels) out << ',' << *r.label;
    for (double v : table.features[k]) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path);
}

Dataset table_to_dataset(const FeatureTable& table,
                         const std::vector<std::string>* declared_sources) {
  if (!table.has_labels) {
    throw ValidationError("feature table has no label column; cannot train on it");
  }
  SourceRegistry registry;
  std::vector<std::string> unknown;
  if (declared_sources) {
    registry = SourceRegistry(*declared_sources);
    for (const auto& row : table.pairs) {
      for (const auto* name : {&row.source_a, &row.source_b}) {
        if (registry.find(*name) < 0 &&
            std::find(unknown.begin(), unknown.end(), *name) == unknown.end()) {
          unknown.push_back(*name);
        }
      }
    }
    if (!unknown.empty()) {
      std::string msg = "feature table names undeclared sources:";
      for (const auto& name : unknown) msg += " '" + name + "'";
      throw ValidationError(msg);
    }
  } else {
    for (const auto& row : table.pairs) {
      registry.intern(row.source_a);
      registry.intern(row.source_b);
    }
  }
  Dataset data;
  data.dim = static_cast<int>(table.feature_names.size());
  data.feature_names = table.feature_names;
  data.sources = registry.names();
  for (std::size_t k = 0; k < table.pairs.size(); ++k) {
    const auto& row = table.pairs[k];
    const std::string where = "feature table row " + std::to_string(k + 1) + ": ";
    try {
      data.examples.push_back({table.features[k],
                               SourcePair::of(registry.find(row.source_a),
                                              registry.find(row.source_b)),
                               canonical_label(*row.label)});
    } catch (const std::invalid_argument& e) {
      throw ValidationError(where + e.what());
    }
  }
  data.validate();
  return data;
}

void save_standardizer(const Standardizer& s,
                       const std::vector<std::string>& feature_names,
                       const std::string& path) {
  ordered_json j;
  j["means"] = s.means;
  j["stds"] = s.stds;
  j["feature_names"] = feature_names;
  auto out = open_for_write(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path);
}

Standardizer load_standardizer(const std::string& path,
                               std::vector<std::string>* feature_names) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scaler file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("scaler file " + path + ": " + e.what());
  }
  Standardizer s;
  try {
    s.means = j.at("means").get<std::vector<double>>();
    s.stds = j.at("stds").get<std::vector<double>>();
    if (feature_names) {
      *feature_names = j.at("feature_names").get<std::vector<std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("scaler file " + path + ": " + e.what());
  }
  if (s.means.size() != s.stds.size()) {
    throw ValidationError("scaler file " + path + ": means/stds length mismatch");
  }
  for (double v : s.stds) {
    if (!(v > 0) || !std::isfinite(v)) {
      throw ValidationError("scaler file " + path + ": stds must be positive");
    }
  }
  return s;
}

void save_indep_model(const IndepModel& m, const std::string& path) {
  ordered_json j;
  j["d"] = m.dim;
  j["feature_names"] = m.feature_names;
  j["sources"] = m.sources;
  j["pairs"] = ordered_json::array();
  for (const auto& [pair, w] : m.weights) {
    ordered_json entry;
    entry["a"] = m.sources.at(pair.a);
    entry["b"] = m.sources.at(pair.b);
    entry["w"] = w;
    j["pairs"].push_back(std::move(entry));
  }
  auto out = open_for_write(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path);
}

IndepModel load_indep_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model file " + path + ": " + e.what());
  }
  IndepModel m;
  try {
    m.dim = j.at("d").get<int>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.sources = j.at("sources").get<std::vector<std::string>>();
    SourceRegistry registry(m.sources);
    for (const auto& entry : j.at("pairs")) {
      const int a = registry.find(entry.at("a").get<std::string>());
      const int b = registry.find(entry.at("b").get<std::string>());
      if (a < 0 || b < 0) {
        throw ValidationError("model file " + path + ": pair names an unknown source");
      }
      auto w = entry.at("w").get<std::vector<double>>();
      if (static_cast<int>(w.size()) != m.dim) {
        throw ValidationError("model file " + path + ": pair weight length mismatch");
      }
      m.weights.emplace(SourcePair::of(a, b), std::move(w));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model file " + path + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ValidationError("model file " + path + ": " + e.what());
  }
  const int n = static_cast<int>(m.sources.size());
  for (int i = 0; i < n; ++i) {
    for (int j2 = i + 1; j2 < n; ++j2) {
      if (!m.weights.contains({i, j2})) m.unseen.push_back({i, j2});
    }
  }
  return m;
}

int AnyModel::dim() const { return transfer ? transfer->dim : indep->dim; }

const std::vector<std::string>& AnyModel::sources() const {
  return transfer ? transfer->sources : indep->sources;
}

const std::vector<std::string>& AnyModel::feature_names() const {
  return transfer ? transfer->feature_names : indep->feature_names;
}

double AnyModel::score(SourcePair pair, std::span<const double> x) const {
  return transfer ? transfer->score(pair, x) : indep->score(pair, x);
}

AnyModel load_any_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model file " + path + ": " + e.what());
  }
  AnyModel m;
  if (j.contains("w0")) {
    m.transfer = load_model(path);
  } else if (j.contains("pairs")) {
    m.indep = load_indep_model(path);
  } else {
    throw ValidationError("model file " + path +
                          ": neither a transfer model (w0) nor an indep model (pairs)");
  }
  return m;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  auto out = open_for_write(path);
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace ertl
