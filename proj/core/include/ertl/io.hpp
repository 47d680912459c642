#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ertl/blocking.hpp"
#include "ertl/dataset.hpp"
#include "ertl/features.hpp"
#include "ertl/solver.hpp"

namespace ertl {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

/// Name table mapping source names to dense indices in first-seen order.
class SourceRegistry {
 public:
  SourceRegistry() = default;
  explicit SourceRegistry(std::vector<std::string> names);

  int intern(const std::string& name);
  /// -1 when the name is unknown.
  int find(const std::string& name) const;
  const std::string& name(int index) const;
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

/// One labeled (or unlabeled, for candidates) record pair by name/id.
struct PairRow {
  std::string source_a, id_a;
  std::string source_b, id_b;
  std::optional<int> label;  // raw 0/1 or ±1
};

/// Records as JSONL, one object per line with keys source, id, title,
/// alt_titles, year, runtime, cast, directors, attrs; absent keys mean
/// missing. `registry` maps source names to indices (extended as needed).
std::vector<RawRecord> read_records_jsonl(const std::string& path,
                                          SourceRegistry& registry);
void write_records_jsonl(const std::string& path,
                         std::span<const RawRecord> records,
                         const SourceRegistry& registry);

/// Pair CSV: header source_a,id_a,source_b,id_b[,label].
std::vector<PairRow> read_pairs_csv(const std::string& path);
void write_pairs_csv(const std::string& path, std::span<const PairRow> rows);

void write_candidates_csv(const std::string& path,
                          std::span<const CandidatePair> candidates,
                          const SourceRegistry& registry);

/// Feature CSV: header source_a,id_a,source_b,id_b[,label],<feature names>.
/// The label column is present iff the rows carry labels.
struct FeatureTable {
  std::vector<std::string> feature_names;
  std::vector<PairRow> pairs;
  std::vector<FeatureVector> features;
  bool has_labels = false;
};

FeatureTable read_features_csv(const std::string& path);
void write_features_csv(const std::string& path, const FeatureTable& table);

/// Builds a solver dataset from a labeled feature table. Source order is
/// first-seen unless `declared_sources` is given, in which case any row
/// naming an undeclared source is a ValidationError listing the offenders.
Dataset table_to_dataset(const FeatureTable& table,
                         const std::vector<std::string>* declared_sources = nullptr);

/// Standardizer JSON: {"means": [...], "stds": [...], "feature_names": [...]}.
void save_standardizer(const Standardizer& s,
                       const std::vector<std::string>& feature_names,
                       const std::string& path);
Standardizer load_standardizer(const std::string& path,
                               std::vector<std::string>* feature_names = nullptr);

/// Indep model JSON: {"d", "feature_names", "sources", "pairs": [{a,b,w}]}.
void save_indep_model(const IndepModel& m, const std::string& path);
IndepModel load_indep_model(const std::string& path);

/// A transfer or indep model file, detected by content.
struct AnyModel {
  std::optional<TransferModel> transfer;
  std::optional<IndepModel> indep;

  int dim() const;
  const std::vector<std::string>& sources() const;
  const std::vector<std::string>& feature_names() const;
  double score(SourcePair pair, std::span<const double> x) const;
};
AnyModel load_any_model(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace ertl
