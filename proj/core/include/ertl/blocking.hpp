#pragma once

#include <set>
#include <string>
#include <vector>

#include "ertl/features.hpp"

namespace ertl {

/// Candidate record pair across two distinct sources, canonically ordered
/// by source index.
struct CandidatePair {
  int source_a = 0;
  std::string id_a;
  int source_b = 0;
  std::string id_b;

  friend bool operator==(const CandidatePair&, const CandidatePair&) = default;
  friend auto operator<=>(const CandidatePair&, const CandidatePair&) = default;
};

struct BlockingConfig {
  /// Extra stopwords on top of the bundled English list.
  std::set<std::string> extra_stopwords;
  /// A token becomes a de-facto stopword when it appears in more than this
  /// fraction of one source's titles...
  double df_fraction = 0.05;
  /// ...but only once it also clears this absolute count, so tiny sources
  /// do not lose their discriminative tokens.
  int df_min_count = 10;
  /// Blocks larger than this are skipped outright.
  int max_block_size = 1000;
};

struct BlockingStats {
  std::size_t n_records = 0;
  std::size_t n_blocks = 0;
  std::size_t n_skipped_blocks = 0;  // over max_block_size
  std::size_t n_candidates = 0;
  std::size_t n_cross_pairs = 0;  // full cross-source pair count
  double reduction_ratio() const {
    return n_cross_pairs ? 1.0 - static_cast<double>(n_candidates) / n_cross_pairs : 0.0;
  }
  std::string summary() const;
};

/// The bundled minimal English stopword list (articles, conjunctions,
/// prepositions; ~50 words).
const std::set<std::string>& english_stopwords();

/// Blocking keys of a normalized record: title and alt-title tokens minus
/// stopwords. May be empty (the record is then unblockable).
std::vector<std::string> block_keys(const RawRecord& r,
                                    const std::set<std::string>& stopwords);

/// Hashes records to their non-stop title tokens and emits every
/// cross-source pair sharing at least one block key. Output is
/// deduplicated and sorted, hence invariant to input record order.
std::vector<CandidatePair> generate_candidates(std::span<const RawRecord> records,
                                               const BlockingConfig& cfg,
                                               BlockingStats* stats = nullptr);

}  // namespace ertl
