#include "ertl/blocking.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "ertl/io.hpp"

namespace ertl {

const std::set<std::string>& english_stopwords() {
  static const std::set<std::string> words = {
      "a",    "about", "after", "all",  "an",   "and",  "any",  "as",    "at",
      "be",   "but",   "by",    "can",  "could", "do",  "for",  "from",  "had",
      "has",  "have",  "he",    "her",  "his",  "i",    "if",   "in",    "into",
      "is",   "it",    "its",   "my",   "no",   "not",  "of",   "on",    "or",
      "our",  "she",   "so",    "that", "the",  "their", "then", "there", "they",
      "this", "to",    "up",    "was",  "we",   "were", "what", "when",  "who",
      "will", "with",  "you",
  };
  return words;
}

std::vector<std::string> block_keys(const RawRecord& r,
                                    const std::set<std::string>& stopwords) {
  std::vector<std::string> keys;
  for (auto& tok : title_tokens(r)) {
    if (!stopwords.contains(tok)) keys.push_back(std::move(tok));
  }
  return keys;
}

std::string BlockingStats::summary() const {
  std::ostringstream out;
  out << "records=" << n_records << " blocks=" << n_blocks
      << " skipped_blocks=" << n_skipped_blocks << " candidates=" << n_candidates
      << " cross_pairs=" << n_cross_pairs
      << " reduction=" << format_double(reduction_ratio());
  return out.str();
}

std::vector<CandidatePair> generate_candidates(std::span<const RawRecord> records,
                                               const BlockingConfig& cfg,
                                               BlockingStats* stats) {
  // Frequent title tokens are per-source noise words: drop a token once it
  // appears in more than df_fraction of any single source's titles (and at
  // least df_min_count of them).
  std::map<int, std::map<std::string, int>> df;
  std::map<int, int> source_sizes;
  std::vector<std::vector<std::string>> tokens(records.size());
  for (std::size_t k = 0; k < records.size(); ++k) {
    tokens[k] = title_tokens(records[k]);
    auto& counts = df[records[k].source];
    for (const auto& tok : tokens[k]) ++counts[tok];
    ++source_sizes[records[k].source];
  }
  std::set<std::string> stopwords = english_stopwords();
  stopwords.insert(cfg.extra_stopwords.begin(), cfg.extra_stopwords.end());
  for (const auto& [source, counts] : df) {
    const double cutoff = cfg.df_fraction * source_sizes.at(source);
    for (const auto& [tok, count] : counts) {
      if (count > cutoff && count >= cfg.df_min_count) stopwords.insert(tok);
    }
  }

  std::map<std::string, std::vector<std::size_t>> blocks;
  for (std::size_t k = 0; k < records.size(); ++k) {
    for (const auto& tok : tokens[k]) {
      if (!stopwords.contains(tok)) blocks[tok].push_back(k);
    }
  }

  std::set<CandidatePair> out;
  std::size_t skipped = 0;
  for (const auto& [tok, members] : blocks) {
    if (static_cast<int>(members.size()) > cfg.max_block_size) {
      ++skipped;
      continue;
    }
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        const RawRecord* ra = &records[members[i]];
        const RawRecord* rb = &records[members[j]];
        if (ra->source == rb->source) continue;
        if (ra->source > rb->source) std::swap(ra, rb);
        out.insert({ra->source, ra->id, rb->source, rb->id});
      }
    }
  }

  if (stats) {
    stats->n_records = records.size();
    stats->n_blocks = blocks.size();
    stats->n_skipped_blocks = skipped;
    stats->n_candidates = out.size();
    stats->n_cross_pairs = 0;
    for (auto a = source_sizes.begin(); a != source_sizes.end(); ++a) {
      for (auto b = std::next(a); b != source_sizes.end(); ++b) {
        stats->n_cross_pairs +=
            static_cast<std::size_t>(a->second) * static_cast<std::size_t>(b->second);
      }
    }
  }
  return {out.begin(), out.end()};
}

}  // namespace ertl
