// Generates the bundled movie toy fixture: four sources observing the same
// latent movie catalog through very different corruption profiles, plus a
// labeled cross-source pair file. The profiles are deliberately skewed —
// imdb/itunes keep year and cast informative while amg/flix degrade them —
// so a pooled model is dragged away from the imdb-itunes optimum and the
// per-source correction vectors have something real to recover.
//
// Usage: ertl_make_fixture --out <dir> [--seed N] [--movies N]
//        [--labels-per-pair N]

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ertl/features.hpp"
#include "ertl/io.hpp"
#include "ertl/rng.hpp"

namespace {

using ertl::Rng;

struct Movie {
  std::vector<std::string> title;  // franchise base words + member word
  int year = 0;
  int runtime = 0;
  std::vector<std::string> cast;
  std::vector<std::string> directors;
  int franchise = -1;
};

struct SourceProfile {
  std::string name;
  double coverage;        // fraction of the catalog the source holds
  double p_title_drop;    // per-token drop probability
  double p_alt_title;     // emit a one-word-off alternate title
  int year_shift;         // systematic convention offset (e.g. DVD release)
  int year_jitter;        // uniform in [-j, j]
  double p_year_missing;
  int runtime_shift;      // systematic cut-length convention offset
  int runtime_jitter;
  double p_runtime_missing;
  double cast_keep;       // per-entry keep probability
  double p_directors_missing;
};

// imdb and itunes are comparatively clean across the board. amg guts the
// people fields (cast, directors) while flix dates by re-release and lists
// arbitrary cuts, gutting the numeric fields. Each source therefore degrades
// a different feature subset, so the best weighting differs by source pair
// in exactly the additive per-source way the transfer model can absorb.
const std::vector<SourceProfile>& profiles() {
  static const std::vector<SourceProfile> p = {
      {"imdb", 0.92, 0.22, 0.30, 0, 1, 0.05, 0, 4, 0.05, 0.80, 0.05},
      {"itunes", 0.88, 0.28, 0.20, 0, 1, 0.08, -1, 5, 0.08, 0.72, 0.10},
      {"amg", 0.85, 0.25, 0.15, 2, 3, 0.15, 8, 10, 0.12, 0.10, 0.85},
      {"flix", 0.82, 0.30, 0.10, -9, 40, 0.25, -12, 45, 0.22, 0.50, 0.25},
  };
  return p;
}

std::vector<std::string> make_vocab(const std::string& stem, int n) {
  std::vector<std::string> v;
  v.reserve(n);
  for (int i = 0; i < n; ++i) v.push_back(stem + std::to_string(i));
  return v;
}

template <typename T>
std::vector<T> pick_distinct(Rng& rng, const std::vector<T>& pool, int k) {
  std::set<std::size_t> used;
  std::vector<T> out;
  while (static_cast<int>(out.size()) < k) {
    const std::size_t i = rng.below(pool.size());
    if (used.insert(i).second) out.push_back(pool[i]);
  }
  return out;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

int jitter(Rng& rng, int magnitude) {
  if (magnitude == 0) return 0;
  return static_cast<int>(rng.below(2 * magnitude + 1)) - magnitude;
}

// Movies arrive in franchises of 1-4 entries: members share two base title
// words, an era, a cast pool and the directors, so franchise siblings are
// hard negatives on every feature at once.
std::vector<Movie> make_catalog(Rng& rng, int n_movies) {
  const auto words = make_vocab("word", 80);
  const auto actors = make_vocab("actor", 160);
  const auto directors = make_vocab("director", 48);
  std::vector<Movie> movies;
  movies.reserve(n_movies);
  int franchise = 0;
  while (static_cast<int>(movies.size()) < n_movies) {
    const int size = std::min<int>(1 + static_cast<int>(rng.below(4)),
                                   n_movies - static_cast<int>(movies.size()));
    const auto base_title = pick_distinct(rng, words, 2);
    const int base_year = 1935 + static_cast<int>(rng.below(78));
    const int base_runtime = 70 + static_cast<int>(rng.below(111));
    const auto pool = pick_distinct(rng, actors, 8);
    const auto dirs = pick_distinct(rng, directors, 1 + static_cast<int>(rng.below(2)));
    for (int k = 0; k < size; ++k) {
      Movie mv;
      mv.franchise = franchise;
      mv.title = base_title;
      mv.title.push_back(words[rng.below(words.size())]);
      mv.year = base_year + 2 * k + jitter(rng, 1);
      mv.runtime = base_runtime + jitter(rng, 12);
      mv.cast = pick_distinct(rng, pool, 4 + static_cast<int>(rng.below(3)));
      mv.directors = dirs;
      movies.push_back(std::move(mv));
    }
    ++franchise;
  }
  return movies;
}

// The source's corrupted view of one movie; nullopt when the source does
// not carry it.
ertl::RawRecord corrupt(Rng& rng, const Movie& mv, const SourceProfile& p,
                        const std::vector<std::string>& vocab, int source_index,
                        int record_index) {
  ertl::RawRecord r;
  r.source = source_index;
  r.id = "r" + std::to_string(record_index);

  std::vector<std::string> kept;
  for (const auto& w : mv.title) {
    if (rng.uniform01() >= p.p_title_drop) kept.push_back(w);
  }
  if (kept.empty()) kept.push_back(mv.title[rng.below(mv.title.size())]);
  r.title = join(kept);
  if (rng.uniform01() < p.p_alt_title) {
    std::vector<std::string> alt = mv.title;
    alt[rng.below(alt.size())] = vocab[rng.below(vocab.size())];
    r.alt_titles.push_back(join(alt));
  }

  if (rng.uniform01() >= p.p_year_missing) {
    r.year = mv.year + p.year_shift + jitter(rng, p.year_jitter);
  }
  if (rng.uniform01() >= p.p_runtime_missing) {
    r.runtime = mv.runtime + p.runtime_shift + jitter(rng, p.runtime_jitter);
  }

  for (const auto& a : mv.cast) {
    if (rng.uniform01() < p.cast_keep) r.cast.push_back(a);
  }
  if (r.cast.empty()) r.cast.push_back(mv.cast[rng.below(mv.cast.size())]);

  if (rng.uniform01() >= p.p_directors_missing) r.directors = mv.directors;
  return r;
}

bool share_title_word(const Movie& a, const Movie& b) {
  for (const auto& w : a.title) {
    if (std::find(b.title.begin(), b.title.end(), w) != b.title.end()) return true;
  }
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Build the bundled movie toy fixture"};
  std::string out_dir = "data/movies_toy";
  std::uint64_t seed = 20126;
  int n_movies = 500;
  int labels_per_pair = 300;  // half matches, half non-matches
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--seed", seed, "Generator seed");
  app.add_option("--movies", n_movies, "Latent catalog size")->check(CLI::Range(20, 100000));
  app.add_option("--labels-per-pair", labels_per_pair, "Labeled pairs per source pair")
      ->check(CLI::Range(4, 100000));
  CLI11_PARSE(app, argc, argv);

  Rng rng(ertl::derive_seed(seed, 101));
  const auto vocab = make_vocab("word", 80);
  const std::vector<Movie> catalog = make_catalog(rng, n_movies);
  std::vector<std::vector<int>> franchise_members;
  for (int m = 0; m < n_movies; ++m) {
    const int f = catalog[m].franchise;
    if (f >= static_cast<int>(franchise_members.size())) franchise_members.resize(f + 1);
    franchise_members[f].push_back(m);
  }
  const auto& profs = profiles();
  const int n_sources = static_cast<int>(profs.size());

  // Per-source records plus the movie -> per-source id map for labeling.
  std::vector<std::string> source_names;
  for (const auto& p : profs) source_names.push_back(p.name);
  ertl::SourceRegistry registry(source_names);
  std::vector<ertl::RawRecord> records;
  std::vector<std::map<int, std::string>> id_of_movie(n_sources);
  for (int s = 0; s < n_sources; ++s) {
    Rng source_rng(ertl::derive_seed(seed, 102, s));
    int next_id = 0;
    for (int m = 0; m < n_movies; ++m) {
      if (source_rng.uniform01() >= profs[s].coverage) continue;
      records.push_back(corrupt(source_rng, catalog[m], profs[s], vocab, s, next_id));
      id_of_movie[s][m] = records.back().id;
      ++next_id;
    }
  }
  std::filesystem::create_directories(out_dir);
  ertl::write_records_jsonl(out_dir + "/records.jsonl", records, registry);

  // Labels: per source pair, matches are co-held movies; non-matches favor
  // franchise siblings, close years, or shared title words so every feature
  // has to work for a living.
  std::vector<ertl::PairRow> rows;
  const int n_match = labels_per_pair / 2;
  const int n_nonmatch = labels_per_pair - n_match;
  for (int a = 0; a < n_sources; ++a) {
    for (int b = a + 1; b < n_sources; ++b) {
      Rng pair_rng(ertl::derive_seed(seed, 103, (static_cast<std::uint64_t>(a) << 32) |
                                                    static_cast<std::uint64_t>(b)));
      std::vector<int> shared;
      for (const auto& [m, id] : id_of_movie[a]) {
        if (id_of_movie[b].contains(m)) shared.push_back(m);
      }
      if (static_cast<int>(shared.size()) < n_match) {
        std::cerr << "fixture: only " << shared.size() << " co-held movies for "
                  << profs[a].name << "-" << profs[b].name << "\n";
        return 1;
      }
      // Partial Fisher-Yates for the match sample.
      for (int k = 0; k < n_match; ++k) {
        const std::size_t j = k + pair_rng.below(shared.size() - k);
        std::swap(shared[k], shared[j]);
        const int m = shared[k];
        rows.push_back({profs[a].name, id_of_movie[a][m], profs[b].name,
                        id_of_movie[b][m], +1});
      }
      std::vector<std::pair<int, int>> siblings;
      for (const auto& [m1, id1] : id_of_movie[a]) {
        for (int m2 : franchise_members[catalog[m1].franchise]) {
          if (m2 != m1 && id_of_movie[b].contains(m2)) siblings.push_back({m1, m2});
        }
      }
      std::set<std::pair<int, int>> used;
      long attempts = 0;
      while (static_cast<int>(used.size()) < n_nonmatch) {
        if (++attempts > 2000000) {
          std::cerr << "fixture: could not assemble " << n_nonmatch
                    << " distinct non-matches for " << profs[a].name << "-"
                    << profs[b].name << "\n";
          return 1;
        }
        int m1 = 0;
        int m2 = 0;
        const double mode = pair_rng.uniform01();
        if (mode < 0.50 && !siblings.empty()) {
          const auto& pr = siblings[pair_rng.below(siblings.size())];
          m1 = pr.first;
          m2 = pr.second;
        } else {
          m1 = static_cast<int>(pair_rng.below(n_movies));
          m2 = static_cast<int>(pair_rng.below(n_movies));
          if (m1 == m2) continue;
          if (!id_of_movie[a].contains(m1) || !id_of_movie[b].contains(m2)) continue;
          if (mode < 0.70) {
            if (std::abs(catalog[m1].year - catalog[m2].year) > 2) continue;
          } else if (mode < 0.90) {
            if (!share_title_word(catalog[m1], catalog[m2])) continue;
          }
        }
        if (!used.insert({m1, m2}).second) continue;
        rows.push_back({profs[a].name, id_of_movie[a][m1], profs[b].name,
                        id_of_movie[b][m2], -1});
      }
    }
  }
  ertl::write_pairs_csv(out_dir + "/labels.csv", rows);

  nlohmann::ordered_json meta;
  meta["seed"] = seed;
  meta["movies"] = n_movies;
  meta["labels_per_pair"] = labels_per_pair;
  meta["sources"] = source_names;
  meta["records"] = records.size();
  meta["labels"] = rows.size();
  ertl::write_text_file(out_dir + "/fixture.json", meta.dump(2) + "\n");

  std::cout << "wrote " << records.size() << " records and " << rows.size()
            << " labels to " << out_dir << "\n";
  return 0;
}
