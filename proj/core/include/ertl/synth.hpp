#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ertl/dataset.hpp"
#include "ertl/features.hpp"

namespace ertl {

/// Configuration of the heterogeneous multi-source generator. Latent
/// entity attributes are uniform on [0,1); each source observes every
/// entity through per-source, per-attribute Gaussian noise whose scale is
/// drawn from [noise_min, noise_min + heterogeneity*(noise_max-noise_min)]:
/// heterogeneity (>= 0, not capped at 1) scales the spread of per-source
/// noise around the base range, the single knob controlling how much the
/// sources differ.
struct SynthConfig {
  int n_sources = 10;
  int n_entities = 1000;
  int dim = 5;
  double noise_min = 0.01;
  double noise_max = 0.15;
  double heterogeneity = 4.0;  // 0 = all sources share one noise vector
  int pairs_per_source_pair = 100;
  double match_fraction = 0.5;  // in (0,1)
  int test_pairs_total = 10000;  // 0 = no test split
  std::uint64_t seed = 0;

  void validate() const;
};

/// Latent entities plus each source's noisy view of them.
struct SynthWorld {
  int dim = 0;
  std::vector<std::string> sources;
  std::vector<std::vector<double>> entities;  // n_entities x dim
  std::vector<std::vector<double>> sigma;     // n_sources x dim noise scales
  std::vector<std::vector<std::vector<double>>> records;  // source x entity x dim
  std::uint64_t seed = 0;

  int n_sources() const { return static_cast<int>(sources.size()); }
  int n_entities() const { return static_cast<int>(entities.size()); }
};

struct SynthDataset {
  Dataset train;
  Dataset test;   // empty when test_pairs_total == 0
  SynthWorld world;  // ground truth for diagnostics
};

/// Entities, noise scales and records, fully determined by cfg.seed.
/// Streams are keyed per purpose and source index, so growing n_sources
/// leaves the existing sources' draws unchanged (nested sweeps).
SynthWorld make_world(const SynthConfig& cfg);

/// count on every source pair (i < j).
std::vector<std::pair<SourcePair, int>> uniform_pair_counts(int n_sources, int count);

/// total spread as evenly as possible over the source pairs (earlier pairs
/// take the remainder).
std::vector<std::pair<SourcePair, int>> spread_pair_counts(int n_sources, int total);

/// One sampled record pair, identified by entity indices into the world.
struct IdPairSample {
  SourcePair pair;
  int entity_a = 0;  // entity index in pair.a's records
  int entity_b = 0;  // entity index in pair.b's records
  int y = 0;         // +1 match, -1 non-match
};

/// Labeled record pairs with the requested count per source pair. Match
/// pairs share a latent entity (sampled without replacement, hence count *
/// match_fraction may not exceed n_entities); non-match pairs join two
/// distinct entities. Streams are keyed per source pair, so growing the
/// count list leaves existing pairs' draws unchanged.
std::vector<IdPairSample> sample_id_pairs(
    const SynthWorld& world, std::span<const std::pair<SourcePair, int>> counts,
    double match_fraction, std::uint64_t stream_tag);

/// sample_id_pairs materialized as a dataset with -|attribute difference|
/// features.
Dataset sample_pairs(const SynthWorld& world,
                     std::span<const std::pair<SourcePair, int>> counts,
                     double match_fraction, std::uint64_t stream_tag);

/// Uniform allocation: train pairs_per_source_pair on every source pair,
/// test_pairs_total spread as evenly as possible across pairs.
SynthDataset generate(const SynthConfig& cfg);

/// Source-complexity sweep: one dataset per N in n_list (increasing).
/// Every source brings labels_per_source training labels, allocated to the
/// ring pair (i, (i+1) mod N), so the label budget grows linearly in N and
/// only linearly many of the N(N-1)/2 pairs are labeled. All datasets share
/// the latent-entity stream.
std::vector<SynthDataset> sweep_sources(const SynthConfig& base,
                                        std::span<const int> n_list,
                                        int labels_per_source);

/// The generator's record view for the file pipeline: one RawRecord per
/// (source, entity) with the noisy attributes in `attrs` and id "e<k>".
std::vector<RawRecord> world_records(const SynthWorld& world);

}  // namespace ertl
