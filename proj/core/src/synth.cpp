#include "ertl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "ertl/errors.hpp"
#include "ertl/rng.hpp"

namespace ertl {

namespace {

std::uint64_t pair_key(SourcePair p) {
  return (static_cast<std::uint64_t>(p.a) << 32) | static_cast<std::uint32_t>(p.b);
}

/// `count` distinct entity indices via a partial Fisher-Yates shuffle.
std::vector<int> sample_distinct(Rng& rng, int n_entities, int count) {
  std::vector<int> ids(n_entities);
  std::iota(ids.begin(), ids.end(), 0);
  for (int t = 0; t < count; ++t) {
    const int j = t + static_cast<int>(rng.below(n_entities - t));
    std::swap(ids[t], ids[j]);
  }
  ids.resize(count);
  return ids;
}

FeatureVector diff_features(const std::vector<double>& a, const std::vector<double>& b) {
  FeatureVector x(a.size());
  for (std::size_t t = 0; t < a.size(); ++t) x[t] = -std::fabs(a[t] - b[t]);
  return x;
}

Dataset empty_dataset(const SynthWorld& world) {
  Dataset d;
  d.dim = world.dim;
  d.feature_names = FeatureSpec::numeric(world.dim).names();
  d.sources = world.sources;
  return d;
}

std::vector<std::pair<SourcePair, int>> spread_evenly(int n_sources, int total) {
  std::vector<SourcePair> pairs;
  for (int i = 0; i < n_sources; ++i) {
    for (int j = i + 1; j < n_sources; ++j) pairs.push_back({i, j});
  }
  const int base = total / static_cast<int>(pairs.size());
  const int extra = total % static_cast<int>(pairs.size());
  std::vector<std::pair<SourcePair, int>> counts;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const int c = base + (static_cast<int>(k) < extra ? 1 : 0);
    if (c > 0) counts.emplace_back(pairs[k], c);
  }
  return counts;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_sources < 2) throw ValidationError("synth: n_sources must be at least 2");
  if (n_entities < 2) throw ValidationError("synth: n_entities must be at least 2");
  if (dim <= 0) throw ValidationError("synth: dim must be positive");
  if (!std::isfinite(noise_min) || noise_min < 0) {
    throw ValidationError("synth: noise_min must be a nonnegative finite value");
  }
  if (!std::isfinite(noise_max) || noise_max < noise_min) {
    throw ValidationError("synth: noise_max must be at least noise_min");
  }
  if (!std::isfinite(heterogeneity) || heterogeneity < 0) {
    throw ValidationError("synth: heterogeneity must be a nonnegative finite value");
  }
  if (pairs_per_source_pair < 0) {
    throw ValidationError("synth: pairs_per_source_pair must be nonnegative");
  }
  if (!(match_fraction > 0.0 && match_fraction < 1.0)) {
    throw ValidationError("synth: match_fraction must lie in (0, 1)");
  }
  if (test_pairs_total < 0) {
    throw ValidationError("synth: test_pairs_total must be nonnegative");
  }
}

std::vector<std::pair<SourcePair, int>> uniform_pair_counts(int n_sources, int count) {
  std::vector<std::pair<SourcePair, int>> counts;
  for (int i = 0; i < n_sources; ++i) {
    for (int j = i + 1; j < n_sources; ++j) counts.emplace_back(SourcePair{i, j}, count);
  }
  return counts;
}

std::vector<std::pair<SourcePair, int>> spread_pair_counts(int n_sources, int total) {
  return spread_evenly(n_sources, total);
}

SynthWorld make_world(const SynthConfig& cfg) {
  cfg.validate();
  SynthWorld world;
  world.dim = cfg.dim;
  world.seed = cfg.seed;
  world.sources.reserve(cfg.n_sources);
  for (int i = 0; i < cfg.n_sources; ++i) world.sources.push_back("s" + std::to_string(i));

  Rng entity_rng(derive_seed(cfg.seed, stream::kEntities));
  world.entities.assign(cfg.n_entities, std::vector<double>(cfg.dim));
  for (auto& e : world.entities) {
    for (double& v : e) v = entity_rng.uniform01();
  }

  const double hi = cfg.noise_min + cfg.heterogeneity * (cfg.noise_max - cfg.noise_min);
  world.sigma.assign(cfg.n_sources, std::vector<double>(cfg.dim));
  world.records.assign(cfg.n_sources, {});
  for (int i = 0; i < cfg.n_sources; ++i) {
    Rng sigma_rng(derive_seed(cfg.seed, stream::kSigma, i));
    for (double& s : world.sigma[i]) s = sigma_rng.uniform(cfg.noise_min, hi);
    Rng noise_rng(derive_seed(cfg.seed, stream::kNoise, i));
    world.records[i].assign(cfg.n_entities, std::vector<double>(cfg.dim));
    for (int k = 0; k < cfg.n_entities; ++k) {
      for (int t = 0; t < cfg.dim; ++t) {
        world.records[i][k][t] =
            world.entities[k][t] + noise_rng.gaussian(0.0, world.sigma[i][t]);
      }
    }
  }
  return world;
}

std::vector<IdPairSample> sample_id_pairs(
    const SynthWorld& world, std::span<const std::pair<SourcePair, int>> counts,
    double match_fraction, std::uint64_t stream_tag) {
  if (!(match_fraction > 0.0 && match_fraction < 1.0)) {
    throw ValidationError("sample_pairs: match_fraction must lie in (0, 1)");
  }
  std::vector<IdPairSample> out;
  const int n_entities = world.n_entities();
  for (const auto& [pair, count] : counts) {
    if (pair.b >= world.n_sources()) {
      throw ValidationError("sample_pairs: source index " + std::to_string(pair.b) +
                            " out of range");
    }
    if (count <= 0) continue;
    const int n_match = static_cast<int>(std::llround(count * match_fraction));
    if (n_match > n_entities) {
      throw std::invalid_argument("sample_pairs: " + std::to_string(n_match) +
                                  " matches requested for pair " + std::to_string(pair.a) +
                                  "-" + std::to_string(pair.b) + " but only " +
                                  std::to_string(n_entities) + " entities exist");
    }
    Rng rng(derive_seed(world.seed, stream_tag, pair_key(pair)));
    for (int k : sample_distinct(rng, n_entities, n_match)) {
      out.push_back({pair, k, k, +1});
    }
    for (int t = 0; t < count - n_match; ++t) {
      const int k1 = static_cast<int>(rng.below(n_entities));
      int k2 = k1;
      while (k2 == k1) k2 = static_cast<int>(rng.below(n_entities));
      out.push_back({pair, k1, k2, -1});
    }
  }
  return out;
}

Dataset sample_pairs(const SynthWorld& world,
                     std::span<const std::pair<SourcePair, int>> counts,
                     double match_fraction, std::uint64_t stream_tag) {
  Dataset data = empty_dataset(world);
  for (const auto& s : sample_id_pairs(world, counts, match_fraction, stream_tag)) {
    data.examples.push_back({diff_features(world.records[s.pair.a][s.entity_a],
                                           world.records[s.pair.b][s.entity_b]),
                             s.pair, s.y});
  }
  return data;
}

SynthDataset generate(const SynthConfig& cfg) {
  SynthDataset out;
  out.world = make_world(cfg);
  out.train = sample_pairs(out.world,
                           uniform_pair_counts(cfg.n_sources, cfg.pairs_per_source_pair),
                           cfg.match_fraction, stream::kTrainPairs);
  if (cfg.test_pairs_total > 0) {
    out.test = sample_pairs(out.world, spread_evenly(cfg.n_sources, cfg.test_pairs_total),
                            cfg.match_fraction, stream::kTestPairs);
  } else {
    out.test = empty_dataset(out.world);
  }
  return out;
}

std::vector<SynthDataset> sweep_sources(const SynthConfig& base,
                                        std::span<const int> n_list,
                                        int labels_per_source) {
  if (labels_per_source <= 0) {
    throw ValidationError("sweep_sources: labels_per_source must be positive");
  }
  std::vector<SynthDataset> out;
  out.reserve(n_list.size());
  for (int n : n_list) {
    SynthConfig cfg = base;
    cfg.n_sources = n;
    cfg.validate();
    SynthDataset ds;
    ds.world = make_world(cfg);
    // Each source spends its label budget on up to three partner rings
    // (strides 1..3, kept distinct by requiring 2*stride <= n) so every
    // per-source vector is fit against several partners; the labeled-pair
    // count stays linear in n, far below the n(n-1)/2 total.
    std::vector<int> strides;
    for (int s = 1; s <= 3 && 2 * s <= n; ++s) strides.push_back(s);
    const int per_stride = labels_per_source / static_cast<int>(strides.size());
    std::map<SourcePair, int> ring;
    for (int i = 0; i < n; ++i) {
      int remaining = labels_per_source;
      for (std::size_t k = 1; k < strides.size(); ++k) {
        ring[SourcePair::of(i, (i + strides[k]) % n)] += per_stride;
        remaining -= per_stride;
      }
      ring[SourcePair::of(i, (i + 1) % n)] += remaining;
    }
    std::vector<std::pair<SourcePair, int>> train_counts(ring.begin(), ring.end());
    ds.train = sample_pairs(ds.world, train_counts, cfg.match_fraction,
                            stream::kTrainPairs);
    if (cfg.test_pairs_total > 0) {
      ds.test = sample_pairs(ds.world, spread_evenly(n, cfg.test_pairs_total),
                             cfg.match_fraction, stream::kTestPairs);
    } else {
      ds.test = empty_dataset(ds.world);
    }
    out.push_back(std::move(ds));
  }
  return out;
}

std::vector<RawRecord> world_records(const SynthWorld& world) {
  std::vector<RawRecord> out;
  out.reserve(static_cast<std::size_t>(world.n_sources()) * world.n_entities());
  for (int i = 0; i < world.n_sources(); ++i) {
    for (int k = 0; k < world.n_entities(); ++k) {
      RawRecord r;
      r.source = i;
      r.id = "e" + std::to_string(k);
      r.title = r.id;
      r.attrs = world.records[i][k];
      out.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace ertl
