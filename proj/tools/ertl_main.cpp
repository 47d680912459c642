// ertl: command-line front end for the pairwise entity-resolution pipeline.
//
// Subcommands compose via files: synth generates records and labels,
// block proposes candidate pairs, featurize turns pairs into feature
// vectors, train/cv fit models, score and eval consume them, and
// experiment runs the full synthetic studies. Every run echoes its
// fully-resolved configuration to <out-dir>/plan.json; outputs are
// byte-identical across runs up to timing fields.
//
// Exit codes: 0 success, 2 usage, 3 validation or I/O, 4 numerical failure.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ertl/blocking.hpp"
#include "ertl/cv.hpp"
#include "ertl/errors.hpp"
#include "ertl/experiments.hpp"
#include "ertl/features.hpp"
#include "ertl/io.hpp"
#include "ertl/metrics.hpp"
#include "ertl/model.hpp"
#include "ertl/rng.hpp"
#include "ertl/solver.hpp"
#include "ertl/synth.hpp"

namespace {

using nlohmann::ordered_json;

struct GlobalOpts {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir;  // default: $ER_OUT_DIR or "."
};

std::string resolve_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("ER_OUT_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return ".";
}

std::string out_path(const GlobalOpts& g, const std::string& name) {
  std::filesystem::create_directories(g.out_dir);
  return (std::filesystem::path(g.out_dir) / name).string();
}

ordered_json global_json(const GlobalOpts& g, const std::string& command) {
  ordered_json j;
  j["command"] = command;
  j["seed"] = g.seed;
  j["threads"] = g.threads;
  j["out_dir"] = g.out_dir;
  return j;
}

void write_plan(const GlobalOpts& g, const ordered_json& plan) {
  ertl::write_text_file(out_path(g, "plan.json"), plan.dump(2) + "\n");
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---------------------------------------------------------------------------
// synth

struct SynthOpts {
  ertl::SynthConfig cfg;
};

void run_synth(const GlobalOpts& g, SynthOpts& o) {
  o.cfg.seed = g.seed;
  try {
    o.cfg.validate();
  } catch (const ertl::ValidationError& e) {
    // Every generator setting is flag-fed, so a bad config is a usage error.
    throw std::invalid_argument(e.what());
  }

  const ertl::SynthWorld world = ertl::make_world(o.cfg);
  const std::vector<ertl::RawRecord> records = ertl::world_records(world);
  const ertl::SourceRegistry registry(world.sources);
  ertl::write_records_jsonl(out_path(g, "records.jsonl"), records, registry);

  const auto to_rows = [&](const std::vector<ertl::IdPairSample>& samples) {
    std::vector<ertl::PairRow> rows;
    rows.reserve(samples.size());
    for (const auto& s : samples) {
      rows.push_back({world.sources[s.pair.a], "e" + std::to_string(s.entity_a),
                      world.sources[s.pair.b], "e" + std::to_string(s.entity_b), s.y});
    }
    return rows;
  };

  const auto train = ertl::sample_id_pairs(
      world, ertl::uniform_pair_counts(o.cfg.n_sources, o.cfg.pairs_per_source_pair),
      o.cfg.match_fraction, ertl::stream::kTrainPairs);
  ertl::write_pairs_csv(out_path(g, "labels.csv"), to_rows(train));

  if (o.cfg.test_pairs_total > 0) {
    const auto test = ertl::sample_id_pairs(
        world, ertl::spread_pair_counts(o.cfg.n_sources, o.cfg.test_pairs_total),
        o.cfg.match_fraction, ertl::stream::kTestPairs);
    ertl::write_pairs_csv(out_path(g, "labels_test.csv"), to_rows(test));
  }

  ordered_json truth;
  truth["sources"] = world.sources;
  truth["dim"] = world.dim;
  truth["n_entities"] = world.n_entities();
  truth["sigma"] = world.sigma;
  truth["entities"] = world.entities;
  ertl::write_text_file(out_path(g, "ground_truth.json"), truth.dump(2) + "\n");

  ordered_json plan = global_json(g, "synth");
  plan["sources"] = o.cfg.n_sources;
  plan["entities"] = o.cfg.n_entities;
  plan["dim"] = o.cfg.dim;
  plan["noise_min"] = o.cfg.noise_min;
  plan["noise_max"] = o.cfg.noise_max;
  plan["heterogeneity"] = o.cfg.heterogeneity;
  plan["pairs_per_source_pair"] = o.cfg.pairs_per_source_pair;
  plan["match_fraction"] = o.cfg.match_fraction;
  plan["test_pairs"] = o.cfg.test_pairs_total;
  write_plan(g, plan);

  std::cout << "wrote " << records.size() << " records, " << train.size()
            << " train labels to " << g.out_dir << "\n";
}

// ---------------------------------------------------------------------------
// featurize

struct FeaturizeOpts {
  std::string records_path;
  std::string pairs_path;
  std::string out_name = "features.csv";
  std::string kind = "auto";  // auto | movie | numeric
};

// Normalized records keyed by (source index, id); duplicate ids within a
// source are a validation error.
std::map<std::pair<int, std::string>, ertl::RawRecord> index_records(
    std::vector<ertl::RawRecord> records) {
  std::map<std::pair<int, std::string>, ertl::RawRecord> by_key;
  for (auto& r : records) {
    auto key = std::make_pair(r.source, r.id);
    ertl::RawRecord norm = ertl::normalize_record(r);
    if (!by_key.emplace(std::move(key), std::move(norm)).second) {
      throw ertl::ValidationError("duplicate record id '" + r.id + "' within source " +
                                  std::to_string(r.source));
    }
  }
  return by_key;
}

ertl::FeatureSpec resolve_feature_spec(const std::string& kind,
                                       std::span<const ertl::RawRecord> records) {
  if (kind == "movie") return ertl::FeatureSpec::movie();
  const bool numeric =
      kind == "numeric" ||
      (!records.empty() &&
       std::all_of(records.begin(), records.end(),
                   [](const ertl::RawRecord& r) { return !r.attrs.empty(); }));
  if (!numeric) return ertl::FeatureSpec::movie();
  const std::size_t n_attrs = records.empty() ? 0 : records.front().attrs.size();
  for (const auto& r : records) {
    if (r.attrs.size() != n_attrs) {
      throw ertl::ValidationError("record '" + r.id + "' has " +
                                  std::to_string(r.attrs.size()) + " attrs, expected " +
                                  std::to_string(n_attrs));
    }
  }
  if (n_attrs == 0) {
    throw ertl::ValidationError("numeric feature set requires records with attrs");
  }
  return ertl::FeatureSpec::numeric(static_cast<int>(n_attrs));
}

void run_featurize(const GlobalOpts& g, FeaturizeOpts& o) {
  ertl::SourceRegistry registry;
  std::vector<ertl::RawRecord> records =
      ertl::read_records_jsonl(o.records_path, registry);
  const ertl::FeatureSpec spec = resolve_feature_spec(o.kind, records);
  const auto by_key = index_records(std::move(records));

  const auto lookup = [&](const std::string& source, const std::string& id)
      -> std::pair<int, const ertl::RawRecord*> {
    const int idx = registry.find(source);
    if (idx < 0) {
      throw ertl::ValidationError("pair references unknown source '" + source + "'");
    }
    const auto it = by_key.find({idx, id});
    if (it == by_key.end()) {
      throw ertl::ValidationError("pair references unknown record '" + source + "/" +
                                  id + "'");
    }
    return {idx, &it->second};
  };

  ertl::FeatureTable table;
  table.feature_names = spec.names();
  const std::vector<ertl::PairRow> pairs = ertl::read_pairs_csv(o.pairs_path);
  for (const auto& row : pairs) {
    auto [ia, ra] = lookup(row.source_a, row.id_a);
    auto [ib, rb] = lookup(row.source_b, row.id_b);
    if (ia == ib) {
      throw ertl::ValidationError("pair " + row.id_a + "/" + row.id_b +
                                  " joins source '" + row.source_a + "' with itself");
    }
    ertl::PairRow canonical = row;
    if (ia > ib) {
      std::swap(canonical.source_a, canonical.source_b);
      std::swap(canonical.id_a, canonical.id_b);
    }
    table.features.push_back(ertl::featurize_pair(*ra, *rb, spec));
    table.pairs.push_back(std::move(canonical));
    table.has_labels = table.has_labels || row.label.has_value();
  }
  ertl::write_features_csv(out_path(g, o.out_name), table);

  ordered_json plan = global_json(g, "featurize");
  plan["records"] = o.records_path;
  plan["pairs"] = o.pairs_path;
  plan["out"] = o.out_name;
  plan["feature_set"] = spec.names();
  write_plan(g, plan);

  std::cout << "featurized " << table.pairs.size() << " pairs (" << spec.dim()
            << " features) to " << out_path(g, o.out_name) << "\n";
}

// ---------------------------------------------------------------------------
// block

struct BlockOpts {
  std::string records_path;
  std::string out_name = "candidates.csv";
  ertl::BlockingConfig cfg;
  std::string extra_stopwords;  // comma-separated
};

void run_block(const GlobalOpts& g, BlockOpts& o) {
  ertl::SourceRegistry registry;
  std::vector<ertl::RawRecord> records =
      ertl::read_records_jsonl(o.records_path, registry);
  for (auto& r : records) r = ertl::normalize_record(r);
  for (const auto& w : split_list(o.extra_stopwords)) o.cfg.extra_stopwords.insert(w);

  ertl::BlockingStats stats;
  const std::vector<ertl::CandidatePair> candidates =
      ertl::generate_candidates(records, o.cfg, &stats);
  ertl::write_candidates_csv(out_path(g, o.out_name), candidates, registry);
  std::cerr << stats.summary() << "\n";

  ordered_json plan = global_json(g, "block");
  plan["records"] = o.records_path;
  plan["out"] = o.out_name;
  plan["df_fraction"] = o.cfg.df_fraction;
  plan["df_min_count"] = o.cfg.df_min_count;
  plan["max_block_size"] = o.cfg.max_block_size;
  plan["extra_stopwords"] = split_list(o.extra_stopwords);
  write_plan(g, plan);
}

// ---------------------------------------------------------------------------
// train / cv

struct TrainOpts {
  std::string features_path;
  std::string method = "transfer";  // transfer | pooled | indep
  std::optional<double> lambda;
  bool cv = false;
  int grid_points = 10;
  double holdout_fraction = 0.2;
  int folds = 1;
  bool standardize = true;
  std::string declared_sources;  // comma-separated; empty = first-seen
  ertl::SolverConfig solver;
  bool fixed_step = false;
};

ordered_json train_plan_json(const GlobalOpts& g, const TrainOpts& o,
                             const std::string& command) {
  ordered_json plan = global_json(g, command);
  plan["features"] = o.features_path;
  plan["method"] = o.method;
  if (o.lambda) {
    plan["lambda"] = *o.lambda;
  }
  plan["cv"] = o.cv;
  if (o.cv) {
    plan["grid_points"] = o.grid_points;
    plan["holdout_fraction"] = o.holdout_fraction;
    plan["folds"] = o.folds;
  }
  plan["standardize"] = o.standardize;
  plan["declared_sources"] = split_list(o.declared_sources);
  plan["max_iters"] = o.solver.max_iters;
  plan["tol"] = o.solver.tol;
  plan["step_policy"] = o.fixed_step ? "fixed" : "backtracking";
  plan["step_size"] = o.solver.step_size;
  plan["ridge_scale"] = o.solver.indep_ridge_scale;
  return plan;
}

void run_train(const GlobalOpts& g, TrainOpts& o, const std::string& command) {
  if (o.method == "transfer") {
    if (o.cv == o.lambda.has_value()) {
      throw std::invalid_argument(
          "--method transfer needs exactly one of --lambda and --cv");
    }
  } else if (o.cv) {
    throw std::invalid_argument("--cv applies only to --method transfer");
  }
  o.solver.step_policy =
      o.fixed_step ? ertl::StepPolicy::kFixed : ertl::StepPolicy::kBacktracking;
  o.solver.seed = g.seed;
  o.solver.validate();

  const ertl::FeatureTable table = ertl::read_features_csv(o.features_path);
  const std::vector<std::string> declared = split_list(o.declared_sources);
  const ertl::Dataset data =
      ertl::table_to_dataset(table, declared.empty() ? nullptr : &declared);

  ertl::Standardizer scaler;
  scaler.means.assign(data.dim, 0.0);
  scaler.stds.assign(data.dim, 1.0);

  std::vector<std::string> warnings;
  if (o.method == "transfer" && o.cv) {
    // The lambda grid tops out at lambda_max of the (standardized) data;
    // CV standardizes inside each split so no holdout leaks into the scaler.
    ertl::Dataset probe =
        o.standardize ? ertl::standardize_dataset(data, ertl::fit_standardizer(data))
                      : data;
    const ertl::ParamGrid grid =
        ertl::ParamGrid::log_spaced(ertl::lambda_max(probe), o.grid_points);
    ertl::CvOptions cv_opts;
    cv_opts.holdout_fraction = o.holdout_fraction;
    cv_opts.folds = o.folds;
    cv_opts.seed = g.seed;
    cv_opts.standardize = o.standardize;
    const ertl::CVResult res = ertl::select_lambda(data, grid, o.solver, cv_opts);
    warnings = res.warnings;
    ertl::write_text_file(out_path(g, "cv.csv"), res.to_csv());

    o.solver.lambda_a = res.chosen_lambda;
    scaler = res.scaler;
    const auto [model, trace] =
        ertl::fit_transfer(ertl::standardize_dataset(data, scaler), o.solver);
    ertl::save_model(model, out_path(g, "model.json"));
    ertl::write_text_file(out_path(g, "trace.csv"), trace.to_csv());
    std::cout << "chosen lambda " << ertl::format_double(res.chosen_lambda)
              << ", final objective " << ertl::format_double(trace.final_objective())
              << "\n";
  } else {
    if (o.standardize) scaler = ertl::fit_standardizer(data);
    const ertl::Dataset fit_data = ertl::standardize_dataset(data, scaler);
    o.solver.lambda_a = o.lambda.value_or(0.0);
    if (o.method == "transfer" || o.method == "pooled") {
      const auto [model, trace] = o.method == "transfer"
                                      ? ertl::fit_transfer(fit_data, o.solver)
                                      : ertl::fit_pooled(fit_data, o.solver);
      ertl::save_model(model, out_path(g, "model.json"));
      ertl::write_text_file(out_path(g, "trace.csv"), trace.to_csv());
      std::cout << "final objective " << ertl::format_double(trace.final_objective())
                << "\n";
    } else if (o.method == "indep") {
      const ertl::IndepModel model = ertl::fit_indep(fit_data, o.solver);
      warnings = model.warnings;
      ertl::save_indep_model(model, out_path(g, "model.json"));
      std::cout << "fitted " << model.weights.size() << " pair models\n";
    } else {
      throw std::invalid_argument("unknown --method '" + o.method + "'");
    }
  }
  if (o.standardize) {
    ertl::save_standardizer(scaler, data.feature_names, out_path(g, "scaler.json"));
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  write_plan(g, train_plan_json(g, o, command));
}

// ---------------------------------------------------------------------------
// score / eval

struct ScoreOpts {
  std::string model_path;
  std::string features_path;
  std::string scaler_path;  // optional
  std::string out_name = "scores.csv";
};

// Scores every table row under the model, mapping source names to the
// model's indices. Unknown sources are collected and reported together.
std::vector<ertl::ScoredExample> score_table(const ertl::AnyModel& model,
                                             const ertl::FeatureTable& table,
                                             const ertl::Standardizer* scaler,
                                             std::vector<double>* raw_scores) {
  std::map<std::string, int> index;
  const auto& sources = model.sources();
  for (std::size_t i = 0; i < sources.size(); ++i) {
    index[sources[i]] = static_cast<int>(i);
  }
  std::set<std::string> unknown;
  for (const auto& row : table.pairs) {
    if (!index.contains(row.source_a)) unknown.insert(row.source_a);
    if (!index.contains(row.source_b)) unknown.insert(row.source_b);
  }
  if (!unknown.empty()) {
    std::string msg = "features reference sources unknown to the model:";
    for (const auto& s : unknown) msg += " '" + s + "'";
    throw ertl::ValidationError(msg);
  }
  if (scaler != nullptr && scaler->dim() != model.dim()) {
    throw ertl::ValidationError("scaler dimension " + std::to_string(scaler->dim()) +
                                " does not match model dimension " +
                                std::to_string(model.dim()));
  }

  std::vector<ertl::ScoredExample> scored;
  scored.reserve(table.pairs.size());
  for (std::size_t k = 0; k < table.pairs.size(); ++k) {
    const auto& row = table.pairs[k];
    const auto pair = ertl::SourcePair::of(index.at(row.source_a), index.at(row.source_b));
    const ertl::FeatureVector x =
        scaler != nullptr ? scaler->apply(table.features[k]) : table.features[k];
    const double s = model.score(pair, x);
    if (raw_scores != nullptr) raw_scores->push_back(s);
    scored.push_back({s, row.label ? ertl::canonical_label(*row.label) : 1, pair});
  }
  return scored;
}

std::optional<ertl::Standardizer> maybe_load_scaler(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return ertl::load_standardizer(path);
}

void run_score(const GlobalOpts& g, ScoreOpts& o) {
  const ertl::AnyModel model = ertl::load_any_model(o.model_path);
  const ertl::FeatureTable table = ertl::read_features_csv(o.features_path);
  const auto scaler = maybe_load_scaler(o.scaler_path);
  std::vector<double> raw;
  score_table(model, table, scaler ? &*scaler : nullptr, &raw);

  std::ostringstream out;
  out << "source_a,id_a,source_b,id_b" << (table.has_labels ? ",label" : "")
      << ",score\n";
  for (std::size_t k = 0; k < table.pairs.size(); ++k) {
    const auto& row = table.pairs[k];
    out << row.source_a << ',' << row.id_a << ',' << row.source_b << ',' << row.id_b;
    if (table.has_labels) out << ',' << *row.label;
    out << ',' << ertl::format_double(raw[k]) << '\n';
  }
  ertl::write_text_file(out_path(g, o.out_name), out.str());

  ordered_json plan = global_json(g, "score");
  plan["model"] = o.model_path;
  plan["features"] = o.features_path;
  plan["scaler"] = o.scaler_path;
  plan["out"] = o.out_name;
  write_plan(g, plan);

  std::cout << "scored " << table.pairs.size() << " pairs to "
            << out_path(g, o.out_name) << "\n";
}

struct EvalOpts {
  std::string model_path;
  std::string features_path;
  std::string scaler_path;
  std::string eval_pair;  // "source_a,source_b"; empty = all pairs
  double tau = 0.0;
  std::optional<double> at_recall;
};

void run_eval(const GlobalOpts& g, EvalOpts& o) {
  const ertl::AnyModel model = ertl::load_any_model(o.model_path);
  const ertl::FeatureTable table = ertl::read_features_csv(o.features_path);
  if (!table.has_labels) {
    throw ertl::ValidationError("eval requires a labeled feature table");
  }
  const auto scaler = maybe_load_scaler(o.scaler_path);
  std::vector<ertl::ScoredExample> scored =
      score_table(model, table, scaler ? &*scaler : nullptr, nullptr);

  if (!o.eval_pair.empty()) {
    const std::vector<std::string> names = split_list(o.eval_pair);
    if (names.size() != 2) {
      throw std::invalid_argument("--eval-pair expects two source names 'a,b'");
    }
    std::map<std::string, int> index;
    const auto& sources = model.sources();
    for (std::size_t i = 0; i < sources.size(); ++i) {
      index[sources[i]] = static_cast<int>(i);
    }
    for (const auto& n : names) {
      if (!index.contains(n)) {
        throw ertl::ValidationError("--eval-pair source '" + n +
                                    "' unknown to the model");
      }
    }
    const auto pair = ertl::SourcePair::of(index.at(names[0]), index.at(names[1]));
    std::erase_if(scored, [&](const ertl::ScoredExample& e) { return e.pair != pair; });
    if (scored.empty()) {
      throw ertl::ValidationError("no test examples left for pair " + o.eval_pair);
    }
  }

  const ertl::PRCurve curve = ertl::pr_curve(scored);
  ertl::write_text_file(out_path(g, "pr.csv"), curve.to_csv());

  const ertl::ConfusionCounts counts = ertl::confusion(scored, o.tau);
  const ertl::PrecisionRecall pr = ertl::precision_recall(counts);
  std::ostringstream summary;
  summary << "metric,value\n";
  summary << "n_examples," << counts.total() << '\n';
  summary << "tau," << ertl::format_double(o.tau) << '\n';
  summary << "test_error," << ertl::format_double(ertl::test_error(scored, o.tau))
          << '\n';
  summary << "precision," << ertl::format_double(pr.precision) << '\n';
  summary << "recall," << ertl::format_double(pr.recall) << '\n';
  summary << "tp," << counts.tp << '\n';
  summary << "fp," << counts.fp << '\n';
  summary << "fn," << counts.fn << '\n';
  summary << "tn," << counts.tn << '\n';
  if (o.at_recall) {
    bool achieved = false;
    const double p = ertl::precision_at_recall(curve, *o.at_recall, &achieved);
    if (!achieved) {
      std::cerr << "warning: recall " << ertl::format_double(*o.at_recall)
                << " not achieved by any threshold\n";
    }
    summary << "precision_at_recall_" << ertl::format_double(*o.at_recall) << ','
            << ertl::format_double(p) << '\n';
  }
  ertl::write_text_file(out_path(g, "summary.csv"), summary.str());

  ordered_json plan = global_json(g, "eval");
  plan["model"] = o.model_path;
  plan["features"] = o.features_path;
  plan["scaler"] = o.scaler_path;
  plan["eval_pair"] = o.eval_pair;
  plan["tau"] = o.tau;
  if (o.at_recall) plan["at_recall"] = *o.at_recall;
  write_plan(g, plan);

  std::cout << "evaluated " << scored.size() << " examples; test error "
            << ertl::format_double(ertl::test_error(scored, o.tau)) << "\n";
}

// ---------------------------------------------------------------------------
// experiment

struct ExperimentOpts {
  std::string family = "sample_complexity";
  ertl::ExperimentPlan plan;
  std::string methods;          // comma-separated override
  std::string budgets;          // comma-separated ints
  std::string n_list;
  std::string runtime_budgets;
  std::string eval_pair;        // "a,b" for pr_grid/summary
  bool no_cv = false;
};

std::vector<int> parse_int_list(const std::string& csv, const std::string& flag) {
  std::vector<int> out;
  for (const auto& item : split_list(csv)) {
    try {
      std::size_t pos = 0;
      const int v = std::stoi(item, &pos);
      if (pos != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw std::invalid_argument(flag + ": '" + item + "' is not an integer");
    }
  }
  return out;
}

ertl::ExperimentFamily parse_family(const std::string& name) {
  std::string n = name;
  std::replace(n.begin(), n.end(), '-', '_');
  if (n == "sample_complexity" || n == "sample") {
    return ertl::ExperimentFamily::kSampleComplexity;
  }
  if (n == "source_complexity" || n == "source") {
    return ertl::ExperimentFamily::kSourceComplexity;
  }
  if (n == "runtime") return ertl::ExperimentFamily::kRuntime;
  if (n == "pr_grid") return ertl::ExperimentFamily::kPRGrid;
  if (n == "summary") return ertl::ExperimentFamily::kSummary;
  throw std::invalid_argument("unknown experiment family '" + name + "'");
}

void run_experiment_cmd(const GlobalOpts& g, ExperimentOpts& o) {
  ertl::ExperimentPlan& plan = o.plan;
  plan.family = parse_family(o.family);
  plan.seed = g.seed;
  plan.threads = g.threads;
  plan.synth.seed = g.seed;
  plan.cv_lambda = !o.no_cv;
  if (!o.methods.empty()) plan.methods = split_list(o.methods);
  if (!o.budgets.empty()) plan.budgets = parse_int_list(o.budgets, "--budgets");
  if (!o.n_list.empty()) plan.n_list = parse_int_list(o.n_list, "--n-list");
  if (!o.runtime_budgets.empty()) {
    plan.runtime_budgets = parse_int_list(o.runtime_budgets, "--runtime-budgets");
  }
  if (!o.eval_pair.empty()) {
    const std::vector<std::string> names = split_list(o.eval_pair);
    if (names.size() != 2) {
      throw std::invalid_argument("--eval-pair expects two source names 'a,b'");
    }
    plan.eval_source_a = names[0];
    plan.eval_source_b = names[1];
  }
  plan.validate();

  const ertl::ExperimentReport report = ertl::run_experiment(plan);
  std::filesystem::create_directories(g.out_dir);
  ertl::write_report(report, plan, g.out_dir);

  std::cout << ertl::family_name(plan.family) << ": " << report.cells.size()
            << " trial cells, " << report.grid.size() << " grid cells, "
            << report.warnings.size() << " warnings -> " << g.out_dir << "\n";
}

// ---------------------------------------------------------------------------

void add_synth_flags(CLI::App* cmd, ertl::SynthConfig& cfg) {
  cmd->add_option("--sources", cfg.n_sources, "Number of sources (>= 2)")
      ->check(CLI::Range(2, 1000000));
  cmd->add_option("--entities", cfg.n_entities, "Latent entities per world (>= 2)")
      ->check(CLI::Range(2, 1000000000));
  cmd->add_option("--dim", cfg.dim, "Attributes per entity")->check(CLI::Range(1, 4096));
  cmd->add_option("--noise-min", cfg.noise_min, "Lower bound of per-source noise scale")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--noise-max", cfg.noise_max, "Upper bound of per-source noise scale")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--heterogeneity", cfg.heterogeneity,
                  "Spread multiplier for per-source noise (0 = identical sources)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--pairs-per-source-pair", cfg.pairs_per_source_pair,
                  "Training labels per source pair")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--match-fraction", cfg.match_fraction,
                  "Fraction of labeled pairs that are matches, in (0,1)");
  cmd->add_option("--test-pairs", cfg.test_pairs_total,
                  "Total test labels spread over source pairs (0 disables)")
      ->check(CLI::NonNegativeNumber);
}

void add_solver_flags(CLI::App* cmd, TrainOpts& o) {
  cmd->add_option("--max-iters", o.solver.max_iters, "Iteration cap")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tol", o.solver.tol, "Relative objective-change stopping rule")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--step", o.solver.step_size,
                  "Step size (0 = 1/L from a power-iteration estimate)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_flag("--fixed-step", o.fixed_step,
                "Constant step size instead of backtracking");
  cmd->add_option("--ridge-scale", o.solver.indep_ridge_scale,
                  "indep ridge = scale * trace(X'X)/d per pair")
      ->check(CLI::NonNegativeNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Pairwise entity resolution with per-source transfer: synthetic data, "
      "blocking, featurization, solvers and experiment harness"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  std::string out_dir_flag;
  app.add_option("--seed", g.seed, "Root seed; all randomness derives from it");
  app.add_option("--threads", g.threads, "Worker threads for experiments")
      ->check(CLI::PositiveNumber);
  app.add_option("--out-dir", out_dir_flag,
                 "Output directory (default: $ER_OUT_DIR or '.')");

  SynthOpts synth_opts;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic multi-source world");
  add_synth_flags(synth, synth_opts.cfg);

  FeaturizeOpts feat_opts;
  CLI::App* featurize =
      app.add_subcommand("featurize", "Turn record pairs into feature vectors");
  featurize->add_option("--records", feat_opts.records_path, "Records JSONL")->required();
  featurize->add_option("--pairs", feat_opts.pairs_path, "Pairs CSV (labeled or not)")
      ->required();
  featurize->add_option("--out", feat_opts.out_name, "Output feature CSV name");
  featurize->add_option("--feature-set", feat_opts.kind,
                        "auto, movie (jaccard/absdiff) or numeric (per-attr absdiff)")
      ->check(CLI::IsMember({"auto", "movie", "numeric"}));

  BlockOpts block_opts;
  CLI::App* block =
      app.add_subcommand("block", "Propose candidate pairs by shared title tokens");
  block->add_option("--records", block_opts.records_path, "Records JSONL")->required();
  block->add_option("--out", block_opts.out_name, "Output candidates CSV name");
  block->add_option("--df-fraction", block_opts.cfg.df_fraction,
                    "Token document-frequency cutoff per source");
  block->add_option("--df-min-count", block_opts.cfg.df_min_count,
                    "Minimum count before the frequency cutoff applies");
  block->add_option("--max-block-size", block_opts.cfg.max_block_size,
                    "Skip blocks larger than this");
  block->add_option("--extra-stopwords", block_opts.extra_stopwords,
                    "Comma-separated stopwords on top of the bundled list");

  TrainOpts train_opts;
  CLI::App* train = app.add_subcommand("train", "Fit a model on a labeled feature CSV");
  train->add_option("--features", train_opts.features_path, "Labeled feature CSV")
      ->required();
  train->add_option("--method", train_opts.method, "transfer, pooled or indep")
      ->check(CLI::IsMember({"transfer", "pooled", "indep"}));
  double lambda_flag = 0.0;
  CLI::Option* lambda_opt =
      train->add_option("--lambda", lambda_flag, "L1 weight on the per-source vectors")
          ->check(CLI::NonNegativeNumber);
  train->add_flag("--cv", train_opts.cv, "Select lambda by cross-validation");
  train->add_option("--grid-points", train_opts.grid_points, "CV lambda grid size")
      ->check(CLI::PositiveNumber);
  train->add_option("--holdout-fraction", train_opts.holdout_fraction,
                    "CV holdout fraction per (pair,label) stratum");
  train->add_option("--folds", train_opts.folds, "CV folds (1 = single holdout)")
      ->check(CLI::PositiveNumber);
  train->add_flag("--standardize,!--no-standardize", train_opts.standardize,
                  "Standardize features on the training set (default on)");
  train->add_option("--sources", train_opts.declared_sources,
                    "Comma-separated declared source names; rows naming others fail");
  add_solver_flags(train, train_opts);

  TrainOpts cv_opts_cmd;
  cv_opts_cmd.cv = true;
  CLI::App* cv = app.add_subcommand(
      "cv", "Cross-validate the transfer model's lambda and refit");
  cv->add_option("--features", cv_opts_cmd.features_path, "Labeled feature CSV")
      ->required();
  cv->add_option("--grid-points", cv_opts_cmd.grid_points, "Lambda grid size")
      ->check(CLI::PositiveNumber);
  cv->add_option("--holdout-fraction", cv_opts_cmd.holdout_fraction,
                 "Holdout fraction per (pair,label) stratum");
  cv->add_option("--folds", cv_opts_cmd.folds, "CV folds (1 = single holdout)")
      ->check(CLI::PositiveNumber);
  cv->add_flag("--standardize,!--no-standardize", cv_opts_cmd.standardize,
               "Standardize features on the training set (default on)");
  cv->add_option("--sources", cv_opts_cmd.declared_sources,
                 "Comma-separated declared source names");
  add_solver_flags(cv, cv_opts_cmd);

  ScoreOpts score_opts;
  CLI::App* score = app.add_subcommand("score", "Score record pairs under a model");
  score->add_option("--model", score_opts.model_path, "Model JSON")->required();
  score->add_option("--features", score_opts.features_path, "Feature CSV")->required();
  score->add_option("--scaler", score_opts.scaler_path,
                    "Standardizer JSON fitted at training time");
  score->add_option("--out", score_opts.out_name, "Output scores CSV name");

  EvalOpts eval_opts;
  CLI::App* eval = app.add_subcommand("eval", "Precision/recall and test error");
  eval->add_option("--model", eval_opts.model_path, "Model JSON")->required();
  eval->add_option("--features", eval_opts.features_path, "Labeled feature CSV")
      ->required();
  eval->add_option("--scaler", eval_opts.scaler_path,
                   "Standardizer JSON fitted at training time");
  eval->add_option("--eval-pair", eval_opts.eval_pair,
                   "Restrict to one source pair, e.g. 'imdb,itunes'");
  eval->add_option("--tau", eval_opts.tau, "Decision threshold for the summary");
  double at_recall_flag = 0.85;
  CLI::Option* at_recall_opt = eval->add_option(
      "--at-recall", at_recall_flag, "Also report best precision at recall >= r0");

  ExperimentOpts exp_opts;
  CLI::App* experiment =
      app.add_subcommand("experiment", "Run a full study and write its report");
  experiment
      ->add_option("--family", exp_opts.family,
                   "sample-complexity, source-complexity, runtime, pr-grid or summary")
      ->required();
  experiment->add_option("--trials", exp_opts.plan.trials, "Trials per cell")
      ->check(CLI::PositiveNumber);
  experiment->add_option("--methods", exp_opts.methods,
                         "Comma-separated subset of transfer,pooled,indep");
  experiment->add_option("--budgets", exp_opts.budgets,
                         "Sample-complexity budgets (labels per source pair)");
  experiment->add_option("--n-list", exp_opts.n_list, "Source-complexity source counts");
  experiment->add_option("--labels-per-source", exp_opts.plan.labels_per_source,
                         "Labels contributed by each source in the source sweep")
      ->check(CLI::PositiveNumber);
  experiment->add_option("--runtime-budgets", exp_opts.runtime_budgets,
                         "Runtime-family budgets (labels per source pair)");
  experiment->add_flag("--no-cv", exp_opts.no_cv,
                       "Fix transfer's lambda to --lambda instead of per-trial CV");
  experiment->add_option("--lambda", exp_opts.plan.solver.lambda_a,
                         "Transfer lambda when CV is disabled")
      ->check(CLI::NonNegativeNumber);
  experiment->add_option("--grid-points", exp_opts.plan.cv_grid_points,
                         "CV lambda grid size")
      ->check(CLI::PositiveNumber);
  experiment->add_option("--records", exp_opts.plan.records_path,
                         "Records JSONL (pr-grid/summary families)");
  experiment->add_option("--labels", exp_opts.plan.labels_path,
                         "Labeled pairs CSV (pr-grid/summary families)");
  experiment->add_option("--eval-pair", exp_opts.eval_pair,
                         "Designated evaluation source pair 'a,b'");
  experiment->add_option("--eval-test-fraction", exp_opts.plan.eval_test_fraction,
                         "Eval-pair labels held out for testing");
  experiment->add_option("--at-recall", exp_opts.plan.at_recall,
                         "Recall floor for the precision summaries");
  experiment->add_option("--bootstrap-resamples", exp_opts.plan.bootstrap_resamples,
                         "Bootstrap resamples for single-trial bands")
      ->check(CLI::PositiveNumber);
  experiment->add_option("--tol", exp_opts.plan.solver.tol, "Solver stopping tolerance")
      ->check(CLI::NonNegativeNumber);
  experiment->add_option("--max-iters", exp_opts.plan.solver.max_iters,
                         "Solver iteration cap")
      ->check(CLI::PositiveNumber);
  add_synth_flags(experiment, exp_opts.plan.synth);

  try {
    app.parse(argc, argv);
    g.out_dir = resolve_out_dir(out_dir_flag);
    if (lambda_opt->count() > 0) train_opts.lambda = lambda_flag;
    if (at_recall_opt->count() > 0) eval_opts.at_recall = at_recall_flag;

    if (synth->parsed()) {
      run_synth(g, synth_opts);
    } else if (featurize->parsed()) {
      run_featurize(g, feat_opts);
    } else if (block->parsed()) {
      run_block(g, block_opts);
    } else if (train->parsed()) {
      run_train(g, train_opts, "train");
    } else if (cv->parsed()) {
      run_train(g, cv_opts_cmd, "cv");
    } else if (score->parsed()) {
      run_score(g, score_opts);
    } else if (eval->parsed()) {
      run_eval(g, eval_opts);
    } else if (experiment->parsed()) {
      run_experiment_cmd(g, exp_opts);
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ertl::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const ertl::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const ertl::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
