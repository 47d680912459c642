#include "ertl/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ertl/errors.hpp"

namespace ertl {

std::vector<double> TransferModel::combined_weight(SourcePair pair) const {
  const int n = n_sources();
  if (pair.b >= n || pair.a < 0) {
    throw std::out_of_range("combined_weight: source index " +
                            std::to_string(pair.b) + " out of range for " +
                            std::to_string(n) + " sources");
  }
  const auto& wi = w[pair.a];
  const auto& wj = w[pair.b];
  std::vector<double> out(dim);
  for (int t = 0; t < dim; ++t) out[t] = w0[t] + 0.5 * (wi[t] + wj[t]);
  return out;
}

double TransferModel::score(SourcePair pair, std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim) {
    throw ValidationError("score: feature dimension " + std::to_string(x.size()) +
                          " does not match model dimension " + std::to_string(dim));
  }
  const int n = n_sources();
  if (pair.b >= n || pair.a < 0) {
    throw std::out_of_range("score: source index " + std::to_string(pair.b) +
                            " out of range for " + std::to_string(n) + " sources");
  }
  const auto& wi = w[pair.a];
  const auto& wj = w[pair.b];
  double s = 0.0;
  for (int t = 0; t < dim; ++t) s += (w0[t] + 0.5 * (wi[t] + wj[t])) * x[t];
  return s;
}

void TransferModel::validate() const {
  if (dim <= 0) throw ValidationError("model: dim must be positive");
  if (static_cast<int>(w0.size()) != dim) {
    throw ValidationError("model: w0 has length " + std::to_string(w0.size()) +
                          ", expected " + std::to_string(dim));
  }
  if (!feature_names.empty() && static_cast<int>(feature_names.size()) != dim) {
    throw ValidationError("model: feature_names length does not match dim");
  }
  if (w.size() != sources.size()) {
    throw ValidationError("model: " + std::to_string(w.size()) +
                          " source vectors for " + std::to_string(sources.size()) +
                          " sources");
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (static_cast<int>(w[i].size()) != dim) {
      throw ValidationError("model: w[" + std::to_string(i) + "] has length " +
                            std::to_string(w[i].size()) + ", expected " +
                            std::to_string(dim));
    }
    if (sources[i].empty()) {
      throw ValidationError("model: source " + std::to_string(i) + " has empty name");
    }
    for (double v : w[i]) {
      if (!std::isfinite(v)) {
        throw ValidationError("model: non-finite entry in w[" + std::to_string(i) + "]");
      }
    }
  }
  for (double v : w0) {
    if (!std::isfinite(v)) throw ValidationError("model: non-finite entry in w0");
  }
  if (!std::isfinite(lambda_a) || lambda_a < 0) {
    throw ValidationError("model: lambda_a must be a nonnegative finite value");
  }
}

void save_model(const TransferModel& model, const std::string& path) {
  model.validate();
  nlohmann::ordered_json j;
  j["d"] = model.dim;
  j["feature_names"] = model.feature_names;
  j["sources"] = model.sources;
  j["w0"] = model.w0;
  j["w"] = model.w;
  j["lambda_a"] = model.lambda_a;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed for " + path);
}

TransferModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model file " + path + ": " + e.what());
  }
  TransferModel m;
  try {
    m.dim = j.at("d").get<int>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.sources = j.at("sources").get<std::vector<std::string>>();
    m.w0 = j.at("w0").get<std::vector<double>>();
    m.w = j.at("w").get<std::vector<std::vector<double>>>();
    m.lambda_a = j.at("lambda_a").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model file " + path + ": " + e.what());
  }
  try {
    m.validate();
  } catch (const ValidationError& e) {
    throw ValidationError("model file " + path + ": " + e.what());
  }
  return m;
}

}  // namespace ertl
