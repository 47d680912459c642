#include "ertl/dataset.hpp"

#include <cmath>
#include <string>

#include "ertl/errors.hpp"

namespace ertl {

void Dataset::validate() const {
  if (dim <= 0) throw ValidationError("dataset: dim must be positive");
  if (!feature_names.empty() && static_cast<int>(feature_names.size()) != dim) {
    throw ValidationError("dataset: feature_names size " +
                          std::to_string(feature_names.size()) +
                          " does not match dim " + std::to_string(dim));
  }
  const int n = n_sources();
  for (std::size_t k = 0; k < examples.size(); ++k) {
    const auto& ex = examples[k];
    if (static_cast<int>(ex.x.size()) != dim) {
      throw ValidationError("dataset: example " + std::to_string(k) +
                            " has dimension " + std::to_string(ex.x.size()) +
                            ", expected " + std::to_string(dim));
    }
    if (ex.pair.a < 0 || ex.pair.b >= n || ex.pair.a >= ex.pair.b) {
      throw ValidationError("dataset: example " + std::to_string(k) +
                            " references invalid source pair (" +
                            std::to_string(ex.pair.a) + ", " +
                            std::to_string(ex.pair.b) + ") with " +
                            std::to_string(n) + " sources");
    }
    if (ex.y != 1 && ex.y != -1) {
      throw ValidationError("dataset: example " + std::to_string(k) +
                            " has label " + std::to_string(ex.y));
    }
    for (double v : ex.x) {
      if (!std::isfinite(v)) {
        throw ValidationError("dataset: example " + std::to_string(k) +
                              " has a non-finite feature");
      }
    }
  }
}

}  // namespace ertl
