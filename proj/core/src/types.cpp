#include "ertl/types.hpp"

#include <stdexcept>
#include <string>

namespace ertl {

SourcePair SourcePair::of(int i, int j) {
  if (i < 0 || j < 0) {
    throw std::invalid_argument("SourcePair: negative source index " +
                                std::to_string(i < 0 ? i : j));
  }
  if (i == j) {
    throw std::invalid_argument("SourcePair: indices must differ, got (" +
                                std::to_string(i) + ", " + std::to_string(j) + ")");
  }
  SourcePair p;
  p.a = i < j ? i : j;
  p.b = i < j ? j : i;
  return p;
}

int canonical_label(int raw) {
  switch (raw) {
    case 0:
    case -1:
      return -1;
    case 1:
      return +1;
    default:
      throw std::invalid_argument("label must be 0/1 or -1/+1, got " +
                                  std::to_string(raw));
  }
}

}  // namespace ertl
