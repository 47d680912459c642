#include "ertl/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "ertl/errors.hpp"

namespace ertl {

namespace {

std::string clean_text(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      pending_space = true;  // punctuation and whitespace both separate tokens
    }
  }
  return out;
}

std::vector<std::string> clean_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  out.reserve(items.size());
  for (const auto& s : items) {
    std::string c = clean_text(s);
    if (!c.empty()) out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::string> sorted_unique(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<double> to_double(std::optional<int> v) {
  if (!v) return std::nullopt;
  return static_cast<double>(*v);
}

}  // namespace

std::vector<std::string> FeatureSpec::names() const {
  std::vector<std::string> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(f.name);
  return out;
}

FeatureSpec FeatureSpec::movie() {
  FeatureSpec spec;
  spec.features = {
      {"title_jaccard", FeatureKind::kJaccardTitle, -1},
      {"cast_jaccard", FeatureKind::kJaccardCast, -1},
      {"directors_jaccard", FeatureKind::kJaccardDirectors, -1},
      {"year_absdiff", FeatureKind::kAbsDiffYear, -1},
      {"runtime_absdiff", FeatureKind::kAbsDiffRuntime, -1},
  };
  return spec;
}

FeatureSpec FeatureSpec::numeric(int n_attrs) {
  if (n_attrs <= 0) throw std::invalid_argument("numeric feature spec needs n_attrs > 0");
  FeatureSpec spec;
  spec.features.reserve(n_attrs);
  for (int i = 0; i < n_attrs; ++i) {
    spec.features.push_back(
        {"attr" + std::to_string(i) + "_absdiff", FeatureKind::kAbsDiffAttr, i});
  }
  return spec;
}

RawRecord normalize_record(const RawRecord& r) {
  RawRecord out = r;
  out.title = clean_text(r.title);
  if (out.title.empty()) {
    throw ValidationError("record " + r.id + ": title is empty after cleanup");
  }
  out.alt_titles = clean_list(r.alt_titles);
  out.cast = clean_list(r.cast);
  out.directors = clean_list(r.directors);
  return out;
}

std::vector<std::string> title_tokens(const RawRecord& r) {
  std::vector<std::string> tokens = split_tokens(r.title);
  for (const auto& alt : r.alt_titles) {
    auto extra = split_tokens(alt);
    tokens.insert(tokens.end(), extra.begin(), extra.end());
  }
  return sorted_unique(std::move(tokens));
}

double jaccard(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t i = 0, j = 0, both = 0;
  while (i < a.size() && j < b.size()) {
    const int cmp = a[i].compare(b[j]);
    if (cmp < 0) {
      ++i;
    } else if (cmp > 0) {
      ++j;
    } else {
      ++both;
      ++i;
      ++j;
    }
  }
  const std::size_t either = a.size() + b.size() - both;
  return static_cast<double>(both) / static_cast<double>(either);
}

double absdiff_score(std::optional<double> a, std::optional<double> b) {
  if (!a || !b) return 0.0;
  return -std::fabs(*a - *b);
}

FeatureVector featurize_pair(const RawRecord& r1, const RawRecord& r2,
                             const FeatureSpec& spec) {
  FeatureVector out;
  out.reserve(spec.features.size());
  for (const auto& f : spec.features) {
    switch (f.kind) {
      case FeatureKind::kJaccardTitle:
        out.push_back(jaccard(title_tokens(r1), title_tokens(r2)));
        break;
      case FeatureKind::kJaccardCast:
        out.push_back(jaccard(sorted_unique(r1.cast), sorted_unique(r2.cast)));
        break;
      case FeatureKind::kJaccardDirectors:
        out.push_back(jaccard(sorted_unique(r1.directors), sorted_unique(r2.directors)));
        break;
      case FeatureKind::kAbsDiffYear:
        out.push_back(absdiff_score(to_double(r1.year), to_double(r2.year)));
        break;
      case FeatureKind::kAbsDiffRuntime:
        out.push_back(absdiff_score(to_double(r1.runtime), to_double(r2.runtime)));
        break;
      case FeatureKind::kAbsDiffAttr: {
        const int t = f.attr_index;
        if (t < 0 || t >= static_cast<int>(r1.attrs.size()) ||
            t >= static_cast<int>(r2.attrs.size())) {
          throw ValidationError("feature " + f.name + ": records lack attribute " +
                                std::to_string(t));
        }
        out.push_back(-std::fabs(r1.attrs[t] - r2.attrs[t]));
        break;
      }
    }
  }
  return out;
}

FeatureVector Standardizer::apply(std::span<const double> v) const {
  if (v.size() != means.size()) {
    throw ValidationError("standardizer: vector length " + std::to_string(v.size()) +
                          " does not match fitted dimension " +
                          std::to_string(means.size()));
  }
  FeatureVector out(v.size());
  for (std::size_t t = 0; t < v.size(); ++t) out[t] = (v[t] - means[t]) / stds[t];
  return out;
}

FeatureVector Standardizer::unapply(std::span<const double> v) const {
  if (v.size() != means.size()) {
    throw ValidationError("standardizer: vector length " + std::to_string(v.size()) +
                          " does not match fitted dimension " +
                          std::to_string(means.size()));
  }
  FeatureVector out(v.size());
  for (std::size_t t = 0; t < v.size(); ++t) out[t] = v[t] * stds[t] + means[t];
  return out;
}

Standardizer fit_standardizer(std::span<const FeatureVector> vectors) {
  if (vectors.empty()) {
    throw std::invalid_argument("fit_standardizer: empty fit set");
  }
  const std::size_t d = vectors.front().size();
  for (const auto& v : vectors) {
    if (v.size() != d) {
      throw ValidationError("fit_standardizer: mixed vector lengths");
    }
  }
  Standardizer s;
  s.means.assign(d, 0.0);
  s.stds.assign(d, 0.0);
  const double n = static_cast<double>(vectors.size());
  for (const auto& v : vectors) {
    for (std::size_t t = 0; t < d; ++t) s.means[t] += v[t];
  }
  for (std::size_t t = 0; t < d; ++t) s.means[t] /= n;
  for (const auto& v : vectors) {
    for (std::size_t t = 0; t < d; ++t) {
      const double c = v[t] - s.means[t];
      s.stds[t] += c * c;
    }
  }
  for (std::size_t t = 0; t < d; ++t) {
    s.stds[t] = std::sqrt(s.stds[t] / n);
    if (s.stds[t] == 0.0) s.stds[t] = 1.0;
  }
  return s;
}

}  // namespace ertl
