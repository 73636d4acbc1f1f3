#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "invlearn/error.hpp"
#include "invlearn/rng.hpp"

namespace invlearn {

/// One (user, item, label) observation; the atom of every dataset.
struct Interaction {
  std::int32_t user = 0;
  std::int32_t item = 0;
  std::int8_t label = 0;  // 0 or 1

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// A sampled user-item pair with no label attached.
struct UIPair {
  std::int32_t user = 0;
  std::int32_t item = 0;

  friend bool operator==(const UIPair&, const UIPair&) = default;
};

/// Membership set over (user, item) pairs.
class PairSet {
 public:
  static std::int64_t key(std::int32_t u, std::int32_t i) {
    return (static_cast<std::int64_t>(u) << 32) | static_cast<std::uint32_t>(i);
  }

  void insert(std::int32_t u, std::int32_t i) { set_.insert(key(u, i)); }
  bool contains(std::int32_t u, std::int32_t i) const { return set_.count(key(u, i)) != 0; }
  std::size_t size() const { return set_.size(); }

 private:
  std::unordered_set<std::int64_t> set_;
};

/// Labeled splits plus the membership index that defines the unlabeled
/// sampling domain (its complement in the num_users x num_items grid).
struct DatasetBundle {
  std::int32_t num_users = 0;
  std::int32_t num_items = 0;
  std::vector<Interaction> train_train;
  std::vector<Interaction> train_test;
  std::vector<Interaction> validation;
  std::vector<Interaction> test;
  PairSet labeled_index;
};

/// Deterministic oracle for the true label of any pair. Synthetic bundles
/// carry the generating factors; re-ingested ground truth uses a table.
struct GroundTruth {
  std::int32_t num_users = 0;
  std::int32_t num_items = 0;
  std::int32_t latent_dim = 0;
  std::vector<double> user_factors;  // row-major num_users x latent_dim
  std::vector<double> item_factors;  // row-major num_items x latent_dim
  double threshold = 0.0;
  bool use_table = false;
  std::unordered_map<std::int64_t, std::int8_t> table;

  int label(std::int32_t u, std::int32_t i) const {
    if (use_table) {
      const auto it = table.find(PairSet::key(u, i));
      if (it == table.end()) throw IndexError("ground truth: pair not in table");
      return it->second;
    }
    if (u < 0 || u >= num_users || i < 0 || i >= num_items)
      throw IndexError("ground truth: pair outside grid");
    double dot = 0.0;
    for (std::int32_t k = 0; k < latent_dim; ++k)
      dot += user_factors[static_cast<std::size_t>(u) * latent_dim + k] *
             item_factors[static_cast<std::size_t>(i) * latent_dim + k];
    return dot > threshold ? 1 : 0;
  }
};

struct LoadedRatings {
  std::int32_t num_users = 0;
  std::int32_t num_items = 0;
  std::vector<Interaction> interactions;
};

namespace detail {

inline bool parse_int(const std::string& s, long& out) {
  if (s.empty()) return false;
  std::size_t pos = 0;
  try {
    out = std::stol(s, &pos);
  } catch (const std::exception&) {
    return false;
  }
  return pos == s.size();
}

}  // namespace detail

/// Loads `user::item::rating::timestamp` lines. Ratings >= pos_threshold map
/// to label 1, ratings <= neg_threshold to label 0, everything else is
/// dropped. Users and items are densely re-indexed from 0 in order of first
/// appearance among the kept rows.
inline LoadedRatings load_movielens(const std::string& path, int pos_threshold = 4,
                                    int neg_threshold = 2) {
  if (neg_threshold >= pos_threshold)
    throw ConfigError("neg_threshold must be below pos_threshold");
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);

  LoadedRatings out;
  std::unordered_map<long, std::int32_t> user_ids, item_ids;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::array<std::string, 4> fields;
    std::size_t start = 0;
    int nfields = 0;
    while (nfields < 4) {
      const std::size_t sep = line.find("::", start);
      if (sep == std::string::npos) {
        fields[nfields++] = line.substr(start);
        start = line.size();
        break;
      }
      fields[nfields++] = line.substr(start, sep - start);
      start = sep + 2;
    }
    long user = 0, item = 0, rating = 0, timestamp = 0;
    const bool ok = nfields == 4 && start >= line.size() &&
                    detail::parse_int(fields[0], user) && detail::parse_int(fields[1], item) &&
                    detail::parse_int(fields[2], rating) && detail::parse_int(fields[3], timestamp) &&
                    rating >= 1 && rating <= 5;
    if (!ok) throw ParseError(path + ": malformed row at line " + std::to_string(line_no));

    std::int8_t label;
    if (rating >= pos_threshold)
      label = 1;
    else if (rating <= neg_threshold)
      label = 0;
    else
      continue;

    const auto uid = user_ids.try_emplace(user, static_cast<std::int32_t>(user_ids.size())).first->second;
    const auto iid = item_ids.try_emplace(item, static_cast<std::int32_t>(item_ids.size())).first->second;
    out.interactions.push_back({uid, iid, label});
  }
  if (out.interactions.empty()) throw DataError(path + ": no interaction passed the thresholds");
  out.num_users = static_cast<std::int32_t>(user_ids.size());
  out.num_items = static_cast<std::int32_t>(item_ids.size());
  return out;
}

/// Shuffles under the seed, then slices contiguously. The first two splits
/// get the floor of their share; the remainder goes to the last split.
inline std::array<std::vector<Interaction>, 3> split_dataset(std::vector<Interaction> interactions,
                                                             std::array<double, 3> ratios,
                                                             std::uint64_t seed) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::fabs(sum - 1.0) > 1e-9)
    throw ConfigError("split ratios must sum to 1, got " + std::to_string(sum));
  if (interactions.empty()) throw DataError("split_dataset: empty interaction list");

  Rng rng(seed);
  rng.shuffle(interactions);
  const auto n = interactions.size();
  const auto n0 = static_cast<std::size_t>(std::floor(ratios[0] * static_cast<double>(n) + 1e-9));
  const auto n1 = static_cast<std::size_t>(std::floor(ratios[1] * static_cast<double>(n) + 1e-9));

  std::array<std::vector<Interaction>, 3> out;
  out[0].assign(interactions.begin(), interactions.begin() + n0);
  out[1].assign(interactions.begin() + n0, interactions.begin() + n0 + n1);
  out[2].assign(interactions.begin() + n0 + n1, interactions.end());
  return out;
}

/// 90/10-style sub-split of the training data; both halves are nonempty.
inline std::pair<std::vector<Interaction>, std::vector<Interaction>> split_train(
    std::vector<Interaction> train, double train_ratio, std::uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0))
    throw ConfigError("train_ratio must lie in (0, 1)");
  if (train.size() < 2) throw DataError("split_train: need at least 2 interactions");

  Rng rng(seed);
  rng.shuffle(train);
  auto k = static_cast<std::size_t>(
      std::floor(train_ratio * static_cast<double>(train.size()) + 1e-9));
  k = std::clamp<std::size_t>(k, 1, train.size() - 1);

  std::vector<Interaction> head(train.begin(), train.begin() + k);
  std::vector<Interaction> tail(train.begin() + k, train.end());
  return {std::move(head), std::move(tail)};
}

/// Uniform rejection sampling of pairs outside labeled_index; pairs are
/// distinct within one call, independent across calls.
inline std::vector<UIPair> sample_unlabeled(std::int32_t num_users, std::int32_t num_items,
                                            const PairSet& labeled_index, std::size_t count,
                                            std::uint64_t seed) {
  if (count < 1) throw ConfigError("sample_unlabeled: count must be >= 1");
  const std::int64_t grid = static_cast<std::int64_t>(num_users) * num_items;
  const std::int64_t available = grid - static_cast<std::int64_t>(labeled_index.size());
  if (available < static_cast<std::int64_t>(count))
    throw DataError("sample_unlabeled: only " + std::to_string(available) +
                    " unlabeled pairs exist, " + std::to_string(count) + " requested");

  Rng rng(seed);
  std::unordered_set<std::int64_t> used;
  std::vector<UIPair> out;
  out.reserve(count);
  while (out.size() < count) {
    const auto u = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(num_users)));
    const auto i = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(num_items)));
    if (labeled_index.contains(u, i)) continue;
    if (!used.insert(PairSet::key(u, i)).second) continue;
    out.push_back({u, i});
  }
  return out;
}

/// Synthesizes a positive-unlabeled dataset with a known oracle. Latent
/// factors are standard Gaussian; the oracle labels a pair positive when its
/// latent dot product exceeds the grid median, so the classes are balanced
/// regardless of factor scale. A label_density fraction of the grid is
/// revealed, each revealed label flipped independently with flip_rate.
inline std::pair<DatasetBundle, GroundTruth> generate_synthetic(std::int32_t num_users,
                                                                std::int32_t num_items,
                                                                std::int32_t latent_dim,
                                                                double label_density,
                                                                double flip_rate,
                                                                std::uint64_t seed) {
  if (!(label_density > 0.0 && label_density <= 1.0))
    throw ConfigError("label_density must lie in (0, 1]");
  if (!(flip_rate >= 0.0 && flip_rate < 0.5)) throw ConfigError("flip_rate must lie in [0, 0.5)");
  if (num_users < 1 || num_items < 1 || latent_dim < 1)
    throw ConfigError("synthetic grid dimensions must be positive");

  GroundTruth truth;
  truth.num_users = num_users;
  truth.num_items = num_items;
  truth.latent_dim = latent_dim;
  truth.user_factors.resize(static_cast<std::size_t>(num_users) * latent_dim);
  truth.item_factors.resize(static_cast<std::size_t>(num_items) * latent_dim);
  {
    Rng rng(derive_seed(seed, 1));
    for (auto& v : truth.user_factors) v = rng.gaussian();
    for (auto& v : truth.item_factors) v = rng.gaussian();
  }

  const std::size_t grid = static_cast<std::size_t>(num_users) * num_items;
  std::vector<double> dots(grid);
  for (std::int32_t u = 0; u < num_users; ++u)
    for (std::int32_t i = 0; i < num_items; ++i) {
      double d = 0.0;
      for (std::int32_t k = 0; k < latent_dim; ++k)
        d += truth.user_factors[static_cast<std::size_t>(u) * latent_dim + k] *
             truth.item_factors[static_cast<std::size_t>(i) * latent_dim + k];
      dots[static_cast<std::size_t>(u) * num_items + i] = d;
    }
  {
    std::vector<double> sorted = dots;
    const std::size_t mid = (sorted.size() - 1) / 2;
    std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
    truth.threshold = sorted[mid];
  }

  // Reveal pairs: rejection sampling when sparse, partial shuffle when dense.
  std::size_t reveal = static_cast<std::size_t>(
      std::llround(label_density * static_cast<double>(grid)));
  reveal = std::clamp<std::size_t>(reveal, 1, grid);
  std::vector<std::size_t> revealed;
  revealed.reserve(reveal);
  {
    Rng rng(derive_seed(seed, 2));
    if (reveal * 2 <= grid) {
      std::unordered_set<std::size_t> used;
      while (revealed.size() < reveal) {
        const auto idx = static_cast<std::size_t>(rng.below(grid));
        if (used.insert(idx).second) revealed.push_back(idx);
      }
    } else {
      std::vector<std::size_t> all(grid);
      for (std::size_t i = 0; i < grid; ++i) all[i] = i;
      for (std::size_t i = 0; i < reveal; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(grid - i));
        std::swap(all[i], all[j]);
        revealed.push_back(all[i]);
      }
    }
  }

  std::vector<Interaction> labeled;
  labeled.reserve(reveal);
  {
    Rng rng(derive_seed(seed, 3));
    for (const std::size_t idx : revealed) {
      const auto u = static_cast<std::int32_t>(idx / num_items);
      const auto i = static_cast<std::int32_t>(idx % num_items);
      auto label = static_cast<std::int8_t>(dots[idx] > truth.threshold ? 1 : 0);
      if (flip_rate > 0.0 && rng.bernoulli(flip_rate)) label = label == 1 ? 0 : 1;
      labeled.push_back({u, i, label});
    }
  }

  DatasetBundle bundle;
  bundle.num_users = num_users;
  bundle.num_items = num_items;
  for (const auto& it : labeled) bundle.labeled_index.insert(it.user, it.item);

  auto splits = split_dataset(std::move(labeled), {0.6, 0.2, 0.2}, derive_seed(seed, 4));
  bundle.validation = std::move(splits[1]);
  bundle.test = std::move(splits[2]);
  if (splits[0].size() < 2 || bundle.validation.empty() || bundle.test.empty())
    throw DataError("generate_synthetic: label_density too low for nonempty splits");
  std::tie(bundle.train_train, bundle.train_test) =
      split_train(std::move(splits[0]), 0.9, derive_seed(seed, 5));
  return {std::move(bundle), std::move(truth)};
}

/// Splits a flat interaction list into a bundle (60/20/20 then 90/10).
inline DatasetBundle make_bundle(std::int32_t num_users, std::int32_t num_items,
                                 std::vector<Interaction> interactions, std::uint64_t seed,
                                 std::array<double, 3> ratios = {0.6, 0.2, 0.2},
                                 double train_ratio = 0.9) {
  DatasetBundle bundle;
  bundle.num_users = num_users;
  bundle.num_items = num_items;
  for (const auto& it : interactions) bundle.labeled_index.insert(it.user, it.item);

  auto splits = split_dataset(std::move(interactions), ratios, derive_seed(seed, 4));
  bundle.validation = std::move(splits[1]);
  bundle.test = std::move(splits[2]);
  if (splits[0].size() < 2 || bundle.validation.empty() || bundle.test.empty())
    throw DataError("make_bundle: dataset too small for nonempty splits");
  std::tie(bundle.train_train, bundle.train_test) =
      split_train(std::move(splits[0]), train_ratio, derive_seed(seed, 5));
  return bundle;
}

}  // namespace invlearn
