#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <tuple>

#include "invlearn/data.hpp"

using namespace invlearn;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

std::multiset<std::tuple<int, int, int>> as_multiset(const std::vector<Interaction>& v) {
  std::multiset<std::tuple<int, int, int>> s;
  for (const auto& it : v) s.insert({it.user, it.item, it.label});
  return s;
}

}  // namespace

TEST_CASE("movielens loader applies thresholds and dense re-indexing", "[data]") {
  const auto path = write_temp("invlearn_ml_ok.dat",
                               "1::1193::5::978300760\n"
                               "1::661::3::978302109\n"
                               "2::1193::1::978301968\n"
                               "2::914::3::978301368\n"
                               "3::1193::4::978300275\n"
                               "3::2355::2::978824291\n");
  const auto loaded = load_movielens(path);
  // ratings {5,3,1,3,4,2} -> kept {5,1,4,2} with labels {1,0,1,0}
  REQUIRE(loaded.interactions.size() == 4);
  CHECK(loaded.interactions[0] == Interaction{0, 0, 1});  // first kept row defines index 0
  CHECK(loaded.interactions[1] == Interaction{1, 0, 0});
  CHECK(loaded.interactions[2] == Interaction{2, 0, 1});
  CHECK(loaded.interactions[3] == Interaction{2, 1, 0});
  CHECK(loaded.num_users == 3);
  CHECK(loaded.num_items == 2);  // the rating-3 items never got an index
}

TEST_CASE("movielens loader error paths", "[data]") {
  const auto bad = write_temp("invlearn_ml_bad.dat", "1::1193::5::978300760\n1::713::six::1\n");
  try {
    load_movielens(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  const auto empty = write_temp("invlearn_ml_empty.dat", "1::1::3::5\n");
  CHECK_THROWS_AS(load_movielens(empty), DataError);  // every row dropped
  CHECK_THROWS_AS(load_movielens("/nonexistent/no.dat"), IoError);
}

TEST_CASE("split_dataset sizes and determinism", "[data]") {
  std::vector<Interaction> data;
  for (int i = 0; i < 10; ++i) data.push_back({i, i, static_cast<std::int8_t>(i % 2)});

  auto s10 = split_dataset(data, {0.6, 0.2, 0.2}, 42);
  CHECK(s10[0].size() == 6);
  CHECK(s10[1].size() == 2);
  CHECK(s10[2].size() == 2);

  data.resize(7);
  auto s7 = split_dataset(data, {0.6, 0.2, 0.2}, 42);
  CHECK(s7[0].size() == 4);
  CHECK(s7[1].size() == 1);
  CHECK(s7[2].size() == 2);  // remainder goes to the last split

  auto again = split_dataset(data, {0.6, 0.2, 0.2}, 42);
  CHECK(again[0] == s7[0]);
  CHECK(again[1] == s7[1]);
  CHECK(again[2] == s7[2]);

  CHECK_THROWS_AS(split_dataset(data, {0.5, 0.2, 0.2}, 1), ConfigError);
  CHECK_THROWS_AS(split_dataset({}, {0.6, 0.2, 0.2}, 1), DataError);
}

TEST_CASE("splits partition the input for random sizes and seeds", "[data]") {
  Rng rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    const auto n = 3 + rng.below(400);
    std::vector<Interaction> data;
    for (std::size_t i = 0; i < n; ++i)
      data.push_back({static_cast<std::int32_t>(i), static_cast<std::int32_t>(rng.below(50)),
                      static_cast<std::int8_t>(rng.below(2))});
    const auto seed = rng.next();
    auto s = split_dataset(data, {0.6, 0.2, 0.2}, seed);
    CHECK(s[0].size() == 3 * n / 5);  // exact rational floor
    CHECK(s[1].size() == n / 5);
    CHECK(s[0].size() + s[1].size() + s[2].size() == n);

    auto merged = s[0];
    merged.insert(merged.end(), s[1].begin(), s[1].end());
    merged.insert(merged.end(), s[2].begin(), s[2].end());
    CHECK(as_multiset(merged) == as_multiset(data));
  }
}

TEST_CASE("split_train floor rule and degenerate input", "[data]") {
  std::vector<Interaction> train(100);
  auto [tt, ts] = split_train(train, 0.9, 7);
  CHECK(tt.size() == 90);
  CHECK(ts.size() == 10);

  train.resize(10);
  std::tie(tt, ts) = split_train(train, 0.9, 7);
  CHECK(tt.size() == 9);
  CHECK(ts.size() == 1);

  train.resize(2);
  std::tie(tt, ts) = split_train(train, 0.99, 7);
  CHECK(tt.size() == 1);  // clamped so both halves stay nonempty
  CHECK(ts.size() == 1);

  train.resize(1);
  CHECK_THROWS_AS(split_train(train, 0.9, 7), DataError);
  train.resize(5);
  CHECK_THROWS_AS(split_train(train, 1.0, 7), ConfigError);
}

TEST_CASE("sample_unlabeled avoids labeled pairs and is exhaustive-aware", "[data]") {
  PairSet labeled;
  labeled.insert(0, 0);
  labeled.insert(0, 1);
  labeled.insert(1, 0);
  const auto only = sample_unlabeled(2, 2, labeled, 1, 3);
  REQUIRE(only.size() == 1);
  CHECK(only[0] == UIPair{1, 1});

  labeled.insert(1, 1);
  CHECK_THROWS_AS(sample_unlabeled(2, 2, labeled, 1, 3), DataError);
}

TEST_CASE("sample_unlabeled membership, distinctness, determinism", "[data]") {
  Rng rng(5);
  PairSet labeled;
  std::size_t inserted = 0;
  while (inserted < 50) {
    const auto u = static_cast<std::int32_t>(rng.below(100));
    const auto i = static_cast<std::int32_t>(rng.below(100));
    if (!labeled.contains(u, i)) {
      labeled.insert(u, i);
      ++inserted;
    }
  }
  const auto batch = sample_unlabeled(100, 100, labeled, 1024, 17);
  REQUIRE(batch.size() == 1024);
  PairSet seen;
  for (const auto& p : batch) {
    CHECK_FALSE(labeled.contains(p.user, p.item));
    CHECK_FALSE(seen.contains(p.user, p.item));
    seen.insert(p.user, p.item);
  }
  CHECK(sample_unlabeled(100, 100, labeled, 1024, 17) == batch);
}

TEST_CASE("synthetic generator: oracle agreement, coverage, balance", "[data]") {
  SECTION("flip_rate 0 means labels agree with the oracle") {
    auto [bundle, truth] = generate_synthetic(40, 40, 4, 0.3, 0.0, 11);
    for (const auto* split :
         {&bundle.train_train, &bundle.train_test, &bundle.validation, &bundle.test})
      for (const auto& it : *split) CHECK(static_cast<int>(it.label) == truth.label(it.user, it.item));
  }

  SECTION("density 1 covers the whole grid") {
    auto [bundle, truth] = generate_synthetic(12, 9, 3, 1.0, 0.0, 2);
    CHECK(bundle.labeled_index.size() == 12u * 9u);
    const std::size_t total = bundle.train_train.size() + bundle.train_test.size() +
                              bundle.validation.size() + bundle.test.size();
    CHECK(total == 12u * 9u);
  }

  SECTION("counts and class balance at density 0.05") {
    auto [bundle, truth] = generate_synthetic(200, 200, 8, 0.05, 0.0, 23);
    const std::size_t total = bundle.train_train.size() + bundle.train_test.size() +
                              bundle.validation.size() + bundle.test.size();
    CHECK(total == 2000);
    std::size_t positives = 0;
    for (const auto* split :
         {&bundle.train_train, &bundle.train_test, &bundle.validation, &bundle.test})
      for (const auto& it : *split) positives += static_cast<std::size_t>(it.label == 1);
    CHECK(std::fabs(static_cast<double>(positives) / 2000.0 - 0.5) < 0.05);
  }

  SECTION("oracle is balanced within 2% over the grid") {
    auto [bundle, truth] = generate_synthetic(100, 100, 6, 0.02, 0.0, 31);
    std::size_t positives = 0;
    for (std::int32_t u = 0; u < 100; ++u)
      for (std::int32_t i = 0; i < 100; ++i) positives += static_cast<std::size_t>(truth.label(u, i));
    CHECK(std::fabs(static_cast<double>(positives) / 10000.0 - 0.5) < 0.02);
  }

  SECTION("flip_rate flips roughly that fraction") {
    auto [bundle, truth] = generate_synthetic(100, 100, 6, 0.3, 0.1, 37);
    std::size_t flipped = 0, total = 0;
    for (const auto* split :
         {&bundle.train_train, &bundle.train_test, &bundle.validation, &bundle.test})
      for (const auto& it : *split) {
        ++total;
        flipped += static_cast<std::size_t>(static_cast<int>(it.label) != truth.label(it.user, it.item));
      }
    CHECK(std::fabs(static_cast<double>(flipped) / static_cast<double>(total) - 0.1) < 0.01);
  }

  SECTION("equal seeds reproduce bitwise") {
    auto [b1, t1] = generate_synthetic(30, 30, 4, 0.2, 0.2, 5);
    auto [b2, t2] = generate_synthetic(30, 30, 4, 0.2, 0.2, 5);
    CHECK(b1.train_train == b2.train_train);
    CHECK(b1.train_test == b2.train_test);
    CHECK(b1.validation == b2.validation);
    CHECK(b1.test == b2.test);
    CHECK(t1.user_factors == t2.user_factors);
    CHECK(t1.threshold == t2.threshold);
  }

  SECTION("degenerate configs throw") {
    CHECK_THROWS_AS(generate_synthetic(10, 10, 2, 0.0, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(generate_synthetic(10, 10, 2, 0.5, 0.5, 1), ConfigError);
    CHECK_THROWS_AS(generate_synthetic(4, 4, 2, 0.07, 0.0, 1), DataError);  // 1 labeled row
  }
}

TEST_CASE("bundle splits are disjoint and indexed", "[data]") {
  auto [bundle, truth] = generate_synthetic(50, 50, 4, 0.15, 0.1, 13);
  std::set<std::pair<int, int>> seen;
  std::size_t total = 0;
  for (const auto* split :
       {&bundle.train_train, &bundle.train_test, &bundle.validation, &bundle.test})
    for (const auto& it : *split) {
      ++total;
      seen.insert({it.user, it.item});
      CHECK(bundle.labeled_index.contains(it.user, it.item));
    }
  CHECK(seen.size() == total);  // pairwise disjoint as pairs
  CHECK(bundle.labeled_index.size() == total);
}
