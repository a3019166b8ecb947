// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "dam/composer.hpp"
#include "dam/error.hpp"
#include "dam/evaluation.hpp"
#include "dam/trainer.hpp"
#include "oracles/regmean_lstsq.hpp"
#include "support.hpp"

using namespace dam;

namespace {

ParameterBundle single(float v) {
  ParameterBundle b;
  b.insert("w", DenseArray::vector({v}));
  return b;
}

AdapterBank bank_of(std::initializer_list<float> values) {
  AdapterBank bank;
  for (float v : values) bank.append(single(v));
  return bank;
}

ParameterBundle random_bundle(std::mt19937_64& rng) {
  ParameterBundle b;
  b.insert("a", testing::random_array(rng, {3, 4}));
  b.insert("b", testing::random_array(rng, {5}));
  return b;
}

Eigen::MatrixXd to_eigen(const DenseArray& a) {
  Eigen::MatrixXd m(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) m(r, c) = a.at(r, c);
  return m;
}

// Shared trained state over the small separated suite.
const TrainerState& trained() {
  static const TrainerState state = [] {
    TrainConfig tc;
    tc.learning_rate = 3e-3;
    return run_sequence(testing::small_backbone(), testing::small_large_gap(), tc, ComposerConfig{});
  }();
  return state;
}

}  // namespace

TEST_CASE("weighted merge of scalar adapters") {
  const auto bank = bank_of({2, 6});
  CHECK(dynamic_merge(bank, std::vector<double>{0.25, 0.75}).get("w")[0] == 5.0f);
  CHECK(static_average(bank).get("w")[0] == 4.0f);
  CHECK(argmax_select(bank, std::vector<double>{0.5, 0.5}).get("w")[0] == 2.0f);
  CHECK(argmax_select(bank, std::vector<double>{0.4, 0.6}).get("w")[0] == 6.0f);
}

TEST_CASE("merge contract violations") {
  const auto bank = bank_of({1, 2, 3});
  CHECK_THROWS_AS(dynamic_merge(bank, std::vector<double>{0.5, 0.5}), ContractError);
  CHECK_THROWS_AS(dynamic_merge(bank, std::vector<double>{0.5, 0.6, -0.1}), ContractError);
  CHECK_THROWS_AS(dynamic_merge(bank, std::vector<double>{0.5, 0.2, 0.2}), ContractError);
  CHECK_THROWS(dynamic_merge(AdapterBank{}, std::vector<double>{}));
  AdapterBank mixed = bank_of({1});
  ParameterBundle other;
  other.insert("w", DenseArray::vector({1, 2}));
  CHECK_THROWS(mixed.append(other));
}

TEST_CASE("one-hot selection reproduces the adapter bit-exactly") {
  std::mt19937_64 rng(1);
  AdapterBank bank;
  for (int i = 0; i < 4; ++i) bank.append(random_bundle(rng));
  for (std::size_t t = 0; t < 4; ++t) {
    std::vector<double> p(4, 0.0);
    p[t] = 1.0;
    CHECK(dynamic_merge(bank, p) == bank[t]);
    CHECK(argmax_select(bank, p) == bank[t]);
  }
}

TEST_CASE("merging identical adapters is idempotent") {
  std::mt19937_64 rng(2);
  const auto b = random_bundle(rng);
  AdapterBank bank;
  for (int i = 0; i < 3; ++i) bank.append(b);
  const auto m = dynamic_merge(bank, std::vector<double>{0.2, 0.3, 0.5});
  for (std::size_t e = 0; e < b.size(); ++e)
    CHECK(max_abs_diff(m.entries()[e].second, b.entries()[e].second) <= 1e-6f);
}

TEST_CASE("merge cost counts multiply-adds of the nonzero adapters") {
  std::mt19937_64 rng(3);
  AdapterBank bank;
  for (int i = 0; i < 4; ++i) bank.append(random_bundle(rng));
  const std::uint64_t n = bank[0].num_elements();
  for (std::size_t k = 1; k <= 4; ++k) {
    auto p = topk_renormalize(std::vector<double>{0.4, 0.3, 0.2, 0.1}, k);
    MergeCounter counter;
    dynamic_merge(bank, p, &counter);
    CHECK(counter.multiply_adds == (2 * k - 1) * n);
    CHECK(merge_cost(bank.signature(), k) == (2 * k - 1) * n);
  }
}

TEST_CASE("RegMean of one model is that model") {
  std::mt19937_64 rng(4);
  ParameterBundle b;
  b.insert("w", testing::random_array(rng, {4, 3}));
  b.insert("bias", testing::random_array(rng, {3}));
  AdapterBank bank;
  bank.append(b);
  const auto x = testing::random_array(rng, {20, 4});
  const std::vector<GramStats> grams{{{"w", matmul(transpose(x), x)}}};
  const auto m = static_regmean(bank, grams);
  CHECK(max_abs_diff(m.get("w"), b.get("w")) < 1e-3f);
  CHECK(m.get("bias") == b.get("bias"));
}

TEST_CASE("RegMean with equal Gram matrices is the average") {
  std::mt19937_64 rng(5);
  AdapterBank bank;
  for (int i = 0; i < 3; ++i) {
    ParameterBundle b;
    b.insert("w", testing::random_array(rng, {4, 2}));
    bank.append(b);
  }
  const auto x = testing::random_array(rng, {30, 4});
  const GramStats g{{"w", matmul(transpose(x), x)}};
  const std::vector<GramStats> grams(3, g);
  CHECK(max_abs_diff(static_regmean(bank, grams).get("w"), static_average(bank).get("w")) < 1e-3f);
}

TEST_CASE("RegMean agrees with a least-squares solve") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    AdapterBank bank;
    std::vector<GramStats> grams;
    std::vector<Eigen::MatrixXd> xs, ws;
    for (int i = 0; i < 3; ++i) {
      ParameterBundle b;
      b.insert("w", testing::random_array(rng, {5, 3}));
      const auto x = testing::random_array(rng, {12, 5});
      grams.push_back({{"w", matmul(transpose(x), x)}});
      xs.push_back(to_eigen(x));
      ws.push_back(to_eigen(b.get("w")));
      bank.append(b);
    }
    double trace = 0.0;
    for (const auto& x : xs) trace += (x.transpose() * x).trace();
    const double lambda = 1e-4 * trace / 5.0;
    const auto expected = oracle::regmean_least_squares(xs, ws, lambda);
    const auto got = to_eigen(static_regmean(bank, grams).get("w"));
    const double f_exp = oracle::regmean_objective(xs, ws, lambda, expected);
    const double f_got = oracle::regmean_objective(xs, ws, lambda, got);
    CHECK((f_got - f_exp) / f_exp < 1e-5);
  }
}

TEST_CASE("with one adapter every strategy predicts the same") {
  const auto& bb = testing::small_backbone();
  const auto& ds = testing::small_large_gap()[0];
  TrainConfig tc;
  tc.epochs = 2;
  tc.warmup_epochs = 1;
  const auto state = train_stage(bb, ds, TrainerState{}, tc);
  const auto x = ds.features(Split::Test);
  const auto reference = bb.logits(x, state.bank[0]);
  for (auto s : {Strategy::DynamicMerge, Strategy::ArgmaxSelect, Strategy::StaticAverage, Strategy::StaticRegMean,
                 Strategy::OracleIdentity}) {
    const Composer c(bb, state.bank, state.router, ComposerConfig{s, 2}, state.grams);
    CHECK(c.effective_top_k() == 1);
    CAPTURE(std::string(strategy_name(s)));
    // The RegMean ridge term shrinks even a single model slightly.
    const float tol = s == Strategy::StaticRegMean ? 0.05f : 1e-5f;
    for (std::size_t i = 0; i < 5; ++i) CHECK(max_abs_diff(c.predict(x.row(i), 0), reference.row(i)) < tol);
  }
}

TEST_CASE("argmax selection equals merging with k = 1") {
  const auto& bb = testing::small_backbone();
  const auto& state = trained();
  const Composer sel(bb, state.bank, state.router, ComposerConfig{Strategy::ArgmaxSelect, 1});
  const Composer one(bb, state.bank, state.router, ComposerConfig{Strategy::DynamicMerge, 1});
  for (const auto& ds : testing::small_large_gap()) {
    const auto x = ds.features(Split::Test);
    for (std::size_t i = 0; i < 20; ++i) CHECK(sel.predict(x.row(i)) == one.predict(x.row(i)));
  }
}

TEST_CASE("oracle identity bounds the routed strategies") {
  const auto& bb = testing::small_backbone();
  const auto& state = trained();
  const auto& suite = testing::small_large_gap();
  auto mean = [&](Strategy s, std::size_t k) {
    const Composer c(bb, state.bank, state.router, ComposerConfig{s, k}, state.grams);
    double total = 0.0;
    for (std::size_t t = 0; t < suite.size(); ++t) total += evaluate_accuracy(c, suite[t], Split::Test, static_cast<int>(t));
    return total / static_cast<double>(suite.size());
  };
  const double oracle = mean(Strategy::OracleIdentity, 1);
  const double merged = mean(Strategy::DynamicMerge, 2);
  const double selected = mean(Strategy::ArgmaxSelect, 1);
  CHECK(oracle >= merged);
  CHECK(merged >= selected - 0.005);
  CHECK_THROWS_AS(Composer(bb, state.bank, state.router, ComposerConfig{Strategy::OracleIdentity, 1}).predict(
                      suite[0].features(Split::Test).row(0)),
                  ContractError);
}

TEST_CASE("strategy names round trip") {
  for (auto s : {Strategy::DynamicMerge, Strategy::ArgmaxSelect, Strategy::StaticAverage, Strategy::StaticRegMean,
                 Strategy::OracleIdentity})
    CHECK(parse_strategy(strategy_name(s)) == s);
  CHECK_THROWS_AS(parse_strategy("mean"), InputError);
}
