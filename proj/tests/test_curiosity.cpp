#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "porl/curiosity.h"
#include "porl/rng.h"

using namespace porl;

namespace {

Tensor cluster(std::size_t n, double center, SeededRng& rng) {
  Tensor t(n, 2);
  for (double& v : t.data) v = center + 0.1 * rng.normal();
  return t;
}

}  // namespace

TEST_CASE("score is zero when predictor equals target, non-negative always") {
  RndPair pair = make_rnd_pair(3, 8, 16, SeededRng(1));
  // Force architectural and parametric identity.
  pair.predictor_net = pair.target_net;
  pair.predictor_params = pair.target_params;
  SeededRng rng(2);
  for (int i = 0; i < 10; ++i) {
    Tensor x = gaussian(rng, {1, 3}, 2.0);
    CHECK(curiosity_score(pair, x) == 0.0);
  }

  RndPair fresh = make_rnd_pair(3, 8, 16, SeededRng(3));
  Tensor batch = gaussian(rng, {32, 3}, 1.5);
  for (double s : curiosity_scores(fresh, batch)) CHECK(s >= 0.0);
}

TEST_CASE("config validation") {
  CuriosityConfig ok;
  ok.validate();
  CuriosityConfig bad1{1.2, 1e-3};
  CHECK_THROWS(bad1.validate());
  CuriosityConfig bad2{0.3, -1.0};
  CHECK_THROWS(bad2.validate());
}

TEST_CASE("predictor update: zero lr is a no-op, target is frozen, loss descends") {
  RndPair pair = make_rnd_pair(2, 8, 16, SeededRng(4));
  SeededRng rng(5);
  Tensor batch = cluster(64, 0.0, rng);

  std::vector<double> predictor_before = pair.predictor_params.flatten();
  std::vector<double> target_before = pair.target_params.flatten();
  update_predictor(pair, batch, 0.0);
  CHECK(pair.predictor_params.flatten() == predictor_before);

  auto mean_score = [&](const Tensor& b) {
    auto s = curiosity_scores(pair, b);
    double m = 0;
    for (double v : s) m += v;
    return m / double(s.size());
  };

  double prev = mean_score(batch);
  int violations = 0;
  for (int step = 0; step < 100; ++step) {
    update_predictor(pair, batch, 1e-3);
    double cur = mean_score(batch);
    if (cur > prev) ++violations;
    prev = cur;
  }
  CHECK(violations <= 5);
  CHECK(pair.target_params.flatten() == target_before);

  CHECK_THROWS(update_predictor(pair, Tensor(0, 2), 1e-3));
}

TEST_CASE("novelty separation: trained-on cluster scores far below a distant cluster") {
  RndPair pair = make_rnd_pair(2, 32, 32, SeededRng(6));
  SeededRng rng(7);
  Tensor a_train = cluster(256, 0.0, rng);
  for (int step = 0; step < 300; ++step) update_predictor(pair, a_train, 1e-3);

  Tensor a_test = cluster(200, 0.0, rng);
  Tensor b_test = cluster(200, 5.0, rng);
  auto mean = [&](const Tensor& b) {
    auto s = curiosity_scores(pair, b);
    double m = 0;
    for (double v : s) m += v;
    return m / double(s.size());
  };
  double on = mean(a_test), off = mean(b_test);
  CHECK(off > 5.0 * on);
}

TEST_CASE("replacement: rate endpoints") {
  SeededRng rng(8);
  Tensor real = gaussian(rng, {10, 3}, 1.0);
  Tensor synth = gaussian(rng, {10, 3}, 1.0);
  for (double& v : synth.data) v += 100.0;  // disjoint from real
  std::vector<double> scores(10);
  for (int i = 0; i < 10; ++i) scores[i] = double(i);

  SeededRng r0(9);
  Tensor none = curious_replace(real, synth, scores, 0.0, r0);
  CHECK(none.data == real.data);

  SeededRng r1(9);
  Tensor all = curious_replace(real, synth, scores, 1.0, r1);
  std::multiset<double> got(all.data.begin(), all.data.end());
  std::multiset<double> want(synth.data.begin(), synth.data.end());
  CHECK(got == want);
}

TEST_CASE("replacement: exact count and top-score selection at p = 0.3") {
  SeededRng rng(10);
  Tensor real(10, 2);
  for (std::size_t i = 0; i < 10; ++i) real.at(i, 0) = real.at(i, 1) = double(i);
  Tensor synth(10, 2);
  for (std::size_t i = 0; i < 10; ++i) synth.at(i, 0) = synth.at(i, 1) = 1000.0 + double(i);
  std::vector<double> scores{0.3, 2.6, 1.1, 7.4, 0.9, 7.4, 3.3, 0.1, 5.2, 4.4};

  // Brute force: sort (score desc, index asc), take floor(0.3 * 10) = 3.
  std::vector<std::size_t> idx(10);
  for (std::size_t i = 0; i < 10; ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::set<double> expect_rows;
  for (int k = 0; k < 3; ++k) expect_rows.insert(synth.at(idx[k], 0));
  CHECK(expect_rows == std::set<double>{1003.0, 1005.0, 1008.0});  // ties 3 before 5

  SeededRng r(11);
  Tensor out = curious_replace(real, synth, scores, 0.3, r);
  std::set<double> inserted;
  int replaced = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    if (out.at(i, 0) >= 1000.0) {
      ++replaced;
      inserted.insert(out.at(i, 0));
    } else {
      CHECK(out.at(i, 0) == real.at(i, 0));  // untouched rows stay in place
    }
  }
  CHECK(replaced == 3);
  CHECK(inserted == expect_rows);

  CHECK_THROWS(curious_replace(real, Tensor(9, 2), scores, 0.3, r));
  std::vector<double> short_scores(9, 0.0);
  CHECK_THROWS(curious_replace(real, synth, short_scores, 0.3, r));
}

TEST_CASE("replacement: count invariant and score ordering on random instances") {
  SeededRng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t n = 1 + rng.uniform_index(40);
    double p = rng.uniform();
    Tensor real = gaussian(rng, {n, 1}, 1.0);
    Tensor synth = gaussian(rng, {n, 1}, 1.0);
    for (double& v : synth.data) v += 1000.0;
    std::vector<double> scores(n);
    for (double& s : scores) s = rng.uniform();

    SeededRng r = rng.child(trial);
    ReplacePlan plan = plan_replacement(scores, n, p, r);
    CHECK(plan.synth_rows.size() == static_cast<std::size_t>(p * double(n)));
    CHECK(plan.positions.size() == plan.synth_rows.size());

    // Inserted scores dominate the left-out ones.
    std::set<std::size_t> chosen(plan.synth_rows.begin(), plan.synth_rows.end());
    double min_in = 1e300, max_out = -1e300;
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen.count(i)) min_in = std::min(min_in, scores[i]);
      else max_out = std::max(max_out, scores[i]);
    }
    if (!chosen.empty() && chosen.size() < n) CHECK(min_in >= max_out);

    // Positions are distinct.
    std::set<std::size_t> pos(plan.positions.begin(), plan.positions.end());
    CHECK(pos.size() == plan.positions.size());
  }
}
