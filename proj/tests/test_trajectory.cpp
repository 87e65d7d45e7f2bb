#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "porl/rng.h"
#include "porl/trajectory.h"

using namespace porl;

namespace {

// Random trajectory of the given length; terminal flag on the last row when
// asked, with the required zero next state.
Trajectory make_traj(std::size_t len, bool terminal, SeededRng& rng, std::size_t s = 2,
                     std::size_t a = 1) {
  Trajectory t;
  t.state_dim = s;
  t.action_dim = a;
  const std::size_t w = t.width();
  std::vector<double> vals(len * w);
  for (auto& v : vals) v = rng.uniform() * 2.0 - 1.0;
  t.steps = Tensor::from({len, w}, std::move(vals));
  for (std::size_t r = 0; r < len; ++r) t.steps.at(r, w - 1) = 0.0;
  if (terminal) {
    t.steps.at(len - 1, w - 1) = 1.0;
    for (std::size_t c = 0; c < s; ++c) t.steps.at(len - 1, s + a + 1 + c) = 0.0;
  }
  t.validate();
  return t;
}

}  // namespace

TEST_CASE("trajectory validation enforces the terminal conventions") {
  SeededRng rng(11);
  Trajectory t = make_traj(5, true, rng);
  const std::size_t w = t.width();
  CHECK(w == 2 * 2 + 1 + 2);

  SUBCASE("terminal flag must be 0 or 1") {
    t.steps.at(2, w - 1) = 0.5;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  }
  SUBCASE("terminal only allowed on the last row") {
    t.steps.at(1, w - 1) = 1.0;
    for (std::size_t c = 0; c < 2; ++c) t.steps.at(1, 4 + c) = 0.0;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  }
  SUBCASE("terminal row must zero its next state") {
    t.steps.at(4, 4) = 0.25;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  }
  SUBCASE("empty trajectories rejected") {
    t.steps = Tensor(0, w);
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  }
  SUBCASE("width mismatch rejected") {
    t.steps = Tensor(3, w + 1);
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  }
  SUBCASE("non-terminal trajectories (timeouts) are fine") {
    Trajectory open = make_traj(5, false, rng);
    open.validate();
  }
}

TEST_CASE("ten steps with horizon four split 4/4/2") {
  SeededRng rng(21);
  const Trajectory t = make_traj(10, true, rng);
  const auto frags = fragment(t, 4, 3);
  REQUIRE(frags.size() == 3);
  CHECK(frags[0].real_length() == 4);
  CHECK(frags[1].real_length() == 4);
  CHECK(frags[2].real_length() == 2);
  for (std::size_t f = 0; f < 3; ++f) {
    CHECK(frags[f].steps.rows() == 4);  // all padded to the horizon
    CHECK(frags[f].index == f);
    CHECK(frags[f].parent == 3);
    REQUIRE(frags[f].valid.size() == 4);
  }
  // Padding rows are invalid and zero.
  CHECK_FALSE(frags[2].valid[2]);
  CHECK_FALSE(frags[2].valid[3]);
  for (std::size_t r = 2; r < 4; ++r)
    for (std::size_t c = 0; c < t.width(); ++c) CHECK(frags[2].steps.at(r, c) == 0.0);
  // Real rows survive exactly.
  for (std::size_t f = 0; f < 3; ++f)
    for (std::size_t r = 0; r < frags[f].real_length(); ++r)
      for (std::size_t c = 0; c < t.width(); ++c)
        CHECK(frags[f].steps.at(r, c) == t.steps.at(f * 4 + r, c));
}

TEST_CASE("whole-trajectory fragment has a zero link") {
  SeededRng rng(22);
  const Trajectory t = make_traj(4, false, rng);
  const auto frags = fragment(t, 4);
  REQUIRE(frags.size() == 1);
  CHECK(frags[0].real_length() == 4);
  for (std::size_t c = 0; c < t.width(); ++c) CHECK(frags[0].link.at(0, c) == 0.0);
  CHECK(std::all_of(frags[0].valid.begin(), frags[0].valid.end(), [](bool b) { return b; }));
}

TEST_CASE("links equal the transition immediately before each fragment") {
  SeededRng rng(23);
  for (std::size_t trial = 0; trial < 100; ++trial) {
    SeededRng tr = rng.child(trial);
    const std::size_t len = 1 + tr.uniform_index(30);
    const std::size_t H = 1 + tr.uniform_index(8);
    const bool term = tr.uniform() < 0.5;
    const Trajectory t = make_traj(len, term, tr);
    const auto frags = fragment(t, H, trial);
    REQUIRE(frags.size() == (len + H - 1) / H);
    for (std::size_t f = 0; f < frags.size(); ++f) {
      if (f == 0) {
        for (std::size_t c = 0; c < t.width(); ++c) CHECK(frags[0].link.at(0, c) == 0.0);
      } else {
        // The link is the last real row of the previous fragment.
        const std::size_t prev_row = f * H - 1;
        for (std::size_t c = 0; c < t.width(); ++c)
          CHECK(frags[f].link.at(0, c) == t.steps.at(prev_row, c));
        const std::size_t prev_last = frags[f - 1].real_length() - 1;
        for (std::size_t c = 0; c < t.width(); ++c)
          CHECK(frags[f].link.at(0, c) == frags[f - 1].steps.at(prev_last, c));
      }
      // Validity marks exactly the real rows.
      for (std::size_t r = 0; r < H; ++r)
        CHECK(frags[f].valid[r] == (f * H + r < len));
    }
  }
}

TEST_CASE("stitching fragments reproduces the trajectory exactly") {
  SeededRng rng(24);
  for (std::size_t trial = 0; trial < 100; ++trial) {
    SeededRng tr = rng.child(trial);
    const std::size_t len = 1 + tr.uniform_index(25);
    const std::size_t H = 1 + tr.uniform_index(6);
    const Trajectory t = make_traj(len, tr.uniform() < 0.5, tr);
    const Trajectory back = stitch(fragment(t, H), t.state_dim, t.action_dim);
    REQUIRE(back.length() == len);
    for (std::size_t i = 0; i < t.steps.size(); ++i) CHECK(back.steps[i] == t.steps[i]);
    back.validate();
  }
}

TEST_CASE("fragmenting rejects bad inputs") {
  SeededRng rng(25);
  const Trajectory t = make_traj(6, true, rng);
  CHECK_THROWS_AS(fragment(t, 0), std::invalid_argument);
  Trajectory empty = t;
  empty.steps = Tensor(0, t.width());
  CHECK_THROWS_AS(fragment(empty, 4), std::invalid_argument);
  CHECK_THROWS_AS(stitch({}, 2, 1), std::invalid_argument);
}
