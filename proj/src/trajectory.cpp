#include "porl/trajectory.h"

#include <stdexcept>

namespace porl {

void Trajectory::validate() const {
  if (state_dim == 0 || action_dim == 0)
    throw std::invalid_argument("trajectory: state and action dims must be positive");
  if (length() == 0) throw std::invalid_argument("trajectory: empty");
  if (steps.cols() != width()) throw std::invalid_argument("trajectory: row width mismatch");
  if (!steps.all_finite()) throw std::invalid_argument("trajectory: non-finite values");
  std::size_t d_off = width() - 1;
  std::size_t next_off = state_dim + action_dim + 1;
  for (std::size_t r = 0; r < length(); ++r) {
    double d = steps.at(r, d_off);
    if (d != 0.0 && d != 1.0) throw std::invalid_argument("trajectory: terminal flag not 0/1");
    if (d == 1.0) {
      if (r + 1 != length())
        throw std::invalid_argument("trajectory: terminal before the last step");
      for (std::size_t c = 0; c < state_dim; ++c)
        if (steps.at(r, next_off + c) != 0.0)
          throw std::invalid_argument("trajectory: terminal step must have zero next state");
    }
  }
}

std::size_t Fragment::real_length() const {
  std::size_t n = 0;
  for (bool v : valid)
    if (v) ++n;
  return n;
}

std::vector<Fragment> fragment(const Trajectory& traj, std::size_t H, std::size_t parent_id) {
  if (H == 0) throw std::invalid_argument("fragment: H must be positive");
  traj.validate();
  std::size_t L = traj.length(), w = traj.width();
  std::size_t n_frag = (L + H - 1) / H;
  std::vector<Fragment> out;
  out.reserve(n_frag);
  for (std::size_t f = 0; f < n_frag; ++f) {
    Fragment fr;
    fr.index = f;
    fr.parent = parent_id;
    fr.steps = Tensor(H, w);
    fr.valid.assign(H, false);
    std::size_t base = f * H;
    for (std::size_t i = 0; i < H && base + i < L; ++i) {
      fr.valid[i] = true;
      for (std::size_t c = 0; c < w; ++c) fr.steps.at(i, c) = traj.steps.at(base + i, c);
    }
    fr.link = Tensor(1, w);  // zeros for the first fragment
    if (f > 0)
      for (std::size_t c = 0; c < w; ++c) fr.link[c] = traj.steps.at(base - 1, c);
    out.push_back(std::move(fr));
  }
  return out;
}

Trajectory stitch(const std::vector<Fragment>& fragments, std::size_t state_dim,
                  std::size_t action_dim) {
  if (fragments.empty()) throw std::invalid_argument("stitch: no fragments");
  std::size_t w = fragments[0].steps.cols();
  std::size_t total = 0;
  for (const Fragment& f : fragments) total += f.real_length();
  Trajectory t;
  t.state_dim = state_dim;
  t.action_dim = action_dim;
  t.steps = Tensor(total, w);
  std::size_t r = 0;
  for (const Fragment& f : fragments)
    for (std::size_t i = 0; i < f.valid.size(); ++i)
      if (f.valid[i]) {
        for (std::size_t c = 0; c < w; ++c) t.steps.at(r, c) = f.steps.at(i, c);
        ++r;
      }
  return t;
}

}  // namespace porl
