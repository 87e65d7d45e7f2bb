#pragma once

#include <cstddef>
#include <vector>

#include "porl/net.h"
#include "porl/rng.h"
#include "porl/tensor.h"

namespace porl {

// Random-network-distillation pair: a frozen randomly initialized target and
// a trainable predictor that tries to match it. Prediction error on an input
// is its novelty score: small where the predictor has trained, large off the
// training distribution.
struct RndPair {
  NetworkSpec target_net, predictor_net;
  ParamSet target_params;     // frozen after construction
  ParamSet predictor_params;  // trainable
};

struct CuriosityConfig {
  double rate = 0.3;            // fraction p of each batch replaced by novel synth rows
  double predictor_lr = 1e-3;
  void validate() const;        // throws unless 0 <= rate <= 1 and lr >= 0
};

// Target is deeper than the predictor (depth 4 vs 2) at equal width, so the
// predictor cannot represent the target exactly and the error stays
// informative off-distribution.
RndPair make_rnd_pair(std::size_t input_dim, std::size_t out_dim, std::size_t width,
                      SeededRng rng);

// Squared L2 distance between predictor and target outputs for one row.
double curiosity_score(const RndPair& pair, const Tensor& x_row);
// One score per row of the batch.
std::vector<double> curiosity_scores(const RndPair& pair, const Tensor& batch);

// One SGD step on the mean score of the batch; the target never changes.
void update_predictor(RndPair& pair, const Tensor& batch, double lr);

// Replacement plan: which synthetic rows go in (highest score first, ties by
// row index) and which uniformly drawn distinct batch positions they land on.
struct ReplacePlan {
  std::vector<std::size_t> synth_rows;
  std::vector<std::size_t> positions;
};

ReplacePlan plan_replacement(const std::vector<double>& scores, std::size_t batch_rows, double p,
                             SeededRng& rng);

// Overwrites floor(p * rows) uniformly chosen rows of `real` with the
// highest-scoring rows of `synth`.
Tensor curious_replace(const Tensor& real, const Tensor& synth, const std::vector<double>& scores,
                       double p, SeededRng& rng);

}  // namespace porl
