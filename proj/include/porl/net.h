#pragma once

#include <functional>
#include <string>
#include <vector>

#include "porl/graph.h"
#include "porl/rng.h"
#include "porl/tensor.h"

namespace porl {

// Optional self-attention stage: `layers` pre-norm blocks of multi-head
// attention + feed-forward, run at the width of the first hidden layer,
// treating the batch rows as the token sequence.
struct AttentionSpec {
  std::size_t layers = 0;
  std::size_t heads = 0;
};

struct NetworkSpec {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::vector<std::size_t> hidden;  // layer widths
  std::string activation = "silu";  // relu | tanh | silu | identity
  bool skip_connections = false;    // residual add between equal-width hidden layers
  AttentionSpec attention;
  void validate() const;  // throws on incompatible dims / head count
};

// Named parameter tensors in a stable creation order; the order defines the
// flattened layout used by clipping, noise, and optimizers.
struct ParamSet {
  std::vector<std::pair<std::string, Tensor>> items;

  Tensor& add(const std::string& name, std::vector<std::size_t> shape);
  Tensor* find(const std::string& name);
  const Tensor* find(const std::string& name) const;
  std::size_t total_dim() const;
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& flat);
  bool same_layout(const ParamSet& o) const;
};

ParamSet zeros_like(const ParamSet& p);
double ps_norm(const ParamSet& p);
void ps_scale(ParamSet& p, double c);
void ps_axpy(ParamSet& dst, double a, const ParamSet& src);  // dst += a * src
void ps_add_gaussian(ParamSet& dst, SeededRng& rng, double std_dev);

// Activation by name, applied inside a graph.
int apply_activation(Graph& g, int x, const std::string& name);

// Parameter initialisation for a NetworkSpec (weights N(0, 1/sqrt(fan_in)),
// biases zero, layer-norm gain one). Deterministic in the rng seed.
ParamSet init_params(const NetworkSpec& spec, SeededRng rng);

// Builds the network body inside g; x is a (B, input_dim) node. The second
// form also reports the registered parameter node ids (for collect_grads).
int apply_network(Graph& g, const NetworkSpec& spec, const ParamSet& params, int x);
int apply_network(Graph& g, const NetworkSpec& spec, const ParamSet& params, int x,
                  std::vector<int>& param_nodes_out);

// Attention stack reusable outside NetworkSpec (the trajectory denoiser feeds
// it pre-assembled token matrices). Parameters live under `prefix` in ps.
void init_attention_stack(ParamSet& ps, const std::string& prefix, std::size_t width,
                          std::size_t layers, std::size_t heads, SeededRng& rng);
int apply_attention_stack(Graph& g, const ParamSet& ps, const std::string& prefix, int tokens,
                          std::size_t layers, std::size_t heads);

// Building blocks for composite models that register one ParamSet themselves
// (via register_params) and wire several named sub-networks into one graph.
// `param_nodes` must be the ids returned by register_params(g, ps).
void init_linear_named(ParamSet& ps, const std::string& w, const std::string& b, std::size_t in,
                       std::size_t out, SeededRng& rng);
int apply_linear(Graph& g, const ParamSet& ps, const std::vector<int>& param_nodes,
                 const std::string& w, const std::string& b, int x);
int apply_attention_stack(Graph& g, const ParamSet& ps, const std::vector<int>& param_nodes,
                          const std::string& prefix, int tokens, std::size_t layers,
                          std::size_t heads);

using LossFn = std::function<int(Graph&, int)>;  // output node -> scalar node

Tensor forward(const NetworkSpec& spec, const ParamSet& params, const Tensor& batch);
ParamSet grad(const NetworkSpec& spec, const ParamSet& params, const Tensor& batch,
              const LossFn& loss_fn);
std::vector<ParamSet> per_example_grads(const NetworkSpec& spec, const ParamSet& params,
                                        const Tensor& batch, const LossFn& loss_fn);

// Collects d(loss)/d(param) for params registered in a graph via param_nodes,
// in ParamSet layout. Shared by every training loop.
ParamSet collect_grads(const Graph& g, const ParamSet& params, const std::vector<int>& param_nodes);

// Registers every tensor of ps as a param node; returns the node ids in order.
std::vector<int> register_params(Graph& g, const ParamSet& ps);

struct Sgd {
  double lr;
  void step(ParamSet& params, const ParamSet& g) const { ps_axpy(params, -lr, g); }
};

struct Adam {
  double lr = 3e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;
  ParamSet m, v;
  void step(ParamSet& params, const ParamSet& g);
};

}  // namespace porl
