#include "porl/net.h"

#include <cmath>
#include <stdexcept>

namespace porl {

void NetworkSpec::validate() const {
  if (input_dim == 0 || output_dim == 0) throw std::invalid_argument("network dims must be positive");
  for (auto w : hidden)
    if (w == 0) throw std::invalid_argument("hidden widths must be positive");
  if (activation != "relu" && activation != "tanh" && activation != "silu" &&
      activation != "identity")
    throw std::invalid_argument("unknown activation: " + activation);
  if (attention.layers > 0) {
    if (hidden.empty()) throw std::invalid_argument("attention blocks need a hidden width");
    if (attention.heads == 0) throw std::invalid_argument("attention needs at least one head");
    if (hidden[0] % attention.heads != 0)
      throw std::invalid_argument("head count must divide the attention width");
  }
}

Tensor& ParamSet::add(const std::string& name, std::vector<std::size_t> shape) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  items.emplace_back(name, Tensor(std::move(shape)));
  return items.back().second;
}

Tensor* ParamSet::find(const std::string& name) {
  for (auto& [n, t] : items)
    if (n == name) return &t;
  return nullptr;
}

const Tensor* ParamSet::find(const std::string& name) const {
  for (auto& [n, t] : items)
    if (n == name) return &t;
  return nullptr;
}

std::size_t ParamSet::total_dim() const {
  std::size_t n = 0;
  for (auto& [name, t] : items) n += t.size();
  return n;
}

std::vector<double> ParamSet::flatten() const {
  std::vector<double> flat;
  flat.reserve(total_dim());
  for (auto& [name, t] : items) flat.insert(flat.end(), t.data.begin(), t.data.end());
  return flat;
}

void ParamSet::unflatten(const std::vector<double>& flat) {
  if (flat.size() != total_dim()) throw std::invalid_argument("flat size mismatch");
  std::size_t off = 0;
  for (auto& [name, t] : items) {
    std::copy(flat.begin() + off, flat.begin() + off + t.size(), t.data.begin());
    off += t.size();
  }
}

bool ParamSet::same_layout(const ParamSet& o) const {
  if (items.size() != o.items.size()) return false;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (items[i].first != o.items[i].first || items[i].second.shape != o.items[i].second.shape)
      return false;
  return true;
}

ParamSet zeros_like(const ParamSet& p) {
  ParamSet z;
  for (auto& [name, t] : p.items) z.add(name, t.shape);
  return z;
}

double ps_norm(const ParamSet& p) {
  double s = 0;
  for (auto& [name, t] : p.items)
    for (double v : t.data) s += v * v;
  return std::sqrt(s);
}

void ps_scale(ParamSet& p, double c) {
  for (auto& [name, t] : p.items)
    for (double& v : t.data) v *= c;
}

void ps_axpy(ParamSet& dst, double a, const ParamSet& src) {
  if (!dst.same_layout(src)) throw std::invalid_argument("ps_axpy: layout mismatch");
  for (std::size_t i = 0; i < dst.items.size(); ++i) {
    auto& d = dst.items[i].second.data;
    auto& s = src.items[i].second.data;
    for (std::size_t k = 0; k < d.size(); ++k) d[k] += a * s[k];
  }
}

void ps_add_gaussian(ParamSet& dst, SeededRng& rng, double std_dev) {
  if (std_dev == 0.0) return;
  for (auto& [name, t] : dst.items)
    for (double& v : t.data) v += std_dev * rng.normal();
}

int apply_activation(Graph& g, int x, const std::string& name) {
  if (name == "relu") return g.relu(x);
  if (name == "tanh") return g.tanh_act(x);
  if (name == "silu") return g.silu(x);
  if (name == "identity") return x;
  throw std::invalid_argument("unknown activation: " + name);
}

namespace {

void init_linear(ParamSet& ps, const std::string& w, const std::string& b, std::size_t in,
                 std::size_t out, SeededRng& rng) {
  Tensor& W = ps.add(w, {in, out});
  double std_dev = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& v : W.data) v = std_dev * rng.normal();
  ps.add(b, {out});  // zero
}

void init_layer_norm(ParamSet& ps, const std::string& prefix, std::size_t width) {
  Tensor& gain = ps.add(prefix + ".g", {width});
  for (double& v : gain.data) v = 1.0;
  ps.add(prefix + ".b", {width});
}

// y = act(x W + b) as graph nodes, looked up from registered param nodes.
struct ParamNodes {
  const ParamSet* ps;
  std::vector<int> nodes;
  int node_of(const std::string& name) const {
    for (std::size_t i = 0; i < ps->items.size(); ++i)
      if (ps->items[i].first == name) return nodes[i];
    throw std::invalid_argument("missing parameter: " + name);
  }
};

int linear(Graph& g, const ParamNodes& pn, const std::string& w, const std::string& b, int x) {
  return g.add_row(g.matmul(x, pn.node_of(w)), pn.node_of(b));
}

int layer_norm(Graph& g, const ParamNodes& pn, const std::string& prefix, int x) {
  return g.layer_norm_rows(x, pn.node_of(prefix + ".g"), pn.node_of(prefix + ".b"));
}

int attention_block(Graph& g, const ParamNodes& pn, const std::string& p, int x,
                    std::size_t heads) {
  std::size_t width = g.val(x).cols();
  std::size_t head_dim = width / heads;
  int normed = layer_norm(g, pn, p + ".ln1", x);
  int q = linear(g, pn, p + ".wq", p + ".bq", normed);
  int k = linear(g, pn, p + ".wk", p + ".bk", normed);
  int v = linear(g, pn, p + ".wv", p + ".bv", normed);
  std::vector<int> head_out;
  for (std::size_t h = 0; h < heads; ++h) {
    std::size_t lo = h * head_dim, hi = lo + head_dim;
    int qh = g.slice_cols(q, lo, hi);
    int kh = g.slice_cols(k, lo, hi);
    int vh = g.slice_cols(v, lo, hi);
    int scores = g.scale(g.matmul(qh, g.transpose(kh)), 1.0 / std::sqrt(double(head_dim)));
    head_out.push_back(g.matmul(g.softmax_rows(scores), vh));
  }
  int merged = head_out[0];
  for (std::size_t h = 1; h < heads; ++h) merged = g.concat_cols(merged, head_out[h]);
  int attended = g.add(x, linear(g, pn, p + ".wo", p + ".bo", merged));
  int normed2 = layer_norm(g, pn, p + ".ln2", attended);
  int ff = linear(g, pn, p + ".ff2.w", p + ".ff2.b",
                  g.silu(linear(g, pn, p + ".ff1.w", p + ".ff1.b", normed2)));
  return g.add(attended, ff);
}

int attention_stack_nodes(Graph& g, const ParamNodes& pn, const std::string& prefix, int tokens,
                          std::size_t layers, std::size_t heads) {
  int h = tokens;
  for (std::size_t l = 0; l < layers; ++l)
    h = attention_block(g, pn, prefix + ".l" + std::to_string(l), h, heads);
  return h;
}

int network_body(Graph& g, const NetworkSpec& spec, const ParamNodes& pn, int x) {
  int h = x;
  std::size_t layer = 0;
  std::size_t width = spec.input_dim;
  if (spec.attention.layers > 0) {
    h = apply_activation(
        g, linear(g, pn, "w" + std::to_string(layer), "b" + std::to_string(layer), h),
        spec.activation);
    width = spec.hidden[0];
    ++layer;
    h = attention_stack_nodes(g, pn, "attn", h, spec.attention.layers, spec.attention.heads);
  }
  for (std::size_t i = (spec.attention.layers > 0 ? 1 : 0); i < spec.hidden.size(); ++i) {
    int pre = h;
    h = apply_activation(
        g, linear(g, pn, "w" + std::to_string(layer), "b" + std::to_string(layer), h),
        spec.activation);
    if (spec.skip_connections && spec.hidden[i] == width) h = g.add(h, pre);
    width = spec.hidden[i];
    ++layer;
  }
  return linear(g, pn, "w" + std::to_string(layer), "b" + std::to_string(layer), h);
}

ParamNodes make_param_nodes(Graph& g, const ParamSet& ps) {
  return ParamNodes{&ps, register_params(g, ps)};
}

}  // namespace

ParamSet init_params(const NetworkSpec& spec, SeededRng rng) {
  spec.validate();
  ParamSet ps;
  std::size_t layer = 0;
  std::size_t width = spec.input_dim;
  if (spec.attention.layers > 0) {
    init_linear(ps, "w0", "b0", width, spec.hidden[0], rng);
    width = spec.hidden[0];
    ++layer;
    init_attention_stack(ps, "attn", width, spec.attention.layers, spec.attention.heads, rng);
  }
  for (std::size_t i = (spec.attention.layers > 0 ? 1 : 0); i < spec.hidden.size(); ++i) {
    init_linear(ps, "w" + std::to_string(layer), "b" + std::to_string(layer), width,
                spec.hidden[i], rng);
    width = spec.hidden[i];
    ++layer;
  }
  init_linear(ps, "w" + std::to_string(layer), "b" + std::to_string(layer), width, spec.output_dim,
              rng);
  return ps;
}

void init_attention_stack(ParamSet& ps, const std::string& prefix, std::size_t width,
                          std::size_t layers, std::size_t heads, SeededRng& rng) {
  if (heads == 0 || width % heads != 0)
    throw std::invalid_argument("head count must divide the attention width");
  std::size_t ff_dim = 2 * width;
  for (std::size_t l = 0; l < layers; ++l) {
    std::string p = prefix + ".l" + std::to_string(l);
    init_layer_norm(ps, p + ".ln1", width);
    init_linear(ps, p + ".wq", p + ".bq", width, width, rng);
    init_linear(ps, p + ".wk", p + ".bk", width, width, rng);
    init_linear(ps, p + ".wv", p + ".bv", width, width, rng);
    init_linear(ps, p + ".wo", p + ".bo", width, width, rng);
    init_layer_norm(ps, p + ".ln2", width);
    init_linear(ps, p + ".ff1.w", p + ".ff1.b", width, ff_dim, rng);
    init_linear(ps, p + ".ff2.w", p + ".ff2.b", ff_dim, width, rng);
  }
}

int apply_attention_stack(Graph& g, const ParamSet& ps, const std::string& prefix, int tokens,
                          std::size_t layers, std::size_t heads) {
  ParamNodes pn = make_param_nodes(g, ps);
  return attention_stack_nodes(g, pn, prefix, tokens, layers, heads);
}

void init_linear_named(ParamSet& ps, const std::string& w, const std::string& b, std::size_t in,
                       std::size_t out, SeededRng& rng) {
  init_linear(ps, w, b, in, out, rng);
}

int apply_linear(Graph& g, const ParamSet& ps, const std::vector<int>& param_nodes,
                 const std::string& w, const std::string& b, int x) {
  ParamNodes pn{&ps, param_nodes};
  return linear(g, pn, w, b, x);
}

int apply_attention_stack(Graph& g, const ParamSet& ps, const std::vector<int>& param_nodes,
                          const std::string& prefix, int tokens, std::size_t layers,
                          std::size_t heads) {
  ParamNodes pn{&ps, param_nodes};
  return attention_stack_nodes(g, pn, prefix, tokens, layers, heads);
}

int apply_network(Graph& g, const NetworkSpec& spec, const ParamSet& params, int x) {
  ParamNodes pn = make_param_nodes(g, params);
  return network_body(g, spec, pn, x);
}

int apply_network(Graph& g, const NetworkSpec& spec, const ParamSet& params, int x,
                  std::vector<int>& param_nodes_out) {
  ParamNodes pn = make_param_nodes(g, params);
  param_nodes_out = pn.nodes;
  return network_body(g, spec, pn, x);
}

std::vector<int> register_params(Graph& g, const ParamSet& ps) {
  std::vector<int> nodes;
  nodes.reserve(ps.items.size());
  for (auto& [name, t] : ps.items) nodes.push_back(g.param(&t));
  return nodes;
}

ParamSet collect_grads(const Graph& g, const ParamSet& params,
                       const std::vector<int>& param_nodes) {
  ParamSet out = zeros_like(params);
  for (std::size_t i = 0; i < param_nodes.size(); ++i)
    out.items[i].second = g.grad(param_nodes[i]);
  return out;
}

Tensor forward(const NetworkSpec& spec, const ParamSet& params, const Tensor& batch) {
  Graph g;
  int x = g.input(batch);
  int out = apply_network(g, spec, params, x);
  return g.val(out);
}

ParamSet grad(const NetworkSpec& spec, const ParamSet& params, const Tensor& batch,
              const LossFn& loss_fn) {
  Graph g;
  int x = g.input(batch);
  ParamNodes pn = make_param_nodes(g, params);
  int out = network_body(g, spec, pn, x);
  int loss = loss_fn(g, out);
  g.backward(loss);
  return collect_grads(g, params, pn.nodes);
}

std::vector<ParamSet> per_example_grads(const NetworkSpec& spec, const ParamSet& params,
                                        const Tensor& batch, const LossFn& loss_fn) {
  if (batch.rows() == 0) throw std::invalid_argument("per_example_grads: empty batch");
  std::vector<ParamSet> grads;
  grads.reserve(batch.rows());
  for (std::size_t r = 0; r < batch.rows(); ++r)
    grads.push_back(grad(spec, params, batch.row_slice(r), loss_fn));
  return grads;
}

void Adam::step(ParamSet& params, const ParamSet& g) {
  if (m.items.empty()) {
    m = zeros_like(params);
    v = zeros_like(params);
  }
  ++t;
  double c1 = 1.0 - std::pow(beta1, double(t));
  double c2 = 1.0 - std::pow(beta2, double(t));
  for (std::size_t i = 0; i < params.items.size(); ++i) {
    auto& pd = params.items[i].second.data;
    auto& gd = g.items[i].second.data;
    auto& md = m.items[i].second.data;
    auto& vd = v.items[i].second.data;
    for (std::size_t k = 0; k < pd.size(); ++k) {
      md[k] = beta1 * md[k] + (1 - beta1) * gd[k];
      vd[k] = beta2 * vd[k] + (1 - beta2) * gd[k] * gd[k];
      pd[k] -= lr * (md[k] / c1) / (std::sqrt(vd[k] / c2) + eps);
    }
  }
}

}  // namespace porl
