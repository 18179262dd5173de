#pragma once

#include <string>
#include <vector>

#include "rmae/masking.hpp"
#include "rmae/ops.hpp"
#include "rmae/rng.hpp"
#include "rmae/tensor.hpp"

// Transformer building blocks. Every block maps [..., L, dim] -> [..., L, dim]
// with leading axes treated as independent sequences.

namespace rmae::inline RMAE_ABI {

enum class Init { zeros, ones, xavier, normal02 };

// Owns the learnable tensors of one model in registration order.
class ParamSet {
 public:
  explicit ParamSet(std::uint64_t seed = 0) : rng_(seed) {}

  Tensor add(const std::string& name, Shape shape, Init init);
  const std::vector<Tensor>& tensors() const { return params_; }
  std::vector<Tensor>& tensors() { return params_; }
  Tensor find(const std::string& name) const;
  std::size_t scalar_count() const;
  void zero_grad();

 private:
  Rng rng_;
  std::vector<Tensor> params_;
};

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  Linear() = default;
  Linear(ParamSet& ps, const std::string& name, int in, int out, bool with_bias = true);
  Tensor operator()(const Tensor& x) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  LayerNorm() = default;
  LayerNorm(ParamSet& ps, const std::string& name, int dim);
  Tensor operator()(const Tensor& x) const { return layernorm(x, gamma, beta, Scalar(1e-6)); }
};

struct Mlp {
  Linear fc1, fc2;

  Mlp() = default;
  Mlp(ParamSet& ps, const std::string& name, int dim, int hidden);
  Tensor operator()(const Tensor& x) const { return fc2(gelu(fc1(x))); }
};

// Scaled dot-product multi-head attention with separate q/k/v projections.
struct Attention {
  int dim = 0;
  int heads = 1;
  Linear q, k, v, out;

  Attention() = default;
  Attention(ParamSet& ps, const std::string& name, int dim, int heads);
  // queries: [..., Lq, dim], context: [..., Lk, dim] with equal leading axes.
  // When `weights` is non-null it receives softmax rows [B*heads, Lq, Lk].
  Tensor operator()(const Tensor& queries, const Tensor& context,
                    std::vector<Scalar>* weights = nullptr) const;
};

// Pre-norm ViT block: x + Attn(LN(x)), then + MLP(LN(.)).
struct SelfAttnBlock {
  LayerNorm norm1, norm2;
  Attention attn;
  Mlp mlp;

  SelfAttnBlock() = default;
  SelfAttnBlock(ParamSet& ps, const std::string& name, int dim, int heads, int mlp_ratio = 4);
  Tensor operator()(const Tensor& x, std::vector<Scalar>* weights = nullptr) const;
};

// Three sub-layer decoder block: self-attention over the queries,
// cross-attention into the context, feed-forward; each pre-norm residual.
struct CrossAttnBlock {
  LayerNorm norm1, norm2, norm3;
  Attention self_attn, cross_attn;
  Mlp mlp;

  CrossAttnBlock() = default;
  CrossAttnBlock(ParamSet& ps, const std::string& name, int dim, int heads, int mlp_ratio = 4);
  Tensor operator()(const Tensor& queries, const Tensor& context) const;
};

// Spatial query expansion: out[i, n, :] = W^T ctx[n, :] + q[i, :].
// q: [k, dim], ctx: [N, dim] -> [k, N, dim].
Tensor expanded_cross_attn(const Tensor& q, const Tensor& ctx, const Tensor& w);

// 3-layer position-wise MLP: in -> hidden -> hidden -> out with GELU between.
struct MlpHead {
  Linear fc1, fc2, fc3;

  MlpHead() = default;
  MlpHead(ParamSet& ps, const std::string& name, int in, int hidden, int out);
  Tensor operator()(const Tensor& x) const { return fc3(gelu(fc2(gelu(fc1(x))))); }
};

// Flattened patches [N, p*p*C] -> linear projection [N, dim].
struct PatchEmbed {
  int patch = 0;
  Linear proj;

  PatchEmbed() = default;
  PatchEmbed(ParamSet& ps, const std::string& name, int patch, int channels, int dim);
  Tensor operator()(const Tensor& patches) const { return proj(patches); }
};

// Fixed 2D sin-cos table [grid_h * grid_w, dim]: the first half of each row
// encodes the patch row, the second half the patch column, each as
// [sin(pos * w_i), cos(pos * w_i)] with w_i = 10000^(-i / (dim/4)).
Tensor sincos_pos_embed_2d(int grid_h, int grid_w, int dim);

// Scatters visible rows back to their patch positions, fills masked ones with
// `token`, then adds `pos` to all N rows.
// visible: [..., Lv, dim] with Lv == mask.num_visible(); token: [dim]; pos: [N, dim].
// With nothing visible, `visible` is an undefined tensor and the result is [N, dim].
Tensor mask_fill(const Tensor& visible, const MaskPattern& mask, const Tensor& token,
                 const Tensor& pos);

// Gathers the rows of the visible patches along axis -2.
Tensor take_visible(const Tensor& x, const MaskPattern& mask);

}  // namespace rmae::inline RMAE_ABI
