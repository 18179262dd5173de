#include "rmae/nn.hpp"

#include <cmath>
#include <numeric>

namespace rmae::inline RMAE_ABI {

Tensor ParamSet::add(const std::string& name, Shape shape, Init init) {
  const std::size_t n = shape_numel(shape);
  std::vector<Scalar> data(n, Scalar(0));
  switch (init) {
    case Init::zeros:
      break;
    case Init::ones:
      std::fill(data.begin(), data.end(), Scalar(1));
      break;
    case Init::xavier: {
      const int fan_in = shape.size() >= 2 ? shape[0] : 1;
      const int fan_out = shape.back();
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (auto& v : data) v = static_cast<Scalar>(rng_.uniform(-bound, bound));
      break;
    }
    case Init::normal02:
      for (auto& v : data) v = static_cast<Scalar>(rng_.normal(0.0, 0.02));
      break;
  }
  Tensor t = Tensor::from(std::move(shape), std::move(data), true);
  t.set_name(name);
  params_.push_back(t);
  return t;
}

Tensor ParamSet::find(const std::string& name) const {
  for (const auto& t : params_)
    if (t.name() == name) return t;
  throw std::out_of_range("no parameter named '" + name + "'");
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : params_) n += t.numel();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& t : params_) t.zero_grad();
}

Linear::Linear(ParamSet& ps, const std::string& name, int in, int out, bool with_bias)
    : weight(ps.add(name + ".weight", {in, out}, Init::xavier)) {
  if (with_bias) bias = ps.add(name + ".bias", {out}, Init::zeros);
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return bias.defined() ? add(y, bias) : y;
}

LayerNorm::LayerNorm(ParamSet& ps, const std::string& name, int dim)
    : gamma(ps.add(name + ".weight", {dim}, Init::ones)),
      beta(ps.add(name + ".bias", {dim}, Init::zeros)) {}

Mlp::Mlp(ParamSet& ps, const std::string& name, int dim, int hidden)
    : fc1(ps, name + ".fc1", dim, hidden), fc2(ps, name + ".fc2", hidden, dim) {}

Attention::Attention(ParamSet& ps, const std::string& name, int dim_, int heads_)
    : dim(dim_),
      heads(heads_),
      q(ps, name + ".q", dim_, dim_),
      k(ps, name + ".k", dim_, dim_),
      v(ps, name + ".v", dim_, dim_),
      out(ps, name + ".proj", dim_, dim_) {
  if (heads_ < 1 || dim_ % heads_ != 0) {
    throw std::invalid_argument("attention width " + std::to_string(dim_) +
                                " not divisible by " + std::to_string(heads_) + " heads");
  }
}

namespace {

// [B, L, dim] -> [B * heads, L, dim / heads]
Tensor split_heads(const Tensor& x, int batch, int len, int heads, int head_dim) {
  Tensor t = reshape(x, {batch, len, heads, head_dim});
  t = transpose(t, 1, 2);
  return reshape(t, {batch * heads, len, head_dim});
}

Tensor merge_heads(const Tensor& x, int batch, int len, int heads, int head_dim) {
  Tensor t = reshape(x, {batch, heads, len, head_dim});
  t = transpose(t, 1, 2);
  return reshape(t, {batch, len, heads * head_dim});
}

}  // namespace

Tensor Attention::operator()(const Tensor& queries, const Tensor& context,
                             std::vector<Scalar>* weights) const {
  const Shape& qs = queries.shape();
  const Shape& cs = context.shape();
  if (qs.size() < 2 || cs.size() != qs.size() || qs.back() != dim || cs.back() != dim ||
      !std::equal(qs.begin(), qs.end() - 2, cs.begin())) {
    throw ShapeError("attention: queries " + shape_str(qs) + " and context " + shape_str(cs) +
                     " incompatible with width " + std::to_string(dim));
  }
  const int lq = qs[qs.size() - 2];
  const int lk = cs[cs.size() - 2];
  const int batch = static_cast<int>(queries.numel() / (static_cast<std::size_t>(lq) * dim));
  const int hd = dim / heads;

  Tensor qh = split_heads(reshape(q(queries), {batch, lq, dim}), batch, lq, heads, hd);
  Tensor kh = split_heads(reshape(k(context), {batch, lk, dim}), batch, lk, heads, hd);
  Tensor vh = split_heads(reshape(v(context), {batch, lk, dim}), batch, lk, heads, hd);

  Tensor logits = scale(matmul(qh, transpose(kh, 1, 2)),
                        Scalar(1) / std::sqrt(static_cast<Scalar>(hd)));
  Tensor attn = softmax(logits);
  if (weights) weights->assign(attn.data().begin(), attn.data().end());
  Tensor mixed = merge_heads(matmul(attn, vh), batch, lq, heads, hd);
  return reshape(out(mixed), qs);
}

SelfAttnBlock::SelfAttnBlock(ParamSet& ps, const std::string& name, int dim, int heads,
                             int mlp_ratio)
    : norm1(ps, name + ".norm1", dim),
      norm2(ps, name + ".norm2", dim),
      attn(ps, name + ".attn", dim, heads),
      mlp(ps, name + ".mlp", dim, dim * mlp_ratio) {}

Tensor SelfAttnBlock::operator()(const Tensor& x, std::vector<Scalar>* weights) const {
  Tensor h = norm1(x);
  Tensor y = add(x, attn(h, h, weights));
  return add(y, mlp(norm2(y)));
}

CrossAttnBlock::CrossAttnBlock(ParamSet& ps, const std::string& name, int dim, int heads,
                               int mlp_ratio)
    : norm1(ps, name + ".norm1", dim),
      norm2(ps, name + ".norm2", dim),
      norm3(ps, name + ".norm3", dim),
      self_attn(ps, name + ".self_attn", dim, heads),
      cross_attn(ps, name + ".cross_attn", dim, heads),
      mlp(ps, name + ".mlp", dim, dim * mlp_ratio) {}

Tensor CrossAttnBlock::operator()(const Tensor& queries, const Tensor& context) const {
  if (queries.shape().back() != context.shape().back()) {
    throw ShapeError("cross-attention: query width " + shape_str(queries.shape()) +
                     " vs context " + shape_str(context.shape()));
  }
  Tensor h = norm1(queries);
  Tensor y = add(queries, self_attn(h, h));
  y = add(y, cross_attn(norm2(y), context));
  return add(y, mlp(norm3(y)));
}

Tensor expanded_cross_attn(const Tensor& q, const Tensor& ctx, const Tensor& w) {
  if (q.rank() != 2 || ctx.rank() != 2 || q.dim(1) != ctx.dim(1) || w.rank() != 2 ||
      w.dim(0) != ctx.dim(1) || w.dim(1) != q.dim(1)) {
    throw ShapeError("expanded_cross_attn: q " + shape_str(q.shape()) + ", context " +
                     shape_str(ctx.shape()) + ", W " + shape_str(w.shape()));
  }
  const int n = ctx.dim(0);
  return add(expand(q, 1, n), matmul(ctx, w));
}

MlpHead::MlpHead(ParamSet& ps, const std::string& name, int in, int hidden, int out)
    : fc1(ps, name + ".fc1", in, hidden),
      fc2(ps, name + ".fc2", hidden, hidden),
      fc3(ps, name + ".fc3", hidden, out) {}

PatchEmbed::PatchEmbed(ParamSet& ps, const std::string& name, int patch_, int channels, int dim)
    : patch(patch_), proj(ps, name, patch_ * patch_ * channels, dim) {}

Tensor sincos_pos_embed_2d(int grid_h, int grid_w, int dim) {
  if (dim % 4 != 0) {
    throw std::invalid_argument("sincos_pos_embed_2d: dim " + std::to_string(dim) +
                                " not divisible by 4");
  }
  const int quarter = dim / 4;
  std::vector<Scalar> table(static_cast<std::size_t>(grid_h) * grid_w * dim);
  for (int r = 0; r < grid_h; ++r)
    for (int c = 0; c < grid_w; ++c) {
      Scalar* row = table.data() + (static_cast<std::size_t>(r) * grid_w + c) * dim;
      for (int i = 0; i < quarter; ++i) {
        const double omega = 1.0 / std::pow(10000.0, static_cast<double>(i) / quarter);
        row[i] = static_cast<Scalar>(std::sin(r * omega));
        row[quarter + i] = static_cast<Scalar>(std::cos(r * omega));
        row[2 * quarter + i] = static_cast<Scalar>(std::sin(c * omega));
        row[3 * quarter + i] = static_cast<Scalar>(std::cos(c * omega));
      }
    }
  return Tensor::from({grid_h * grid_w, dim}, std::move(table));
}

Tensor take_visible(const Tensor& x, const MaskPattern& mask) {
  if (x.rank() < 2 || x.dim(-2) != mask.n) {
    throw ShapeError("take_visible: tensor " + shape_str(x.shape()) + " vs mask of " +
                     std::to_string(mask.n) + " patches");
  }
  const auto vis = mask.visible_indices();
  return gather(x, x.rank() - 2, vis);
}

Tensor mask_fill(const Tensor& visible, const MaskPattern& mask, const Tensor& token,
                 const Tensor& pos) {
  const int lv = mask.num_visible();
  if (!visible.defined() && lv == 0) {
    if (token.rank() != 1 || pos.rank() != 2 || pos.dim(0) != mask.n || pos.dim(1) != token.dim(0)) {
      throw ShapeError("mask_fill: token " + shape_str(token.shape()) + " / position table " +
                       shape_str(pos.shape()) + " do not match");
    }
    return add(expand(token, 0, mask.n), pos);
  }
  if (!visible.defined() || visible.rank() < 2 || visible.dim(-2) != lv) {
    throw ShapeError("mask_fill: " + (visible.defined() ? shape_str(visible.shape()) : "no") +
                     " rows but mask has " +
                     std::to_string(lv) + " visible patches");
  }
  const int dim = visible.dim(-1);
  if (static_cast<int>(token.numel()) != dim || pos.rank() != 2 || pos.dim(0) != mask.n ||
      pos.dim(1) != dim) {
    throw ShapeError("mask_fill: token " + shape_str(token.shape()) + " / position table " +
                     shape_str(pos.shape()) + " do not match width " + std::to_string(dim));
  }
  const int batch = static_cast<int>(visible.numel() / (static_cast<std::size_t>(lv) * dim));
  std::vector<int> index(static_cast<std::size_t>(mask.n));
  int next = 0;
  for (int i = 0; i < mask.n; ++i) index[i] = mask.is_masked(i) ? lv : next++;

  Tensor rows = reshape(visible, {batch, lv, dim});
  Tensor tok = expand(reshape(token, {1, dim}), 0, batch);  // [batch, 1, dim]
  Tensor filled = gather(concat({rows, tok}, 1), 1, index);
  Shape out_shape = visible.shape();
  out_shape[out_shape.size() - 2] = mask.n;
  return add(reshape(filled, out_shape), pos);
}

}  // namespace rmae::inline RMAE_ABI
