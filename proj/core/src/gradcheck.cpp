#include "svit/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "svit/attention.hpp"
#include "svit/kernels.hpp"
#include "svit/rng.hpp"

namespace svit {

namespace {

using Mat = Tensor<double>;

Mat zeros_like(const Mat& m) { return Mat(m.shape()); }

Mat col_sum(const Mat& m) {
  const std::size_t r = m.dim(0), c = m.dim(1);
  Mat out({c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += m[i * c + j];
  return out;
}

// A^T·B and A·B^T without counting.
Mat matmul_tn(const Mat& a, const Mat& b) { return matmul(transpose(a), b); }
Mat matmul_nt(const Mat& a, const Mat& b) { return matmul(a, transpose(b)); }

struct NormCache {
  Mat xhat;
  std::vector<double> inv_std;
};

Mat norm_forward(const Mat& x, const Mat& gamma, const Mat& beta, NormCache& cache) {
  const std::size_t n = x.dim(0), c = x.dim(1);
  cache.xhat = Mat(x.shape());
  cache.inv_std.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0;
    for (std::size_t j = 0; j < c; ++j) mean += x[i * c + j];
    mean /= static_cast<double>(c);
    double var = 0;
    for (std::size_t j = 0; j < c; ++j) var += (x[i * c + j] - mean) * (x[i * c + j] - mean);
    var /= static_cast<double>(c);
    cache.inv_std[i] = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < c; ++j)
      cache.xhat[i * c + j] = (x[i * c + j] - mean) * cache.inv_std[i];
  }
  return layer_norm(x, gamma, beta);
}

Mat norm_backward(const NormCache& cache, const Mat& gamma, const Mat& dout, Mat& dgamma,
                  Mat& dbeta) {
  const std::size_t n = dout.dim(0), c = dout.dim(1);
  Mat dx(dout.shape());
  std::vector<double> dxhat(c);
  for (std::size_t i = 0; i < n; ++i) {
    double mean_d = 0, mean_dx = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const double g = dout[i * c + j];
      dgamma[j] += g * cache.xhat[i * c + j];
      dbeta[j] += g;
      dxhat[j] = g * gamma[j];
      mean_d += dxhat[j];
      mean_dx += dxhat[j] * cache.xhat[i * c + j];
    }
    mean_d /= static_cast<double>(c);
    mean_dx /= static_cast<double>(c);
    for (std::size_t j = 0; j < c; ++j) {
      dx[i * c + j] = cache.inv_std[i] * (dxhat[j] - mean_d - cache.xhat[i * c + j] * mean_dx);
    }
  }
  return dx;
}

double gelu_grad(double x) {
  constexpr double k = 0.7978845608028654;
  const double u = k * (x + 0.044715 * x * x * x);
  const double th = std::tanh(u);
  return 0.5 * (1 + th) + 0.5 * x * (1 - th * th) * k * (1 + 3 * 0.044715 * x * x);
}

struct AttnCache {
  Mat q, k, v;
  std::size_t heads = 1;
  std::vector<Mat> probs;
};

Mat attn_forward(Mat q, Mat k, Mat v, std::size_t heads, AttnCache& cache) {
  const std::size_t c = q.dim(1), d = c / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Mat out({q.dim(0), c});
  cache.probs.clear();
  for (std::size_t h = 0; h < heads; ++h) {
    Mat logits = matmul(slice_cols(q, h * d, d), transpose(slice_cols(k, h * d, d)));
    for (auto& x : logits.data()) x *= scale;
    Mat p = softmax_rows(logits);
    write_cols(out, matmul(p, slice_cols(v, h * d, d)), h * d);
    cache.probs.push_back(std::move(p));
  }
  cache.q = std::move(q);
  cache.k = std::move(k);
  cache.v = std::move(v);
  cache.heads = heads;
  return out;
}

void attn_backward(const AttnCache& cache, const Mat& dout, Mat& dq, Mat& dk, Mat& dv) {
  const std::size_t c = cache.q.dim(1), d = c / cache.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  dq = zeros_like(cache.q);
  dk = zeros_like(cache.k);
  dv = zeros_like(cache.v);
  for (std::size_t h = 0; h < cache.heads; ++h) {
    const Mat& p = cache.probs[h];
    const Mat qh = slice_cols(cache.q, h * d, d);
    const Mat kh = slice_cols(cache.k, h * d, d);
    const Mat vh = slice_cols(cache.v, h * d, d);
    const Mat doh = slice_cols(dout, h * d, d);
    write_cols(dv, matmul_tn(p, doh), h * d);
    Mat dp = matmul_nt(doh, vh);
    const std::size_t r = p.dim(0), n = p.dim(1);
    Mat ds({r, n});
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += p[i * n + j] * dp[i * n + j];
      for (std::size_t j = 0; j < n; ++j)
        ds[i * n + j] = p[i * n + j] * (dp[i * n + j] - dot) * scale;
    }
    write_cols(dq, matmul(ds, kh), h * d);
    write_cols(dk, matmul_tn(ds, qh), h * d);
  }
}

// One plane (XT when rows == true): line l collects tokens idx[l] of the
// query and, for every pool entry, the same tokens of that entry.
struct PlaneCache {
  std::vector<std::vector<std::size_t>> lines;
  std::vector<AttnCache> attn;
};

std::vector<std::vector<std::size_t>> plane_lines(std::size_t h, std::size_t w, bool rows) {
  std::vector<std::vector<std::size_t>> lines;
  const std::size_t count = rows ? h : w, len = rows ? w : h;
  for (std::size_t l = 0; l < count; ++l) {
    std::vector<std::size_t> idx(len);
    for (std::size_t j = 0; j < len; ++j) idx[j] = rows ? l * w + j : j * w + l;
    lines.push_back(std::move(idx));
  }
  return lines;
}

Mat plane_forward(const TokenGrid<double>& q, const MemoryPool<double>& pool,
                  std::size_t heads, bool rows, PlaneCache& cache) {
  const std::size_t c = q.channels();
  cache.lines = plane_lines(q.rows(), q.cols(), rows);
  cache.attn.assign(cache.lines.size(), {});
  Mat out({q.count(), c});
  for (std::size_t l = 0; l < cache.lines.size(); ++l) {
    const auto& idx = cache.lines[l];
    Mat ks({pool.size() * idx.size(), c}), vs({pool.size() * idx.size(), c});
    for (std::size_t e = 0; e < pool.size(); ++e) {
      for (std::size_t j = 0; j < idx.size(); ++j) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          ks[(e * idx.size() + j) * c + ch] = pool.entry(e).keys.tokens()[idx[j] * c + ch];
          vs[(e * idx.size() + j) * c + ch] = pool.entry(e).values.tokens()[idx[j] * c + ch];
        }
      }
    }
    scatter_rows(out, attn_forward(gather_rows(q.tokens(), idx), std::move(ks), std::move(vs),
                                   heads, cache.attn[l]),
                 idx);
  }
  return out;
}

void plane_backward(const PlaneCache& cache, const Mat& dout, Mat& dq,
                    std::vector<Mat>& dkeys, std::vector<Mat>& dvalues) {
  const std::size_t c = dout.dim(1);
  for (std::size_t l = 0; l < cache.lines.size(); ++l) {
    const auto& idx = cache.lines[l];
    Mat dql, dkl, dvl;
    attn_backward(cache.attn[l], gather_rows(dout, idx), dql, dkl, dvl);
    for (std::size_t j = 0; j < idx.size(); ++j)
      for (std::size_t ch = 0; ch < c; ++ch) dq[idx[j] * c + ch] += dql[j * c + ch];
    for (std::size_t e = 0; e < dkeys.size(); ++e) {
      for (std::size_t j = 0; j < idx.size(); ++j) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          dkeys[e][idx[j] * c + ch] += dkl[(e * idx.size() + j) * c + ch];
          dvalues[e][idx[j] * c + ch] += dvl[(e * idx.size() + j) * c + ch];
        }
      }
    }
  }
}

struct Forward {
  Mat ln1;
  NormCache ln1_cache;
  Mat q, k, v;
  std::vector<std::vector<std::size_t>> tiles;
  std::vector<AttnCache> spatial;
  Mat attended, o;
  MemoryPool<double> pool;
  Mat q_tilde;
  PlaneCache xt_cache, ty_cache;
  Mat pxt, pty, oxt, oty;
  Mat y, ln2;
  NormCache ln2_cache;
  Mat pre, act;
  Mat z;
};

Forward run_forward(const LayerProblem& p, const MemoryEntry<double>* frozen) {
  const auto& w = p.weights;
  const auto& aw = w.attention;
  if (aw.memory_offset_embedding) {
    throw ConfigError("gradcheck does not support the memory offset embedding");
  }
  aw.validate();
  const std::size_t h = p.x.rows(), wd = p.x.cols(), c = p.x.channels();
  const Mat& x = p.x.tokens();
  Forward f;
  f.ln1 = norm_forward(x, w.ln1_gamma, w.ln1_beta, f.ln1_cache);
  f.q = matmul(f.ln1, aw.w_q);
  f.k = matmul(f.ln1, aw.w_k);
  f.v = matmul(f.ln1, aw.w_v);
  if (p.window) {
    f.tiles = window_partition(h, wd, *p.window);
  } else {
    f.tiles.assign(1, {});
    for (std::size_t i = 0; i < h * wd; ++i) f.tiles[0].push_back(i);
  }
  f.spatial.assign(f.tiles.size(), {});
  f.attended = Mat({h * wd, c});
  for (std::size_t t = 0; t < f.tiles.size(); ++t) {
    const auto& tile = f.tiles[t];
    scatter_rows(f.attended,
                 attn_forward(gather_rows(f.q, tile), gather_rows(f.k, tile),
                              gather_rows(f.v, tile), aw.heads, f.spatial[t]),
                 tile);
  }
  f.o = matmul(f.attended, aw.w_o);
  if (frozen) {
    f.pool = p.pool.pushed(p.frame_index, frozen->keys, frozen->values);
  } else {
    f.pool = p.pool.pushed(p.frame_index, TokenGrid<double>(h, wd, f.k),
                           TokenGrid<double>(h, wd, f.v));
  }
  f.q_tilde = matmul(f.o, aw.w_tq);
  const TokenGrid<double> qg(h, wd, f.q_tilde);
  f.pxt = plane_forward(qg, f.pool, aw.heads, true, f.xt_cache);
  f.pty = plane_forward(qg, f.pool, aw.heads, false, f.ty_cache);
  f.oxt = matmul(f.pxt, aw.w_to_xt);
  f.oty = matmul(f.pty, aw.w_to_ty);
  f.y = Mat(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double fused = f.o[i] + aw.alpha_xt[i % c] * f.oxt[i] + aw.alpha_ty[i % c] * f.oty[i];
    f.y[i] = fused + x[i];
  }
  f.ln2 = norm_forward(f.y, w.ln2_gamma, w.ln2_beta, f.ln2_cache);
  f.pre = add_row_bias(matmul(f.ln2, w.mlp.w1), w.mlp.b1);
  f.act = gelu(f.pre);
  f.z = add(add_row_bias(matmul(f.act, w.mlp.w2), w.mlp.b2), f.y);
  return f;
}

LayerWeights<double> zero_gradients(const LayerWeights<double>& w) {
  LayerWeights<double> g = w;
  for (auto& [name, t] : layer_parameters(g)) t->fill(0.0);
  return g;
}

double inner(const Mat& a, const Mat& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::vector<std::pair<std::string, Tensor<double>*>> layer_parameters(LayerWeights<double>& w) {
  auto& a = w.attention;
  return {{"ln1_gamma", &w.ln1_gamma}, {"ln1_beta", &w.ln1_beta}, {"w_q", &a.w_q},
          {"w_k", &a.w_k},             {"w_v", &a.w_v},           {"w_o", &a.w_o},
          {"w_tq", &a.w_tq},           {"w_to_xt", &a.w_to_xt},   {"w_to_ty", &a.w_to_ty},
          {"alpha_xt", &a.alpha_xt},   {"alpha_ty", &a.alpha_ty}, {"ln2_gamma", &w.ln2_gamma},
          {"ln2_beta", &w.ln2_beta},   {"mlp_w1", &w.mlp.w1},     {"mlp_b1", &w.mlp.b1},
          {"mlp_w2", &w.mlp.w2},       {"mlp_b2", &w.mlp.b2}};
}

TokenGrid<double> layer_forward(const LayerProblem& problem,
                                const MemoryEntry<double>* frozen_current) {
  Forward f = run_forward(problem, frozen_current);
  return TokenGrid<double>(problem.x.rows(), problem.x.cols(), std::move(f.z));
}

LayerGradients layer_backward(const LayerProblem& problem, const Tensor<double>& upstream,
                              bool honor_sg) {
  const auto& x = problem.x.tokens();
  if (upstream.shape() != x.shape()) {
    throw DimensionError("layer_backward: upstream " + shape_to_string(upstream.shape()) +
                         " does not match layer output " + shape_to_string(x.shape()));
  }
  const Forward f = run_forward(problem, nullptr);
  const auto& w = problem.weights;
  const auto& aw = w.attention;
  const std::size_t c = x.dim(1);

  LayerGradients g;
  g.weights = zero_gradients(w);
  auto& gw = g.weights;
  auto& ga = gw.attention;

  // z = mlp(ln2(y)) + y
  Mat dy = upstream;
  gw.mlp.w2 = matmul_tn(f.act, upstream);
  gw.mlp.b2 = col_sum(upstream);
  Mat dpre = matmul_nt(upstream, w.mlp.w2);
  for (std::size_t i = 0; i < dpre.size(); ++i) dpre[i] *= gelu_grad(f.pre[i]);
  gw.mlp.w1 = matmul_tn(f.ln2, dpre);
  gw.mlp.b1 = col_sum(dpre);
  add_inplace(dy, norm_backward(f.ln2_cache, w.ln2_gamma, matmul_nt(dpre, w.mlp.w1),
                                gw.ln2_gamma, gw.ln2_beta));

  // y = o + α_xt⊙oxt + α_ty⊙oty + x
  g.x = dy;
  Mat d_o = dy;
  Mat doxt(dy.shape()), doty(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i) {
    const std::size_t ch = i % c;
    ga.alpha_xt[ch] += dy[i] * f.oxt[i];
    ga.alpha_ty[ch] += dy[i] * f.oty[i];
    doxt[i] = dy[i] * aw.alpha_xt[ch];
    doty[i] = dy[i] * aw.alpha_ty[ch];
  }
  ga.w_to_xt = matmul_tn(f.pxt, doxt);
  ga.w_to_ty = matmul_tn(f.pty, doty);

  Mat dq_tilde(f.q_tilde.shape());
  std::vector<Mat> dkeys, dvalues;
  for (std::size_t e = 0; e < f.pool.size(); ++e) {
    dkeys.emplace_back(x.shape());
    dvalues.emplace_back(x.shape());
  }
  plane_backward(f.xt_cache, matmul_nt(doxt, aw.w_to_xt), dq_tilde, dkeys, dvalues);
  plane_backward(f.ty_cache, matmul_nt(doty, aw.w_to_ty), dq_tilde, dkeys, dvalues);
  ga.w_tq = matmul_tn(f.o, dq_tilde);
  add_inplace(d_o, matmul_nt(dq_tilde, aw.w_tq));

  ga.w_o = matmul_tn(f.attended, d_o);
  const Mat dattended = matmul_nt(d_o, aw.w_o);
  Mat dq(f.q.shape()), dk(f.k.shape()), dv(f.v.shape());
  for (std::size_t t = 0; t < f.tiles.size(); ++t) {
    Mat dqt, dkt, dvt;
    attn_backward(f.spatial[t], gather_rows(dattended, f.tiles[t]), dqt, dkt, dvt);
    scatter_rows(dq, dqt, f.tiles[t]);
    scatter_rows(dk, dkt, f.tiles[t]);
    scatter_rows(dv, dvt, f.tiles[t]);
  }
  if (!honor_sg) {
    // The current frame is always the newest entry.
    add_inplace(dk, dkeys.back());
    add_inplace(dv, dvalues.back());
  }
  ga.w_q = matmul_tn(f.ln1, dq);
  ga.w_k = matmul_tn(f.ln1, dk);
  ga.w_v = matmul_tn(f.ln1, dv);
  Mat dln1 = matmul_nt(dq, aw.w_q);
  add_inplace(dln1, matmul_nt(dk, aw.w_k));
  add_inplace(dln1, matmul_nt(dv, aw.w_v));
  add_inplace(g.x, norm_backward(f.ln1_cache, w.ln1_gamma, dln1, gw.ln1_gamma, gw.ln1_beta));

  if (honor_sg) {
    for (auto& m : dkeys) m.fill(0.0);
    for (auto& m : dvalues) m.fill(0.0);
  }
  g.memory_keys = std::move(dkeys);
  g.memory_values = std::move(dvalues);
  return g;
}

Tensor<double> finite_diff(const std::function<double(const Tensor<double>&)>& f,
                           const Tensor<double>& theta, double h) {
  if (!(h > 0)) throw ConfigError("finite_diff: step must be positive");
  Tensor<double> grad(theta.shape());
  Tensor<double> probe = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + h;
    const double up = f(probe);
    probe[i] = theta[i] - h;
    const double down = f(probe);
    probe[i] = theta[i];
    grad[i] = (up - down) / (2 * h);
  }
  return grad;
}

double max_relative_error(const Tensor<double>& a, const Tensor<double>& b, double floor) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_relative_error: shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()) + " differ");
  }
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

LayerProblem make_gradcheck_problem(const GradcheckCase& c) {
  Rng rng(c.seed);
  auto uni = [&](Shape s, double lo, double hi) {
    Mat m(std::move(s));
    for (auto& x : m.data()) x = rng.uniform(lo, hi);
    return m;
  };
  const std::size_t ch = c.channels, n = c.rows * c.cols;
  const double a = std::sqrt(1.0 / static_cast<double>(ch));
  const double ah = std::sqrt(1.0 / static_cast<double>(c.mlp_hidden));
  LayerProblem p;
  auto& w = p.weights;
  w.ln1_gamma = uni({ch}, 0.5, 1.5);
  w.ln1_beta = uni({ch}, -0.1, 0.1);
  auto& at = w.attention;
  at.heads = c.heads;
  at.w_q = uni({ch, ch}, -a, a);
  at.w_k = uni({ch, ch}, -a, a);
  at.w_v = uni({ch, ch}, -a, a);
  at.w_o = uni({ch, ch}, -a, a);
  at.w_tq = uni({ch, ch}, -a, a);
  at.w_to_xt = uni({ch, ch}, -a, a);
  at.w_to_ty = uni({ch, ch}, -a, a);
  at.alpha_xt = uni({ch}, -1.0, 1.0);
  at.alpha_ty = uni({ch}, -1.0, 1.0);
  w.ln2_gamma = uni({ch}, 0.5, 1.5);
  w.ln2_beta = uni({ch}, -0.1, 0.1);
  w.mlp.w1 = uni({ch, c.mlp_hidden}, -a, a);
  w.mlp.b1 = uni({c.mlp_hidden}, -0.1, 0.1);
  w.mlp.w2 = uni({c.mlp_hidden, ch}, -ah, ah);
  w.mlp.b2 = uni({ch}, -0.1, 0.1);

  p.pool = MemoryPool<double>(c.capacity);
  for (std::size_t t = 1; t <= c.history; ++t) {
    p.pool = p.pool.pushed(static_cast<std::int64_t>(t),
                           TokenGrid<double>(c.rows, c.cols, uni({n, ch}, -1.0, 1.0)),
                           TokenGrid<double>(c.rows, c.cols, uni({n, ch}, -1.0, 1.0)));
  }
  p.frame_index = static_cast<std::int64_t>(c.history) + 1;
  p.x = TokenGrid<double>(c.rows, c.cols, uni({n, ch}, -1.0, 1.0));
  p.window = c.window;
  return p;
}

Tensor<double> make_gradcheck_upstream(const GradcheckCase& c) {
  Rng rng(c.seed ^ 0x0b57'4ea3ULL);
  Mat u({c.rows * c.cols, c.channels});
  for (auto& x : u.data()) x = rng.uniform(-1.0, 1.0);
  return u;
}

GradcheckResult run_gradcheck(const GradcheckCase& c) {
  GradcheckResult result;
  result.config = c;
  const LayerProblem problem = make_gradcheck_problem(c);
  const Mat upstream = make_gradcheck_upstream(c);

  const Forward base = run_forward(problem, nullptr);
  const MemoryEntry<double> frozen{problem.frame_index,
                                   TokenGrid<double>(c.rows, c.cols, base.k),
                                   TokenGrid<double>(c.rows, c.cols, base.v), true};

  auto loss = [&](const LayerProblem& p, const MemoryEntry<double>* fr) {
    return inner(upstream, layer_forward(p, fr).tokens());
  };

  result.forward_sg_invariant =
      layer_forward(problem, &frozen) == layer_forward(problem, nullptr);

  for (bool honor : {true, false}) {
    auto& errors = honor ? result.errors_sg : result.errors_no_sg;
    const MemoryEntry<double>* fr = honor ? &frozen : nullptr;
    LayerGradients grads = layer_backward(problem, upstream, honor);

    auto params = layer_parameters(grads.weights);
    for (std::size_t i = 0; i < params.size(); ++i) {
      LayerProblem probe = problem;
      Tensor<double>* slot = layer_parameters(probe.weights)[i].second;
      const Tensor<double> theta = *slot;
      auto numeric = finite_diff(
          [&](const Tensor<double>& t) {
            *slot = t;
            return loss(probe, fr);
          },
          theta, c.step);
      errors.emplace_back(params[i].first, max_relative_error(*params[i].second, numeric));
    }
    {
      LayerProblem probe = problem;
      auto numeric = finite_diff(
          [&](const Tensor<double>& t) {
            probe.x.tokens() = t;
            return loss(probe, fr);
          },
          problem.x.tokens(), c.step);
      errors.emplace_back("x", max_relative_error(grads.x, numeric));
    }

    double block = 0;
    for (const auto& m : grads.memory_keys) block = std::max(block, max_abs(m));
    for (const auto& m : grads.memory_values) block = std::max(block, max_abs(m));
    (honor ? result.memory_block_sg : result.memory_block_no_sg) = block;

    if (!honor) {
      // ∂loss/∂(stored entry), holding everything else fixed.
      for (std::size_t e = 0; e < base.pool.size(); ++e) {
        const auto& entry = base.pool.entry(e);
        const bool current = entry.frame_index == problem.frame_index;
        for (bool keys : {true, false}) {
          const Tensor<double>& theta = keys ? entry.keys.tokens() : entry.values.tokens();
          auto numeric = finite_diff(
              [&](const Tensor<double>& t) {
                MemoryEntry<double> replaced = entry;
                (keys ? replaced.keys : replaced.values).tokens() = t;
                if (current) return loss(problem, &replaced);
                LayerProblem probe = problem;
                for (std::size_t j = 0; j < probe.pool.size(); ++j) {
                  if (probe.pool.entry(j).frame_index == entry.frame_index) {
                    probe.pool = probe.pool.with_entry(j, replaced);
                  }
                }
                return loss(probe, nullptr);
              },
              theta, c.step);
          const auto& analytic = keys ? grads.memory_keys[e] : grads.memory_values[e];
          errors.emplace_back(std::string(keys ? "memory_k" : "memory_v") + "[frame " +
                                  std::to_string(entry.frame_index) + "]",
                              max_relative_error(analytic, numeric));
        }
      }
    }
    for (const auto& [name, err] : errors) result.max_error = std::max(result.max_error, err);
  }
  return result;
}

std::string format_gradcheck_report(const std::vector<GradcheckResult>& results,
                                    double tolerance) {
  std::string out;
  char line[200];
  double worst = 0, block_sg = 0, block_no_sg = 0;
  bool invariant = true;
  std::snprintf(line, sizeof line, "%-6s %-7s %-6s %-7s %-14s %-14s %-14s %s\n", "seed", "grid",
                "heads", "window", "max_rel_err", "mem_block_sg", "mem_block_off", "status");
  out += line;
  for (const auto& r : results) {
    const auto& c = r.config;
    const bool ok = r.max_error <= tolerance && r.memory_block_sg == 0.0 &&
                    r.memory_block_no_sg > 0.0 && r.forward_sg_invariant;
    const std::string grid = std::to_string(c.rows) + "x" + std::to_string(c.cols);
    std::snprintf(line, sizeof line, "%-6llu %-7s %-6zu %-7s %-14.3e %-14.3e %-14.3e %s\n",
                  static_cast<unsigned long long>(c.seed), grid.c_str(), c.heads,
                  c.window ? std::to_string(*c.window).c_str() : "none", r.max_error,
                  r.memory_block_sg, r.memory_block_no_sg, ok ? "PASS" : "FAIL");
    out += line;
    worst = std::max(worst, r.max_error);
    block_sg = std::max(block_sg, r.memory_block_sg);
    block_no_sg = results.size() && &r == &results.front()
                      ? r.memory_block_no_sg
                      : std::min(block_no_sg, r.memory_block_no_sg);
    invariant = invariant && r.forward_sg_invariant;
  }
  const bool pass = worst <= tolerance && block_sg == 0.0 && block_no_sg > 0.0 && invariant;
  out += "\n";
  std::snprintf(line, sizeof line,
                "cases=%zu\nmax_rel_err=%.6e\ntolerance=%.1e\nrel_err_floor=%.1e\n",
                results.size(), worst, tolerance, kRelativeErrorFloor);
  out += line;
  std::snprintf(line, sizeof line,
                "memory_block_sg_max=%.6e\nmemory_block_nosg_min=%.6e\nforward_sg_invariant=%s\n",
                block_sg, block_no_sg, invariant ? "true" : "false");
  out += line;
  out += std::string("status=") + (pass ? "PASS" : "FAIL") + "\n";
  return out;
}

}  // namespace svit
