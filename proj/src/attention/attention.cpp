// Copyright 2026 The lipscert Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "attention/attention.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "core/linalg.hpp"
#include "layers/affine.hpp"

namespace lipscert {

void ScsaParams::validate() const {
  require_rank(wq, 2, "attention wq");
  if (wk.shape() != wq.shape() || wv.shape() != wq.shape()) {
    throw DimensionError("attention: wq " + shape_str(wq.shape()) + ", wk " +
                         shape_str(wk.shape()) + ", wv " + shape_str(wv.shape()) +
                         " must share one shape");
  }
  if (!wq.all_finite() || !wk.all_finite() || !wv.all_finite()) {
    throw NumericError("attention: non-finite projection weight");
  }
}

namespace {

std::size_t check_input(const Tensor& x, std::size_t in_dim, const char* what) {
  require_rank(x, 2, what);
  if (x.cols() != in_dim) {
    throw DimensionError(std::string(what) + ": input " + shape_str(x.shape()) +
                         " does not match projection input dim " + std::to_string(in_dim));
  }
  if (x.rows() == 0) throw DimensionError(std::string(what) + ": needs N >= 1");
  if (!x.all_finite()) throw NumericError(std::string(what) + ": non-finite input");
  return x.rows();
}

// Row-normalize u by sqrt(‖u_i‖² + eps).
Tensor normalize_rows(const Tensor& u, double eps, std::vector<double>& s) {
  const std::size_t n = u.rows(), d = u.cols();
  s.assign(n, 0.0);
  Tensor q(u.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double ss = eps;
    for (std::size_t a = 0; a < d; ++a) ss += u(i, a) * u(i, a);
    s[i] = std::sqrt(ss);
    for (std::size_t a = 0; a < d; ++a) q(i, a) = u(i, a) / s[i];
  }
  return q;
}

// du_i = (dq_i − q_i (q_i·dq_i)) / s_i
Tensor normalize_rows_vjp(const Tensor& q, const std::vector<double>& s, const Tensor& dq) {
  const std::size_t n = q.rows(), d = q.cols();
  Tensor du(q.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double qd = 0.0;
    for (std::size_t a = 0; a < d; ++a) qd += q(i, a) * dq(i, a);
    for (std::size_t a = 0; a < d; ++a) du(i, a) = (dq(i, a) - q(i, a) * qd) / s[i];
  }
  return du;
}

// In-place row softmax with max shift.
void softmax_rows(Tensor& logits) {
  const std::size_t n = logits.rows(), m = logits.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* r = logits.data() + i * m;
    const double mx = *std::max_element(r, r + m);
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      r[j] = std::exp(r[j] - mx);
      z += r[j];
    }
    for (std::size_t j = 0; j < m; ++j) r[j] /= z;
  }
}

// dS = P ⊙ (dP − rowdot(dP, P))
Tensor softmax_rows_vjp(const Tensor& p, const Tensor& dp) {
  const std::size_t n = p.rows(), m = p.cols();
  Tensor ds(p.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double dot_row = 0.0;
    for (std::size_t j = 0; j < m; ++j) dot_row += dp(i, j) * p(i, j);
    for (std::size_t j = 0; j < m; ++j) ds(i, j) = p(i, j) * (dp(i, j) - dot_row);
  }
  return ds;
}

// Accumulate dW += xᵀ du and dx += du Wᵀ.
void projection_vjp(const Tensor& x, const Tensor& w, const Tensor& du, Tensor& dw, Tensor& dx) {
  dw = matmul_tn(x, du);
  gemm_nt(du.data(), w.data(), dx.data(), x.rows(), w.cols(), w.rows(), true);
}

}  // namespace

Tensor scsa_forward(const Tensor& x, const ScsaParams& params, AttentionState* state) {
  params.validate();
  check_input(x, params.in_dim(), "scsa_forward");
  if (!(params.eps > 0.0)) throw std::invalid_argument("scsa: eps must be > 0");

  AttentionState st;
  st.uq = matmul(x, params.wq);
  st.uk = matmul(x, params.wk);
  st.uv = matmul(x, params.wv);
  st.q = normalize_rows(st.uq, params.eps, st.sq);
  st.k = normalize_rows(st.uk, params.eps, st.sk);
  st.v = normalize_rows(st.uv, params.eps, st.sv);
  st.p = matmul_nt(st.q, st.k);
  for (double& e : st.p.values()) e *= params.tau;
  softmax_rows(st.p);
  Tensor out = matmul(st.p, st.v);
  for (double& e : out.values()) e *= params.nu;
  if (state) *state = std::move(st);
  return out;
}

ScsaGrads scsa_vjp(const Tensor& x, const ScsaParams& params, const AttentionState& st,
                   const Tensor& g) {
  const std::size_t n = check_input(x, params.in_dim(), "scsa_vjp");
  if (g.shape() != Shape{n, params.head_dim()}) {
    throw DimensionError("scsa_vjp: cotangent " + shape_str(g.shape()) + " does not match output");
  }
  if (!g.all_finite()) throw NumericError("scsa_vjp: non-finite cotangent");
  ScsaGrads out;
  const Tensor pv = matmul(st.p, st.v);
  out.dnu = dot(g, pv);
  const Tensor da = params.nu * g;
  const Tensor dp = matmul_nt(da, st.v);
  const Tensor dv = matmul_tn(st.p, da);
  const Tensor ds = softmax_rows_vjp(st.p, dp);
  const Tensor qk = matmul_nt(st.q, st.k);
  out.dtau = dot(ds, qk);
  const Tensor dl = params.tau * ds;
  const Tensor dq = matmul(dl, st.k);
  const Tensor dk = matmul_tn(dl, st.q);

  out.dx = Tensor(x.shape());
  projection_vjp(x, params.wq, normalize_rows_vjp(st.q, st.sq, dq), out.dwq, out.dx);
  projection_vjp(x, params.wk, normalize_rows_vjp(st.k, st.sk, dk), out.dwk, out.dx);
  projection_vjp(x, params.wv, normalize_rows_vjp(st.v, st.sv, dv), out.dwv, out.dx);
  return out;
}

namespace {

// (1/s)(I − uuᵀ/s²) Wᵀ for row u of the projection, [D_h × D].
Tensor normalized_projection_jacobian(const Tensor& u, std::size_t row, double s,
                                      const Tensor& w) {
  const std::size_t dh = w.cols(), d = w.rows();
  Tensor m({dh, dh});
  for (std::size_t a = 0; a < dh; ++a)
    for (std::size_t b = 0; b < dh; ++b)
      m(a, b) = ((a == b ? 1.0 : 0.0) - u(row, a) * u(row, b) / (s * s)) / s;
  Tensor out({dh, d});
  gemm_nt(m.data(), w.data(), out.data(), dh, dh, d);
  return out;
}

}  // namespace

Tensor scsa_jacobian(const Tensor& x, const ScsaParams& params) {
  AttentionState st;
  scsa_forward(x, params, &st);
  const std::size_t n = x.rows(), d = params.in_dim(), dh = params.head_dim();

  std::vector<Tensor> qt(n), kt(n), vt(n);
  for (std::size_t i = 0; i < n; ++i) {
    qt[i] = normalized_projection_jacobian(st.uq, i, st.sq[i], params.wq);
    kt[i] = normalized_projection_jacobian(st.uk, i, st.sk[i], params.wk);
    vt[i] = normalized_projection_jacobian(st.uv, i, st.sv[i], params.wv);
  }

  Tensor jac({n * dh, n * d});
  const double nt = params.nu * params.tau;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor p_row({n});
    for (std::size_t l = 0; l < n; ++l) p_row[l] = st.p(i, l);
    const Tensor m = matmul_tn(st.v, softmax_jacobian(p_row));  // Vᵀ P⁽ⁱ⁾, [D_h × N]
    const Tensor diag_term = matmul(matmul(m, st.k), qt[i]);    // Vᵀ P⁽ⁱ⁾ K Q̃_i
    for (std::size_t j = 0; j < n; ++j) {
      // Vᵀ P⁽ⁱ⁾ E_ji Q K̃_j = (column j of M) ⊗ (q_iᵀ K̃_j)
      std::vector<double> qk(d, 0.0);
      for (std::size_t a = 0; a < dh; ++a)
        for (std::size_t b = 0; b < d; ++b) qk[b] += st.q(i, a) * kt[j](a, b);
      for (std::size_t a = 0; a < dh; ++a)
        for (std::size_t b = 0; b < d; ++b) {
          double v = nt * m(a, j) * qk[b] + params.nu * st.p(i, j) * vt[j](a, b);
          if (i == j) v += nt * diag_term(a, b);
          jac(i * dh + a, j * d + b) = v;
        }
    }
  }
  return jac;
}

Tensor softmax_jacobian(const Tensor& p_row) {
  if (p_row.rank() != 1) throw DimensionError("softmax_jacobian: expects a vector");
  const std::size_t n = p_row.size();
  Tensor j({n, n});
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) j(a, b) = (a == b ? p_row[a] : 0.0) - p_row[a] * p_row[b];
  return j;
}

Tensor dot_product_attention(const Tensor& x, const Tensor& wq, const Tensor& wk,
                             const Tensor& wv, AttentionState* state) {
  const ScsaParams shapes{wq, wk, wv};
  shapes.validate();
  check_input(x, wq.dim(0), "dot_product_attention");
  AttentionState st;
  st.q = matmul(x, wq);
  st.k = matmul(x, wk);
  st.v = matmul(x, wv);
  st.p = matmul_nt(st.q, st.k);
  const double scale = 1.0 / std::sqrt(static_cast<double>(wq.dim(1)));
  for (double& e : st.p.values()) e *= scale;
  softmax_rows(st.p);
  Tensor out = matmul(st.p, st.v);
  if (state) *state = std::move(st);
  return out;
}

DotAttentionGrads dot_product_attention_vjp(const Tensor& x, const Tensor& wq, const Tensor& wk,
                                            const Tensor& wv, const AttentionState& st,
                                            const Tensor& g) {
  const std::size_t n = check_input(x, wq.dim(0), "dot_product_attention_vjp");
  if (g.shape() != Shape{n, wq.dim(1)}) {
    throw DimensionError("dot_product_attention_vjp: cotangent shape");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(wq.dim(1)));
  const Tensor dp = matmul_nt(g, st.v);
  const Tensor dv = matmul_tn(st.p, g);
  const Tensor dl = scale * softmax_rows_vjp(st.p, dp);
  const Tensor dq = matmul(dl, st.k);
  const Tensor dk = matmul_tn(dl, st.q);
  DotAttentionGrads out;
  out.dx = Tensor(x.shape());
  projection_vjp(x, wq, dq, out.dwq, out.dx);
  projection_vjp(x, wk, dk, out.dwk, out.dx);
  projection_vjp(x, wv, dv, out.dwv, out.dx);
  return out;
}

std::string attention_kind_name(AttentionKind k) { return k == AttentionKind::Scsa ? "scsa" : "dot"; }

AttentionKind parse_attention_kind(const std::string& s) {
  if (s == "scsa") return AttentionKind::Scsa;
  if (s == "dot") return AttentionKind::Dot;
  throw std::invalid_argument("unknown attention kind '" + s + "'");
}

namespace {

struct BatchView {
  std::size_t batch, tokens, dim;
};

BatchView batch_view(const Tensor& x, const char* what) {
  if (x.rank() == 2) return {1, x.dim(0), x.dim(1)};
  if (x.rank() == 3) return {x.dim(0), x.dim(1), x.dim(2)};
  throw DimensionError(std::string(what) + ": expected [N,D] or [B,N,D], got " +
                       shape_str(x.shape()));
}

Tensor sample(const Tensor& x, std::size_t b, const BatchView& v) {
  const std::size_t per = v.tokens * v.dim;
  return Tensor({v.tokens, v.dim},
                std::vector<double>(x.data() + b * per, x.data() + (b + 1) * per));
}

std::size_t total_head_dim(const std::vector<ScsaParams>& heads, std::size_t in_dim,
                           const Tensor& w_out) {
  if (heads.empty()) throw DimensionError("multi-head attention: needs K >= 1 heads");
  require_rank(w_out, 2, "multi-head w_out");
  std::size_t total = 0;
  for (const auto& h : heads) {
    h.validate();
    if (h.in_dim() != in_dim) throw DimensionError("multi-head attention: head input dim");
    total += h.head_dim();
  }
  if (total != w_out.dim(0)) {
    throw DimensionError("multi-head attention: head dims sum to " + std::to_string(total) +
                         " but w_out has " + std::to_string(w_out.dim(0)) + " rows");
  }
  return total;
}

}  // namespace

Tensor multi_head_attention(const Tensor& x, const std::vector<ScsaParams>& heads,
                            const Tensor& w_out, AttentionKind kind, MultiHeadCache* cache) {
  const BatchView v = batch_view(x, "multi_head_attention");
  const std::size_t total = total_head_dim(heads, v.dim, w_out);
  const std::size_t k = heads.size();
  const double inv_k = 1.0 / static_cast<double>(k);
  Tensor concat({v.batch * v.tokens, total});
  std::vector<AttentionState> states(cache ? v.batch * k : 0);
  for (std::size_t b = 0; b < v.batch; ++b) {
    const Tensor xb = sample(x, b, v);
    std::size_t col = 0;
    for (std::size_t h = 0; h < k; ++h) {
      AttentionState* st = cache ? &states[b * k + h] : nullptr;
      const Tensor o = kind == AttentionKind::Scsa
                           ? scsa_forward(xb, heads[h], st)
                           : dot_product_attention(xb, heads[h].wq, heads[h].wk, heads[h].wv, st);
      const std::size_t dh = heads[h].head_dim();
      for (std::size_t i = 0; i < v.tokens; ++i)
        for (std::size_t a = 0; a < dh; ++a) concat(b * v.tokens + i, col + a) = inv_k * o(i, a);
      col += dh;
    }
  }
  Tensor y = affine(concat, w_out, Tensor());
  if (x.rank() == 2) {
    y.reshape({v.tokens, w_out.dim(1)});
  } else {
    y.reshape({v.batch, v.tokens, w_out.dim(1)});
  }
  if (cache) {
    cache->states = std::move(states);
    cache->concat = std::move(concat);
  }
  return y;
}

MultiHeadGrads multi_head_attention_vjp(const Tensor& x, const std::vector<ScsaParams>& heads,
                                        const Tensor& w_out, AttentionKind kind,
                                        const MultiHeadCache& cache, const Tensor& g) {
  const BatchView v = batch_view(x, "multi_head_attention_vjp");
  total_head_dim(heads, v.dim, w_out);
  const std::size_t k = heads.size();
  const double inv_k = 1.0 / static_cast<double>(k);
  const Tensor g2 = g.reshaped({v.batch * v.tokens, w_out.dim(1)});
  AffineGrads proj = affine_vjp(cache.concat, w_out, false, g2);

  MultiHeadGrads out;
  out.dx = Tensor(x.shape());
  out.dw_out = std::move(proj.dw);
  out.heads.resize(k);
  for (std::size_t h = 0; h < k; ++h) {
    out.heads[h].dwq = Tensor(heads[h].wq.shape());
    out.heads[h].dwk = Tensor(heads[h].wk.shape());
    out.heads[h].dwv = Tensor(heads[h].wv.shape());
  }
  for (std::size_t b = 0; b < v.batch; ++b) {
    const Tensor xb = sample(x, b, v);
    std::size_t col = 0;
    for (std::size_t h = 0; h < k; ++h) {
      const std::size_t dh = heads[h].head_dim();
      Tensor gh({v.tokens, dh});
      for (std::size_t i = 0; i < v.tokens; ++i)
        for (std::size_t a = 0; a < dh; ++a) gh(i, a) = inv_k * proj.dx(b * v.tokens + i, col + a);
      col += dh;
      const AttentionState& st = cache.states[b * k + h];
      Tensor dx;
      ScsaGrads& acc = out.heads[h];
      if (kind == AttentionKind::Scsa) {
        ScsaGrads gr = scsa_vjp(xb, heads[h], st, gh);
        acc.dwq += gr.dwq;
        acc.dwk += gr.dwk;
        acc.dwv += gr.dwv;
        acc.dnu += gr.dnu;
        acc.dtau += gr.dtau;
        dx = std::move(gr.dx);
      } else {
        DotAttentionGrads gr =
            dot_product_attention_vjp(xb, heads[h].wq, heads[h].wk, heads[h].wv, st, gh);
        acc.dwq += gr.dwq;
        acc.dwk += gr.dwk;
        acc.dwv += gr.dwv;
        dx = std::move(gr.dx);
      }
      double* dst = out.dx.data() + b * v.tokens * v.dim;
      for (std::size_t i = 0; i < dx.size(); ++i) dst[i] += dx[i];
    }
  }
  return out;
}

}  // namespace lipscert
