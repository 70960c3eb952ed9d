#pragma once

#include <map>

#include "strand/calculus.hpp"

namespace strand {

// ---------------------------------------------------------------------------
// Forms in the complex frame of the standard torus complex structure
//   z_j = x_{2j} + i x_{2j+1}   (axes 0-based, pairs (0,1), (2,3)),
//   J dx_{2j} = -? : J acts on vectors by J d/dx_{2j} = d/dx_{2j+1}.
// A CpqForm stores one complex coefficient field per monomial
// dz^P ^ dzbar^Q (P ascending, then Q ascending).
// ---------------------------------------------------------------------------
struct CpqForm {
  const PeriodicGrid* grid = nullptr;
  int degree = 0;
  int ldim = 1;
  // components keyed by (pmask, qmask) over n bits, in fixed enumeration order
  std::vector<std::pair<unsigned, unsigned>> keys;
  std::vector<std::vector<cplx>> comp;  // each npts*ldim

  CpqForm() = default;
  CpqForm(const PeriodicGrid& g, int deg, int ld = 1) : grid(&g), degree(deg), ldim(ld) {
    for (int p = 0; p <= g.n; ++p)
      for (unsigned pm = 0; pm < (1u << g.n); ++pm) {
        if (mask_degree(pm) != p) continue;
        for (unsigned qm = 0; qm < (1u << g.n); ++qm)
          if (mask_degree(pm) + mask_degree(qm) == deg) keys.emplace_back(pm, qm);
      }
    comp.assign(keys.size(), std::vector<cplx>(g.npts * std::size_t(ld), cplx(0)));
  }

  int find(unsigned pm, unsigned qm) const {
    for (int i = 0; i < int(keys.size()); ++i)
      if (keys[i].first == pm && keys[i].second == qm) return i;
    return -1;
  }

  CpqForm& operator+=(const CpqForm& o) {
    for (std::size_t c = 0; c < comp.size(); ++c)
      for (std::size_t i = 0; i < comp[c].size(); ++i) comp[c][i] += o.comp[c][i];
    return *this;
  }
  CpqForm operator+(const CpqForm& o) const {
    CpqForm r = *this;
    r += o;
    return r;
  }
  CpqForm operator-(const CpqForm& o) const {
    CpqForm r = *this;
    for (std::size_t c = 0; c < comp.size(); ++c)
      for (std::size_t i = 0; i < comp[c].size(); ++i) r.comp[c][i] -= o.comp[c][i];
    return r;
  }
  CpqForm operator*(cplx s) const {
    CpqForm r = *this;
    for (auto& cc : r.comp)
      for (auto& v : cc) v *= s;
    return r;
  }

  double sup_norm() const {
    double m = 0;
    for (auto& cc : comp)
      for (auto& v : cc) m = std::max(m, std::abs(v));
    return m;
  }

  // keep only the components of type (p,q)
  CpqForm project(int p, int q) const {
    CpqForm out(*grid, degree, ldim);
    for (std::size_t c = 0; c < keys.size(); ++c)
      if (mask_degree(keys[c].first) == p && mask_degree(keys[c].second) == q) out.comp[c] = comp[c];
    return out;
  }

  double type_residual_outside(int p, int q) const {
    double m = 0;
    for (std::size_t c = 0; c < keys.size(); ++c) {
      if (mask_degree(keys[c].first) == p && mask_degree(keys[c].second) == q) continue;
      for (auto& v : comp[c]) m = std::max(m, std::abs(v));
    }
    return m;
  }
};

// Monomial expansion tables between the real increasing basis and the
// complex frame. dx_{2j} = (dz_j + dzbar_j)/2, dx_{2j+1} = (dz_j - dzbar_j)/(2i).
struct MonomialTerm {
  unsigned pm, qm;
  cplx coeff;
};

inline std::vector<MonomialTerm> expand_real_monomial(int n, unsigned real_mask) {
  std::vector<std::pair<std::pair<unsigned, unsigned>, cplx>> acc = {{{0u, 0u}, cplx(1)}};
  for (int axis = 0; axis < 2 * n; ++axis) {
    if (!(real_mask & (1u << axis))) continue;
    int j = axis / 2;
    bool odd = axis % 2;
    // dx = c1 dz + c2 dzbar
    cplx c1 = odd ? cplx(0, -0.5) : cplx(0.5, 0);
    cplx c2 = odd ? cplx(0, 0.5) : cplx(0.5, 0);
    std::vector<std::pair<std::pair<unsigned, unsigned>, cplx>> next;
    for (auto& [key, coeff] : acc) {
      auto [pm, qm] = key;
      // wedge on the right by dz_j: it must hop over the qm block
      if (!(pm & (1u << j))) {
        int s = merge_sign(pm, 1u << j);
        double hop = (mask_degree(qm) % 2) ? -1.0 : 1.0;
        next.push_back({{pm | (1u << j), qm}, coeff * c1 * double(s) * hop});
      }
      if (!(qm & (1u << j))) {
        int s = merge_sign(qm, 1u << j);
        next.push_back({{pm, qm | (1u << j)}, coeff * c2 * double(s)});
      }
    }
    acc = std::move(next);
  }
  std::map<std::pair<unsigned, unsigned>, cplx> merged;
  for (auto& [key, coeff] : acc) merged[key] += coeff;
  std::vector<MonomialTerm> out;
  for (auto& [key, coeff] : merged)
    if (std::abs(coeff) > 0) out.push_back({key.first, key.second, coeff});
  return out;
}

inline std::vector<std::pair<unsigned, cplx>> expand_complex_monomial(int n, unsigned pm, unsigned qm) {
  // dz_j = dx_{2j} + i dx_{2j+1}, dzbar_j = dx_{2j} - i dx_{2j+1}
  std::vector<std::pair<unsigned, cplx>> acc = {{0u, cplx(1)}};
  auto append_covector = [&](unsigned axis_even, cplx ci) {
    std::vector<std::pair<unsigned, cplx>> next;
    for (auto& [mask, coeff] : acc) {
      unsigned b0 = 1u << axis_even, b1 = 1u << (axis_even + 1);
      if (!(mask & b0)) next.push_back({mask | b0, coeff * double(merge_sign(mask, b0))});
      if (!(mask & b1)) next.push_back({mask | b1, coeff * ci * double(merge_sign(mask, b1))});
    }
    acc = std::move(next);
  };
  for (int j = 0; j < n; ++j)
    if (pm & (1u << j)) append_covector(2 * j, cplx(0, 1));
  for (int j = 0; j < n; ++j)
    if (qm & (1u << j)) append_covector(2 * j, cplx(0, -1));
  std::map<unsigned, cplx> merged;
  for (auto& [mask, coeff] : acc) merged[mask] += coeff;
  std::vector<std::pair<unsigned, cplx>> out;
  for (auto& [mask, coeff] : merged)
    if (std::abs(coeff) > 0) out.push_back({mask, coeff});
  return out;
}

template <class T>
CpqForm to_complex(const Field<T>& f) {
  const PeriodicGrid& g = *f.grid;
  CpqForm out(g, f.degree, f.ldim);
  for (int c = 0; c < g.ncomps(f.degree); ++c) {
    auto terms = expand_real_monomial(g.n, g.comps[f.degree][c]);
    for (auto& t : terms) {
      int target = out.find(t.pm, t.qm);
      auto& dst = out.comp[target];
      const T* src = f.comp(c);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += t.coeff * cplx(src[i]);
    }
  }
  return out;
}

inline CForm to_real_basis(const CpqForm& f) {
  const PeriodicGrid& g = *f.grid;
  CForm out(g, f.degree, f.ldim);
  for (std::size_t c = 0; c < f.keys.size(); ++c) {
    auto terms = expand_complex_monomial(g.n, f.keys[c].first, f.keys[c].second);
    for (auto& [mask, coeff] : terms) {
      int target = g.comp_index[mask];
      cplx* dst = out.comp(target);
      const auto& src = f.comp[c];
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] += coeff * src[i];
    }
  }
  return out;
}

// conjugation swaps (p,q) <-> (q,p) exactly
inline CpqForm conj(const CpqForm& f) {
  CpqForm out(*f.grid, f.degree, f.ldim);
  for (std::size_t c = 0; c < f.keys.size(); ++c) {
    int target = out.find(f.keys[c].second, f.keys[c].first);
    // reordering dzbar^P ^ dz^Q -> dz^Q ^ dzbar^P costs (-1)^{pq}
    double sign = (mask_degree(f.keys[c].first) * mask_degree(f.keys[c].second)) % 2 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < f.comp[c].size(); ++i) out.comp[target][i] = sign * std::conj(f.comp[c][i]);
  }
  return out;
}

namespace detail {
// del: wedge dz^j D_{z_j} in front; dbar: dzbar^j D_{zbar_j} in front.
inline CpqForm complex_derivative(const CpqForm& f, bool bar) {
  const PeriodicGrid& g = *f.grid;
  CpqForm out(g, f.degree + 1, f.ldim);
  std::vector<cplx> t0(g.npts * std::size_t(f.ldim)), t1(t0.size());
  for (std::size_t c = 0; c < f.keys.size(); ++c) {
    auto [pm, qm] = f.keys[c];
    for (int j = 0; j < g.n; ++j) {
      unsigned bit = 1u << j;
      if (!bar && (pm & bit)) continue;
      if (bar && (qm & bit)) continue;
      deriv_axis(g, f.comp[c].data(), t0.data(), 2 * j, f.ldim);
      deriv_axis(g, f.comp[c].data(), t1.data(), 2 * j + 1, f.ldim);
      // D_z = (D_even - i D_odd)/2 ; D_zbar = (D_even + i D_odd)/2
      cplx iunit = bar ? cplx(0, 0.5) : cplx(0, -0.5);
      int sign;
      int target;
      if (!bar) {
        sign = merge_sign(bit, pm);
        target = out.find(pm | bit, qm);
      } else {
        sign = merge_sign(bit, qm);
        // dzbar^j must hop over the whole dz^P block
        if (mask_degree(pm) % 2) sign = -sign;
        target = out.find(pm, qm | bit);
      }
      auto& dst = out.comp[target];
      for (std::size_t i = 0; i < dst.size(); ++i)
        dst[i] += double(sign) * (0.5 * t0[i] + iunit * t1[i]);
    }
  }
  return out;
}
}  // namespace detail

inline CpqForm del(const CpqForm& f) { return detail::complex_derivative(f, false); }
inline CpqForm dbar(const CpqForm& f) { return detail::complex_derivative(f, true); }

// wedge in the complex frame, with an optional value combiner
template <class Combine>
CpqForm cwedge_with(const CpqForm& a, const CpqForm& b, int out_ldim, Combine&& combine) {
  const PeriodicGrid& g = *a.grid;
  CpqForm out(g, a.degree + b.degree, out_ldim);
  for (std::size_t ca = 0; ca < a.keys.size(); ++ca) {
    auto [pa, qa] = a.keys[ca];
    for (std::size_t cb = 0; cb < b.keys.size(); ++cb) {
      auto [pb, qb] = b.keys[cb];
      int sp = merge_sign(pa, pb), sq = merge_sign(qa, qb);
      if (sp == 0 || sq == 0) continue;
      // dzbar^{Qa} block hops over dz^{Pb} block
      int hop = (mask_degree(qa) * mask_degree(pb)) % 2 ? -1 : 1;
      double sign = double(sp * sq * hop);
      int target = out.find(pa | pb, qa | qb);
      const auto& xa = a.comp[ca];
      const auto& xb = b.comp[cb];
      auto& dst = out.comp[target];
      for (std::size_t p = 0; p < g.npts; ++p)
        combine(sign, &xa[p * a.ldim], &xb[p * b.ldim], &dst[p * out_ldim]);
    }
  }
  return out;
}

inline CpqForm cwedge(const CpqForm& a, const CpqForm& b) {
  int ld = std::max(a.ldim, b.ldim);
  if (a.ldim != 1 && b.ldim != 1) throw dimension_error("cwedge: two Lie-valued factors");
  return cwedge_with(a, b, ld, [la = a.ldim, lb = b.ldim, ld](double s, const cplx* x, const cplx* y, cplx* o) {
    for (int l = 0; l < ld; ++l) o[l] += s * x[la == 1 ? 0 : l] * y[lb == 1 ? 0 : l];
  });
}

inline CpqForm cwedge_pair(const CpqForm& a, const CpqForm& b, const QuadraticLieAlgebra& alg) {
  return cwedge_with(a, b, 1, [&alg](double s, const cplx* x, const cplx* y, cplx* o) {
    o[0] += s * alg.pair_values(x, y);
  });
}

// C-bilinear pairing of holomorphic-gauge value coefficients: the compact
// generators are i-multiples of the stored unit coefficients, so the
// extension of kappa acts as -kappa on stored values.
inline CpqForm cwedge_pair_hol(const CpqForm& a, const CpqForm& b, const QuadraticLieAlgebra& alg) {
  return cwedge_with(a, b, 1, [&alg](double s, const cplx* x, const cplx* y, cplx* o) {
    o[0] -= s * alg.pair_values(x, y);
  });
}

// d = del + dbar on complex components (exact at the stencil level)
inline CpqForm dc_complex(const CpqForm& f) {
  CpqForm a = del(f), b = dbar(f);
  // d^c = i (dbar - del)
  CpqForm out = (b - a) * cplx(0, 1);
  return out;
}

// Convenience operators on real forms.
inline RForm dc(const RForm& f) {
  CpqForm z = to_complex(f);
  CForm back = to_real_basis(dc_complex(z));
  return real_part(back);
}

// (p,q)-projections of a real or complex form, returned in the real basis.
template <class T>
CForm type_project(const Field<T>& f, int p, int q) {
  CpqForm z = to_complex(f);
  return to_real_basis(z.project(p, q));
}

template <class T>
double type_residual(const Field<T>& f, int p, int q) {
  return to_complex(f).type_residual_outside(p, q);
}

}  // namespace strand
