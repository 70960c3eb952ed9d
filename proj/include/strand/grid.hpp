#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "strand/common.hpp"

namespace strand {

// Increasing multi-indices on up to 4 axes are stored as bitmasks.
inline int mask_degree(unsigned m) { return __builtin_popcount(m); }

// Sign of sorting the concatenation (A, B) of two disjoint increasing
// multi-indices into increasing order; 0 if they intersect.
inline int merge_sign(unsigned a, unsigned b) {
  if (a & b) return 0;
  int sign = 1;
  // count transpositions: for each bit of a, the bits of b below it must hop over it
  for (unsigned bb = b; bb; bb &= bb - 1) {
    unsigned bit = bb & (0u - bb);
    int above = __builtin_popcount(a & ~(bit - 1) & ~bit);
    if (above & 1) sign = -sign;
  }
  return sign;
}

// ---------------------------------------------------------------------------
// Flat periodic grid discretizing T^{2n}, n = 1 or 2.
// ---------------------------------------------------------------------------
struct PeriodicGrid {
  int n = 1;                         // complex dimension
  std::array<int, 4> sizes{};        // per-axis point counts (2n axes used)
  std::array<double, 4> lengths{};   // per-axis periods
  std::array<std::size_t, 4> stride{};
  std::size_t npts = 0;

  // comps[k] lists the increasing multi-index masks of degree k,
  // comp_index[mask] recovers the position.
  std::vector<std::vector<unsigned>> comps;
  std::array<int, 16> comp_index{};

  PeriodicGrid() = default;
  PeriodicGrid(int n_, std::array<int, 4> sz, std::array<double, 4> len = {}) {
    n = n_;
    if (n != 1 && n != 2) throw config_error("complex dimension must be 1 or 2");
    sizes = sz;
    lengths = len;
    for (int a = 0; a < dim(); ++a) {
      if (sizes[a] < 8 || sizes[a] % 2 != 0)
        throw config_error("grid sizes must be even and at least 8");
      if (lengths[a] <= 0) lengths[a] = 2.0 * kPi;
    }
    npts = 1;
    for (int a = dim() - 1; a >= 0; --a) {
      stride[a] = npts;
      npts *= std::size_t(sizes[a]);
    }
    // degrees beyond dim() keep empty component lists, so that e.g. a 3-form
    // on T^2 is representable (and identically zero)
    comps.resize(5);
    comp_index.fill(-1);
    for (unsigned m = 0; m < (1u << dim()); ++m) comps[mask_degree(m)].push_back(m);
    for (auto& list : comps) std::sort(list.begin(), list.end());
    for (int k = 0; k <= dim(); ++k)
      for (int c = 0; c < int(comps[k].size()); ++c) comp_index[comps[k][c]] = c;
  }

  int dim() const { return 2 * n; }
  double spacing(int axis) const { return lengths[axis] / sizes[axis]; }
  double min_spacing() const {
    double h = spacing(0);
    for (int a = 1; a < dim(); ++a) h = std::min(h, spacing(a));
    return h;
  }
  double cell_volume() const {
    double v = 1;
    for (int a = 0; a < dim(); ++a) v *= spacing(a);
    return v;
  }
  double volume() const { return cell_volume() * double(npts); }
  int ncomps(int degree) const { return int(comps[degree].size()); }

  void coords(std::size_t p, double* x) const {
    for (int a = 0; a < dim(); ++a) {
      std::size_t i = (p / stride[a]) % std::size_t(sizes[a]);
      x[a] = double(i) * spacing(a);
    }
  }

  bool same_shape(const PeriodicGrid& o) const {
    return n == o.n && sizes == o.sizes && lengths == o.lengths;
  }
};

// ---------------------------------------------------------------------------
// 4th-order periodic central differences. Difference operators along
// distinct axes commute exactly, which is what makes d o d vanish to
// roundoff.
// ---------------------------------------------------------------------------
template <class T>
void deriv_axis(const PeriodicGrid& g, const T* in, T* out, int axis, int ldim) {
  const int na = g.sizes[axis];
  const std::size_t S = g.stride[axis] * std::size_t(ldim);
  const std::size_t line = std::size_t(na) * S;
  const std::size_t nlines = g.npts * std::size_t(ldim) / std::size_t(na);
  const double w1 = 8.0 / (12.0 * g.spacing(axis));
  const double w2 = -1.0 / (12.0 * g.spacing(axis));
  parallel_for(nlines, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t ln = lo; ln < hi; ++ln) {
      const std::size_t base = (ln / S) * line + (ln % S);
      for (int i = 0; i < na; ++i) {
        int ip1 = i + 1 < na ? i + 1 : 0;
        int ip2 = i + 2 < na ? i + 2 : i + 2 - na;
        int im1 = i >= 1 ? i - 1 : na - 1;
        int im2 = i >= 2 ? i - 2 : i + na - 2;
        out[base + std::size_t(i) * S] =
            w1 * (in[base + std::size_t(ip1) * S] - in[base + std::size_t(im1) * S]) +
            w2 * (in[base + std::size_t(ip2) * S] - in[base + std::size_t(im2) * S]);
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Degree-k differential form with scalar, complex, or Lie-algebra values.
// Coefficients are stored on strictly increasing multi-indices,
// component-major, Lie index fastest.
// ---------------------------------------------------------------------------
template <class T>
struct Field {
  const PeriodicGrid* grid = nullptr;
  int degree = 0;
  int ldim = 1;
  std::vector<T> data;

  Field() = default;
  Field(const PeriodicGrid& g, int deg, int ld = 1)
      : grid(&g), degree(deg), ldim(ld),
        data(std::size_t(g.ncomps(deg)) * g.npts * std::size_t(ld), T(0)) {}

  std::size_t comp_stride() const { return grid->npts * std::size_t(ldim); }
  T* comp(int c) { return data.data() + std::size_t(c) * comp_stride(); }
  const T* comp(int c) const { return data.data() + std::size_t(c) * comp_stride(); }
  T& at(int c, std::size_t p, int l = 0) { return data[std::size_t(c) * comp_stride() + p * ldim + l]; }
  const T& at(int c, std::size_t p, int l = 0) const {
    return data[std::size_t(c) * comp_stride() + p * ldim + l];
  }

  Field& operator+=(const Field& o) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] -= o.data[i];
    return *this;
  }
  template <class S>
  Field& operator*=(S s) {
    for (auto& v : data) v *= s;
    return *this;
  }
  Field operator+(const Field& o) const {
    Field r = *this;
    r += o;
    return r;
  }
  Field operator-(const Field& o) const {
    Field r = *this;
    r -= o;
    return r;
  }
  Field operator*(double s) const {
    Field r = *this;
    r *= s;
    return r;
  }
  Field operator-() const {
    Field r = *this;
    for (auto& v : r.data) v = -v;
    return r;
  }
  void axpy(double s, const Field& o) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += s * o.data[i];
  }

  double sup_norm() const {
    double m = 0;
    for (const auto& v : data) m = std::max(m, double(std::abs(v)));
    return m;
  }
  bool finite() const {
    for (const auto& v : data)
      if (!std::isfinite(double(std::abs(v)))) return false;
    return true;
  }
};

using RForm = Field<double>;
using CForm = Field<cplx>;

inline CForm complexify(const RForm& f) {
  CForm out(*f.grid, f.degree, f.ldim);
  for (std::size_t i = 0; i < f.data.size(); ++i) out.data[i] = f.data[i];
  return out;
}

inline RForm real_part(const CForm& f) {
  RForm out(*f.grid, f.degree, f.ldim);
  for (std::size_t i = 0; i < f.data.size(); ++i) out.data[i] = f.data[i].real();
  return out;
}

inline RForm imag_part(const CForm& f) {
  RForm out(*f.grid, f.degree, f.ldim);
  for (std::size_t i = 0; i < f.data.size(); ++i) out.data[i] = f.data[i].imag();
  return out;
}

inline CForm conj(const CForm& f) {
  CForm out = f;
  for (auto& v : out.data) v = std::conj(v);
  return out;
}

// Exact quadrature for grid sums of periodic trigonometric data.
template <class T>
T integrate_scalar(const Field<T>& f) {
  if (f.degree != 0 || f.ldim != 1) throw dimension_error("integrate_scalar needs a scalar 0-form");
  T s(0);
  for (const auto& v : f.data) s += v;
  return s * f.grid->cell_volume();
}

// ---------------------------------------------------------------------------
// Symmetric 2-tensor field (metrics, Ricci tensors, Lie derivatives of g).
// ---------------------------------------------------------------------------
struct Sym2Field {
  const PeriodicGrid* grid = nullptr;
  std::vector<double> data;  // pair-major: (i<=j) pairs, then points

  Sym2Field() = default;
  explicit Sym2Field(const PeriodicGrid& g)
      : grid(&g), data(std::size_t(npairs(g.dim())) * g.npts, 0.0) {}

  static int npairs(int d) { return d * (d + 1) / 2; }
  static int pair_index(int i, int j, int d) {
    if (i > j) std::swap(i, j);
    // row-major upper triangle
    return i * d - i * (i - 1) / 2 + (j - i);
  }
  double& at(int i, int j, std::size_t p) {
    return data[std::size_t(pair_index(i, j, grid->dim())) * grid->npts + p];
  }
  double at(int i, int j, std::size_t p) const {
    return data[std::size_t(pair_index(i, j, grid->dim())) * grid->npts + p];
  }
  double* comp(int i, int j) {
    return data.data() + std::size_t(pair_index(i, j, grid->dim())) * grid->npts;
  }
  const double* comp(int i, int j) const {
    return data.data() + std::size_t(pair_index(i, j, grid->dim())) * grid->npts;
  }

  MatR point(std::size_t p) const {
    MatR m(grid->dim());
    for (int i = 0; i < grid->dim(); ++i)
      for (int j = i; j < grid->dim(); ++j) m(i, j) = m(j, i) = at(i, j, p);
    return m;
  }
  void set_point(std::size_t p, const MatR& m) {
    for (int i = 0; i < grid->dim(); ++i)
      for (int j = i; j < grid->dim(); ++j) at(i, j, p) = m(i, j);
  }

  static Sym2Field flat(const PeriodicGrid& g) {
    Sym2Field s(g);
    for (int i = 0; i < g.dim(); ++i) std::fill_n(s.comp(i, i), g.npts, 1.0);
    return s;
  }

  Sym2Field& operator+=(const Sym2Field& o) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
  }
  Sym2Field operator+(const Sym2Field& o) const {
    Sym2Field r = *this;
    r += o;
    return r;
  }
  Sym2Field operator-(const Sym2Field& o) const {
    Sym2Field r = *this;
    for (std::size_t i = 0; i < data.size(); ++i) r.data[i] -= o.data[i];
    return r;
  }
  Sym2Field operator*(double s) const {
    Sym2Field r = *this;
    for (auto& v : r.data) v *= s;
    return r;
  }
  void axpy(double s, const Sym2Field& o) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += s * o.data[i];
  }
  double sup_norm() const {
    double m = 0;
    for (double v : data) m = std::max(m, std::abs(v));
    return m;
  }
  bool finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

// Vector fields store contravariant components X^a, one scalar field per axis.
struct VecField {
  const PeriodicGrid* grid = nullptr;
  std::vector<std::vector<double>> comp;

  VecField() = default;
  explicit VecField(const PeriodicGrid& g) : grid(&g), comp(g.dim(), std::vector<double>(g.npts, 0.0)) {}
  double sup_norm() const {
    double m = 0;
    for (auto& c : comp)
      for (double v : c) m = std::max(m, std::abs(v));
    return m;
  }
};

// ---------------------------------------------------------------------------
// Band-limited random fields: low-harmonic trigonometric polynomials used
// by the property tests, so that discretization error stays under the
// stated tolerances.
// ---------------------------------------------------------------------------
struct Band {
  int kmax = 1;      // |k|_inf <= kmax
  int min_ksq = 1;   // modes with k.k < min_ksq are dropped
};

inline std::vector<std::array<int, 4>> band_modes(const PeriodicGrid& g, const Band& band) {
  std::vector<std::array<int, 4>> modes;
  const int d = g.dim();
  std::array<int, 4> k{};
  std::function<void(int)> rec = [&](int axis) {
    if (axis == d) {
      int ksq = 0;
      for (int a = 0; a < d; ++a) ksq += k[a] * k[a];
      if (ksq >= band.min_ksq) modes.push_back(k);
      return;
    }
    for (int v = -band.kmax; v <= band.kmax; ++v) {
      k[axis] = v;
      rec(axis + 1);
    }
  };
  rec(0);
  return modes;
}

inline std::vector<double> random_band_scalar(const PeriodicGrid& g, const Band& band, double amplitude,
                                              Rng& rng, int max_modes = 0) {
  auto modes = band_modes(g, band);
  if (max_modes > 0 && int(modes.size()) > max_modes) {
    // deterministic sparse subset
    std::vector<std::array<int, 4>> pick;
    for (int m = 0; m < max_modes; ++m) pick.push_back(modes[rng.next_u64() % modes.size()]);
    modes = std::move(pick);
  }
  std::vector<double> out(g.npts, 0.0);
  std::vector<double> ca(modes.size()), sa(modes.size());
  double norm = 0;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    ca[m] = rng.sym();
    sa[m] = rng.sym();
    norm += std::abs(ca[m]) + std::abs(sa[m]);
  }
  if (norm == 0) norm = 1;
  const double scale = amplitude / norm;
  // evaluate each mode through per-axis phase tables
  std::vector<cplx> axis_table;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    std::vector<std::vector<cplx>> tables(g.dim());
    for (int a = 0; a < g.dim(); ++a) {
      tables[a].resize(g.sizes[a]);
      for (int i = 0; i < g.sizes[a]; ++i) {
        double ph = 2.0 * kPi * modes[m][a] * double(i) / double(g.sizes[a]);
        tables[a][i] = cplx(std::cos(ph), std::sin(ph));
      }
    }
    parallel_for(g.npts, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t p = lo; p < hi; ++p) {
        cplx z(1, 0);
        for (int a = 0; a < g.dim(); ++a)
          z *= tables[a][(p / g.stride[a]) % std::size_t(g.sizes[a])];
        out[p] += scale * (ca[m] * z.real() + sa[m] * z.imag());
      }
    });
  }
  return out;
}

inline RForm random_band_form(const PeriodicGrid& g, int degree, int ldim, const Band& band,
                              double amplitude, Rng& rng, int max_modes = 0) {
  RForm f(g, degree, ldim);
  for (int c = 0; c < g.ncomps(degree); ++c)
    for (int l = 0; l < ldim; ++l) {
      auto s = random_band_scalar(g, band, amplitude, rng, max_modes);
      for (std::size_t p = 0; p < g.npts; ++p) f.at(c, p, l) = s[p];
    }
  return f;
}

}  // namespace strand
