#pragma once
// Uniform periodic grids on [-L, L)^dim, real fields, spectral calculus and norms.
//
// Layout: row-major, axis 0 slowest. Point i along an axis sits at -L + i*h, h = 2L/n.
// Wavenumbers are k = pi*m/L, m in [-n/2, n/2). The Laplacian keeps the Nyquist
// mode so that <-Lap u, u> equals the Parseval gradient norm exactly; first
// derivatives drop it (it has no odd real part).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>
#include <utility>
#include <vector>

#include "nodalflow/errors.hpp"
#include "nodalflow/fft.hpp"

namespace nodalflow {

using Point = std::array<double, 3>;

inline double dot(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Point& a) { return std::sqrt(dot(a, a)); }

struct Grid {
  int dim = 1;
  int n = 16;
  double L = 1.0;

  static Grid make(int dim, int n, double L) {
    if (dim < 1 || dim > 3) throw ConfigError("grid dim must be 1, 2 or 3");
    if (n < 16) throw ConfigError("grid too small: n must be at least 16");
    if ((n & (n - 1)) != 0) throw ConfigError("grid n must be a power of two");
    if (!(L > 0.0) || !std::isfinite(L)) throw ConfigError("grid half-width must be positive");
    return Grid{dim, n, L};
  }

  double h() const { return 2.0 * L / n; }
  double cell_volume() const { return std::pow(h(), dim); }
  std::size_t size() const {
    std::size_t s = 1;
    for (int a = 0; a < dim; ++a) s *= static_cast<std::size_t>(n);
    return s;
  }
  double coord(int i) const { return -L + i * h(); }

  std::array<int, 3> multi_index(std::size_t idx) const {
    std::array<int, 3> m{0, 0, 0};
    for (int a = dim - 1; a >= 0; --a) {
      m[a] = static_cast<int>(idx % n);
      idx /= n;
    }
    return m;
  }
  std::size_t flat(const std::array<int, 3>& m) const {
    std::size_t idx = 0;
    for (int a = 0; a < dim; ++a) idx = idx * n + static_cast<std::size_t>(m[a]);
    return idx;
  }
  Point point(std::size_t idx) const {
    auto m = multi_index(idx);
    Point p{0.0, 0.0, 0.0};
    for (int a = 0; a < dim; ++a) p[a] = coord(m[a]);
    return p;
  }

  bool operator==(const Grid&) const = default;
};

class Field {
 public:
  Field() = default;
  explicit Field(const Grid& g) : grid_(g), v_(g.size(), 0.0) {}
  Field(const Grid& g, std::vector<double> values) : grid_(g), v_(std::move(values)) {
    if (v_.size() != g.size()) throw std::invalid_argument("field size does not match grid");
  }

  template <class Fn>
  static Field from_function(const Grid& g, Fn&& fn) {
    Field f(g);
    for (std::size_t i = 0; i < f.size(); ++i) f.v_[i] = fn(g.point(i));
    return f;
  }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return v_.size(); }
  double operator[](std::size_t i) const { return v_[i]; }
  double& operator[](std::size_t i) { return v_[i]; }
  const std::vector<double>& values() const { return v_; }
  std::vector<double>& values() { return v_; }
  const double* data() const { return v_.data(); }
  double* data() { return v_.data(); }

  bool finite() const {
    return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
  }
  bool is_zero() const {
    return std::all_of(v_.begin(), v_.end(), [](double x) { return x == 0.0; });
  }

  Field operator-() const {
    Field r(grid_);
    for (std::size_t i = 0; i < v_.size(); ++i) r.v_[i] = -v_[i];
    return r;
  }
  Field& operator+=(const Field& o) {
    check_same(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    check_same(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
    return *this;
  }
  Field& operator*=(double s) {
    for (double& x : v_) x *= s;
    return *this;
  }
  // this += s * o
  Field& axpy(double s, const Field& o) {
    check_same(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += s * o.v_[i];
    return *this;
  }

  void check_same(const Field& o) const {
    if (!(grid_ == o.grid_)) throw std::invalid_argument("grid mismatch");
  }

 private:
  Grid grid_;
  std::vector<double> v_;
};

inline Field operator+(Field a, const Field& b) { return a += b; }
inline Field operator-(Field a, const Field& b) { return a -= b; }
inline Field operator*(double s, Field a) { return a *= s; }
inline Field operator*(Field a, double s) { return a *= s; }

// Per-grid spectral tables, shared read-only between callers.
class Spectral {
 public:
  explicit Spectral(const Grid& g) : grid_(g), fft_(detail::real_fft(g.dim, g.n)) {
    const std::size_t ns = fft_->spec_size();
    const int half = g.n / 2 + 1;
    const double dk = M_PI / g.L;
    k2_.assign(ns, 0.0);
    weight_.assign(ns, 0.0);
    for (auto& k : kaxis_) k.assign(ns, 0.0);
    for (std::size_t s = 0; s < ns; ++s) {
      std::array<int, 3> m{0, 0, 0};
      std::size_t rest = s;
      m[g.dim - 1] = static_cast<int>(rest % half);
      rest /= half;
      for (int a = g.dim - 2; a >= 0; --a) {
        m[a] = static_cast<int>(rest % g.n);
        rest /= g.n;
      }
      double k2 = 0.0;
      for (int a = 0; a < g.dim; ++a) {
        int mm = m[a];
        if (a < g.dim - 1 && mm > g.n / 2) mm -= g.n;
        if (a < g.dim - 1 && mm == g.n / 2) mm = -g.n / 2;
        const double k = dk * mm;
        k2 += k * k;
        kaxis_[a][s] = (std::abs(mm) == g.n / 2) ? 0.0 : k;
      }
      k2_[s] = k2;
      const int last = m[g.dim - 1];
      weight_[s] = (last == 0 || last == g.n / 2) ? 1.0 : 2.0;
    }
  }

  static std::shared_ptr<const Spectral> of(const Grid& g) {
    static std::mutex m;
    static std::map<std::tuple<int, int, double>, std::shared_ptr<const Spectral>> cache;
    std::lock_guard<std::mutex> lock(m);
    auto& slot = cache[{g.dim, g.n, g.L}];
    if (!slot) slot = std::make_shared<const Spectral>(g);
    return slot;
  }

  const Grid& grid() const { return grid_; }
  std::size_t spec_size() const { return fft_->spec_size(); }
  const std::vector<double>& k2() const { return k2_; }
  const std::vector<double>& weight() const { return weight_; }
  const std::vector<double>& k(int axis) const { return kaxis_[axis]; }

  detail::CVec forward(const Field& u) const {
    detail::CVec out(spec_size());
    fft_->forward(u.data(), out.data());
    return out;
  }
  // Normalized inverse; consumes the spectrum.
  Field inverse(detail::CVec&& spec) const {
    Field out(grid_);
    fft_->inverse(spec.data(), out.data());
    const double inv = 1.0 / static_cast<double>(grid_.size());
    for (double& x : out.values()) x *= inv;
    return out;
  }
  // Returns u filtered by a real symbol sym(s).
  template <class Sym>
  Field apply(const Field& u, Sym&& sym) const {
    auto spec = forward(u);
    for (std::size_t s = 0; s < spec.size(); ++s) spec[s] *= sym(s);
    return inverse(std::move(spec));
  }

 private:
  Grid grid_;
  std::shared_ptr<const detail::RealFft> fft_;
  std::vector<double> k2_;
  std::vector<double> weight_;
  std::array<std::vector<double>, 3> kaxis_;
};

inline Field laplacian(const Field& u) {
  auto sp = Spectral::of(u.grid());
  const auto& k2 = sp->k2();
  return sp->apply(u, [&](std::size_t s) { return -k2[s]; });
}

// d u / d x_axis, spectral with the Nyquist mode removed.
inline Field derivative(const Field& u, int axis) {
  auto sp = Spectral::of(u.grid());
  const auto& k = sp->k(axis);
  auto spec = sp->forward(u);
  for (std::size_t s = 0; s < spec.size(); ++s) spec[s] *= detail::cplx(0.0, k[s]);
  return sp->inverse(std::move(spec));
}

// (-Lap + a)^{-1} g.
inline Field shifted_inverse(const Field& g, double a) {
  auto sp = Spectral::of(g.grid());
  const auto& k2 = sp->k2();
  return sp->apply(g, [&](std::size_t s) { return 1.0 / (k2[s] + a); });
}

inline double inner(const Field& u, const Field& v) {
  u.check_same(v);
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s * u.grid().cell_volume();
}

inline double integral(const Field& u) {
  double s = 0.0;
  for (double x : u.values()) s += x;
  return s * u.grid().cell_volume();
}

namespace detail {
// h^dim / N * sum_k w_k sym_k Re(a_k conj b_k)
template <class Sym>
double spectral_pairing(const Spectral& sp, const CVec& a, const CVec& b, Sym&& sym) {
  const auto& w = sp.weight();
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    s += w[k] * sym(k) * (a[k].real() * b[k].real() + a[k].imag() * b[k].imag());
  const Grid& g = sp.grid();
  return s * g.cell_volume() / static_cast<double>(g.size());
}
}  // namespace detail

// integral of |grad u|^2 by Parseval.
inline double grad_sq(const Field& u) {
  auto sp = Spectral::of(u.grid());
  auto uh = sp->forward(u);
  const auto& k2 = sp->k2();
  return detail::spectral_pairing(*sp, uh, uh, [&](std::size_t s) { return k2[s]; });
}

inline double h1_inner(const Field& u, const Field& v) {
  u.check_same(v);
  auto sp = Spectral::of(u.grid());
  auto uh = sp->forward(u);
  auto vh = sp->forward(v);
  const auto& k2 = sp->k2();
  return detail::spectral_pairing(*sp, uh, vh, [&](std::size_t s) { return 1.0 + k2[s]; });
}

struct Norms {
  double l2 = 0.0;
  double grad = 0.0;  // ||grad u||_l2
  double h1 = 0.0;    // sqrt(grad^2 + l2^2)
  double linf = 0.0;
};

inline Norms norms(const Field& u) {
  Norms r;
  double s = 0.0;
  for (double x : u.values()) {
    s += x * x;
    r.linf = std::max(r.linf, std::abs(x));
  }
  const double l2sq = s * u.grid().cell_volume();
  const double gsq = grad_sq(u);
  r.l2 = std::sqrt(l2sq);
  r.grad = std::sqrt(gsq);
  r.h1 = std::sqrt(gsq + l2sq);
  return r;
}

inline double l2_norm(const Field& u) { return std::sqrt(inner(u, u)); }
inline double h1_norm(const Field& u) { return norms(u).h1; }

inline double lp_norm(const Field& u, double p) {
  if (p == 2.0) return norms(u).l2;
  if (std::isinf(p)) return norms(u).linf;
  double s = 0.0;
  for (double x : u.values()) s += std::pow(std::abs(x), p);
  return std::pow(s * u.grid().cell_volume(), 1.0 / p);
}

struct SignSplit {
  Field plus;   // max(u, 0)
  Field minus;  // min(u, 0)
};

inline SignSplit split_signs(const Field& u) {
  SignSplit r{Field(u.grid()), Field(u.grid())};
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] > 0.0)
      r.plus[i] = u[i];
    else if (u[i] < 0.0)
      r.minus[i] = u[i];
  }
  return r;
}

}  // namespace nodalflow
