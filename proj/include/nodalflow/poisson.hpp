#pragma once
// Free-space Newtonian potential phi = G * rho, G(x) = 1/(4 pi |x|), on 3D grids.
// Convolution runs on the doubled grid (zero padding), so no periodic images
// reach the box. The origin cell uses the cube average of 1/|x|.

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "nodalflow/errors.hpp"
#include "nodalflow/fft.hpp"
#include "nodalflow/grid.hpp"

namespace nodalflow {

// integral of 1/|x| over the unit cube centred at 0.
inline constexpr double kCubeInverseDistance = 2.380077363979553;

class FreeSpacePoisson {
 public:
  explicit FreeSpacePoisson(const Grid& g) : grid_(g) {
    if (g.dim != 3) throw UnsupportedError("free-space Poisson solve requires dim = 3");
    const int m = 2 * g.n;
    fft_ = detail::real_fft(3, m);
    const double h = g.h();
    const std::size_t big = fft_->real_size();
    std::vector<double> G(big);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        for (int k = 0; k < m; ++k) {
          const int a = i < g.n ? i : i - m;
          const int b = j < g.n ? j : j - m;
          const int c = k < g.n ? k : k - m;
          const std::size_t idx = (static_cast<std::size_t>(i) * m + j) * m + k;
          if (a == 0 && b == 0 && c == 0) {
            G[idx] = kCubeInverseDistance / (4.0 * M_PI * h);
            continue;
          }
          const double x = a * h, y = b * h, z = c * h;
          const double r = std::sqrt(x * x + y * y + z * z);
          G[idx] = 1.0 / (4.0 * M_PI * r);
        }
    // quadrature weight h^3 and inverse-transform normalization folded in
    const double scale = h * h * h / static_cast<double>(big);
    kernel_ = transform(G, scale);
  }

  static std::shared_ptr<const FreeSpacePoisson> of(const Grid& g) {
    static std::mutex m;
    static std::map<std::pair<int, double>, std::shared_ptr<const FreeSpacePoisson>> cache;
    std::lock_guard<std::mutex> lock(m);
    auto& slot = cache[{g.n, g.L}];
    if (!slot) slot = std::make_shared<const FreeSpacePoisson>(g);
    return slot;
  }

  const Grid& grid() const { return grid_; }

  Field potential(const Field& rho) const { return convolve(rho, kernel_); }

  // grad phi = G * grad rho. Differentiating the smooth, decaying source keeps
  // the second-order accuracy of the potential; the r^-2 kernel gradient
  // under a midpoint rule would only be first order.
  std::array<Field, 3> potential_gradient(const Field& rho) const {
    return {convolve(derivative(rho, 0), kernel_), convolve(derivative(rho, 1), kernel_),
            convolve(derivative(rho, 2), kernel_)};
  }

 private:
  detail::CVec transform(const std::vector<double>& k, double scale) const {
    detail::CVec out(fft_->spec_size());
    fft_->forward(k.data(), out.data());
    for (auto& c : out) c *= scale;
    return out;
  }

  Field convolve(const Field& rho, const detail::CVec& kh) const {
    if (!(rho.grid() == grid_)) throw std::invalid_argument("grid mismatch");
    const int n = grid_.n, m = 2 * n;
    std::vector<double> pad(fft_->real_size(), 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          pad[(static_cast<std::size_t>(i) * m + j) * m + k] = rho[(static_cast<std::size_t>(i) * n + j) * n + k];
    detail::CVec spec(fft_->spec_size());
    fft_->forward(pad.data(), spec.data());
    for (std::size_t s = 0; s < spec.size(); ++s) spec[s] *= kh[s];
    fft_->inverse(spec.data(), pad.data());
    Field out(grid_);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          out[(static_cast<std::size_t>(i) * n + j) * n + k] = pad[(static_cast<std::size_t>(i) * m + j) * m + k];
    return out;
  }

  Grid grid_;
  std::shared_ptr<const detail::RealFft> fft_;
  detail::CVec kernel_;
};

inline Field squared(const Field& u) {
  Field r(u.grid());
  for (std::size_t i = 0; i < u.size(); ++i) r[i] = u[i] * u[i];
  return r;
}

struct PoissonSolve {
  Field phi;
  std::string method = "free-space kernel, zero-padded FFT convolution";
  double residual = 0.0;  // ||-Lap phi - u^2|| / ||u^2|| on interior points, 7-point stencil
};

namespace detail {
inline double interior_poisson_residual(const Field& phi, const Field& rho) {
  const Grid& g = phi.grid();
  const int n = g.n;
  const double h2 = g.h() * g.h();
  double num = 0.0, den = 0.0;
  auto at = [&](int i, int j, int k) { return phi[(static_cast<std::size_t>(i) * n + j) * n + k]; };
  for (int i = 1; i < n - 1; ++i)
    for (int j = 1; j < n - 1; ++j)
      for (int k = 1; k < n - 1; ++k) {
        const double lap = (at(i + 1, j, k) + at(i - 1, j, k) + at(i, j + 1, k) + at(i, j - 1, k) + at(i, j, k + 1) +
                            at(i, j, k - 1) - 6.0 * at(i, j, k)) / h2;
        const double r = rho[(static_cast<std::size_t>(i) * n + j) * n + k];
        num += (-lap - r) * (-lap - r);
        den += r * r;
      }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}
}  // namespace detail

inline PoissonSolve solve_phi(const Field& u) {
  if (u.grid().dim != 3) throw UnsupportedError("solve_phi requires dim = 3");
  auto solver = FreeSpacePoisson::of(u.grid());
  PoissonSolve out;
  const Field rho = squared(u);
  out.phi = solver->potential(rho);
  out.residual = detail::interior_poisson_residual(out.phi, rho);
  return out;
}

// 1/4 integral phi u^2.
inline double nonlocal_energy(const Field& u, const Field& phi) {
  u.check_same(phi);
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += phi[i] * u[i] * u[i];
  return 0.25 * s * u.grid().cell_volume();
}

}  // namespace nodalflow
