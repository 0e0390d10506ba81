#pragma once
// Thin FFTW wrapper: cached real-to-complex plans for cubic grids.
// Plans are created unaligned so any buffer can be used with the
// new-array execute interface, which is thread-safe.

#include <fftw3.h>

#include <array>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace nodalflow::detail {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  RealFft(int dim, int n) : dim_(dim), n_(n) {
    std::array<int, 3> dims{n, n, n};
    real_size_ = 1;
    for (int a = 0; a < dim; ++a) real_size_ *= static_cast<std::size_t>(n);
    spec_size_ = real_size_ / static_cast<std::size_t>(n) * static_cast<std::size_t>(n / 2 + 1);

    std::vector<double> r(real_size_);
    CVec c(spec_size_);
    auto* cp = reinterpret_cast<fftw_complex*>(c.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd_ = fftw_plan_dft_r2c(dim, dims.data(), r.data(), cp, flags);
    inv_ = fftw_plan_dft_c2r(dim, dims.data(), cp, r.data(), flags);
    if (!fwd_ || !inv_) throw std::runtime_error("fftw planning failed");
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
  }

  int dim() const { return dim_; }
  int n() const { return n_; }
  std::size_t real_size() const { return real_size_; }
  std::size_t spec_size() const { return spec_size_; }

  // Unnormalized forward transform; input is preserved.
  void forward(const double* in, cplx* out) const {
    fftw_execute_dft_r2c(fwd_, const_cast<double*>(in), reinterpret_cast<fftw_complex*>(out));
  }

  // Unnormalized inverse transform; the spectral input is destroyed.
  void inverse(cplx* in, double* out) const {
    fftw_execute_dft_c2r(inv_, reinterpret_cast<fftw_complex*>(in), out);
  }

 private:
  int dim_;
  int n_;
  std::size_t real_size_{};
  std::size_t spec_size_{};
  fftw_plan fwd_{};
  fftw_plan inv_{};
};

inline std::shared_ptr<const RealFft> real_fft(int dim, int n) {
  static std::mutex m;
  static std::map<std::pair<int, int>, std::shared_ptr<const RealFft>> cache;
  std::lock_guard<std::mutex> lock(m);
  auto& slot = cache[{dim, n}];
  if (!slot) slot = std::make_shared<const RealFft>(dim, n);
  return slot;
}

}  // namespace nodalflow::detail
