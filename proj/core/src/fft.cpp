#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

namespace cbf::detail {

namespace {

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

std::mutex g_plan_mutex;

// Plan creation is not thread safe in FFTW; executing a cached plan through
// the new-array interface is. FFTW_UNALIGNED keeps the plans valid for any
// caller buffer.
PlanPair& plans_for(int n) {
  static std::map<int, PlanPair> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  std::vector<double> re(n);
  std::vector<std::complex<double>> cx(n / 2 + 1);
  PlanPair p;
  p.forward = fftw_plan_dft_r2c_1d(
      n, re.data(), reinterpret_cast<fftw_complex*>(cx.data()),
      FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.inverse = fftw_plan_dft_c2r_1d(
      n, reinterpret_cast<fftw_complex*>(cx.data()), re.data(),
      FFTW_ESTIMATE | FFTW_UNALIGNED);
  return cache.emplace(n, p).first->second;
}

}  // namespace

void fft_real_forward(const double* in, std::complex<double>* out, int n) {
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    plan = plans_for(n).forward;
  }
  std::vector<double> buf(in, in + n);
  fftw_execute_dft_r2c(plan, buf.data(), reinterpret_cast<fftw_complex*>(out));
}

void fft_real_inverse(const std::complex<double>* in, double* out, int n) {
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    plan = plans_for(n).inverse;
  }
  // c2r destroys its input, so work on a copy.
  std::vector<std::complex<double>> buf(in, in + n / 2 + 1);
  fftw_execute_dft_c2r(plan, reinterpret_cast<fftw_complex*>(buf.data()), out);
  const double scale = 1.0 / n;
  for (int i = 0; i < n; ++i) out[i] *= scale;
}

}  // namespace cbf::detail
