// Microbenchmarks for the estimation hot paths: shared-predictor normal
// equation assembly (both builders), the single-track predictor solve, and
// the regularized Hermitian solve they all sit on.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>
#include <vector>

#include "cbf/covariance.hpp"
#include "cbf/numerics.hpp"
#include "cbf/stacking.hpp"
#include "cbf/wpe.hpp"

namespace {

cbf::CMatrix random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  cbf::CMatrix m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) m(i, j) = cbf::Complex(dist(gen), dist(gen));
  }
  return m;
}

cbf::RVector random_track(int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(0.2, 2.0);
  cbf::RVector v(n);
  for (int i = 0; i < n; ++i) v[i] = dist(gen);
  return v;
}

struct PackedInputs {
  cbf::StackedObservation stacked;
  cbf::CMatrix Q;
  std::vector<cbf::RVector> lambdas;
  std::vector<cbf::CovarianceSet> covs;
};

PackedInputs make_packed(int M, int I, int taps, int frames) {
  cbf::StackConfig scfg;
  scfg.channels = M;
  scfg.delay = 1;
  scfg.length = 1 + taps;
  PackedInputs in;
  in.stacked = cbf::stack(random_matrix(M, frames, 1), scfg);
  in.Q = random_matrix(M, I, 2);
  for (int i = 0; i < I; ++i) {
    in.lambdas.push_back(random_track(frames, 10 + i));
    in.covs.push_back(cbf::accumulate(in.stacked, in.lambdas.back()));
  }
  return in;
}

void BM_NormalEquationsFast(benchmark::State& state) {
  const auto in = make_packed(static_cast<int>(state.range(0)),
                              static_cast<int>(state.range(1)),
                              static_cast<int>(state.range(2)), 100);
  for (auto _ : state) {
    cbf::NormalEquations eqs = cbf::packed_normal_equations_fast(in.covs, in.Q);
    benchmark::DoNotOptimize(eqs.Psi.data());
  }
}
BENCHMARK(BM_NormalEquationsFast)
    ->Args({4, 2, 2})
    ->Args({6, 2, 4})
    ->Args({8, 3, 4});

void BM_NormalEquationsBrute(benchmark::State& state) {
  const auto in = make_packed(static_cast<int>(state.range(0)),
                              static_cast<int>(state.range(1)),
                              static_cast<int>(state.range(2)), 100);
  for (auto _ : state) {
    cbf::NormalEquations eqs =
        cbf::packed_normal_equations_brute(in.stacked, in.Q, in.lambdas, 0);
    benchmark::DoNotOptimize(eqs.Psi.data());
  }
}
BENCHMARK(BM_NormalEquationsBrute)
    ->Args({4, 2, 2})
    ->Args({6, 2, 4})
    ->Args({8, 3, 4});

void BM_SingleTargetWpe(benchmark::State& state) {
  const int M = static_cast<int>(state.range(0));
  const int taps = static_cast<int>(state.range(1));
  cbf::StackConfig scfg;
  scfg.channels = M;
  scfg.delay = 1;
  scfg.length = 1 + taps;
  const cbf::StackedObservation stacked =
      cbf::stack(random_matrix(M, 200, 3), scfg);
  const cbf::CovarianceSet cov = cbf::accumulate(stacked, random_track(200, 4));
  for (auto _ : state) {
    cbf::CMatrix G = cbf::single_target_wpe(cov);
    benchmark::DoNotOptimize(G.data());
  }
}
BENCHMARK(BM_SingleTargetWpe)->Args({4, 4})->Args({8, 8});

void BM_HermitianSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const cbf::CMatrix G = random_matrix(n, n, 5);
  const cbf::CMatrix A =
      G * G.adjoint() + cbf::CMatrix::Identity(n, n) * static_cast<double>(n);
  const cbf::CVector b = random_matrix(n, 1, 6);
  for (auto _ : state) {
    cbf::CVector x = cbf::hermitian_solve(A, b);
    benchmark::DoNotOptimize(x.data());
  }
}
BENCHMARK(BM_HermitianSolve)->Arg(4)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
