// Serial reference vs OpenMP kernels on the shapes training actually uses.
#include <benchmark/benchmark.h>

#include "nopeek/depmeasure.hpp"
#include "nopeek/kernels.hpp"
#include "nopeek/rng.hpp"

using namespace nopeek;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  return rng_normal(rng, r, c, 0.0, 1.0);
}

template <Matrix (*Fn)(const Matrix&, const Matrix&)>
void BM_matmul(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : st) benchmark::DoNotOptimize(Fn(a, b));
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <Matrix (*Fn)(const Matrix&)>
void BM_pairwise(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const Matrix x = random_matrix(n, 64, 3);
  for (auto _ : st) benchmark::DoNotOptimize(Fn(x));
}

template <Matrix (*Fn)(const Matrix&)>
void BM_double_center(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const Matrix d = kernels::serial::pairwise_sq_dist(random_matrix(n, 8, 4));
  for (auto _ : st) benchmark::DoNotOptimize(Fn(d));
}

void BM_dcor(benchmark::State& st) {
  const auto n = static_cast<std::size_t>(st.range(0));
  const Matrix x = random_matrix(n, 256, 5), z = random_matrix(n, 64, 6);
  for (auto _ : st) benchmark::DoNotOptimize(dcor(x, z));
}

}  // namespace

BENCHMARK(BM_matmul<kernels::serial::matmul>)->Name("matmul/serial")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_matmul<kernels::parallel::matmul>)->Name("matmul/parallel")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_pairwise<kernels::serial::pairwise_sq_dist>)->Name("pairwise_sq_dist/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_pairwise<kernels::parallel::pairwise_sq_dist>)->Name("pairwise_sq_dist/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_double_center<kernels::serial::double_center>)->Name("double_center/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_double_center<kernels::parallel::double_center>)->Name("double_center/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_dcor)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
