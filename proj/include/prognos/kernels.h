#pragma once

// Data-parallel inner loops shared by the learners, preprocessing and
// ensembling code. Every kernel has a scalar reference and SIMD variants
// (AVX2 on x86-64, NEON on aarch64) selected once at runtime.
//
// All variants of a reduction accumulate in the same four-lane order
// (lane k sums elements i with i % 4 == k, lanes combine as
// (l0 + l2) + (l1 + l3), then the tail is added sequentially), so results
// are bit-identical regardless of which variant runs.

#include <cstddef>
#include <span>
#include <string_view>

namespace prognos::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view IsaName(Isa isa);
bool IsaAvailable(Isa isa);
Isa ActiveIsa();
// Overrides runtime selection; throws BadParam if the ISA is unavailable.
// Intended for tests and benchmarking.
void ForceIsa(Isa isa);
// Restores automatic selection (honours PROGNOS_ISA=scalar|avx2|neon).
void ResetIsa();

double Dot(std::span<const double> a, std::span<const double> b);
double SquaredDistance(std::span<const double> a, std::span<const double> b);
double Sum(std::span<const double> a);
// y += alpha * x
void Axpy(double alpha, std::span<const double> x, std::span<double> y);
// out[r] = dot(m[r, :], x) for a row-major rows x cols buffer.
void Gemv(std::span<const double> m, size_t rows, size_t cols,
          std::span<const double> x, std::span<double> out);

// Per-ISA entry points, exposed for equivalence tests.
struct KernelTable {
  double (*dot)(const double*, const double*, size_t);
  double (*squared_distance)(const double*, const double*, size_t);
  double (*sum)(const double*, size_t);
  void (*axpy)(double, const double*, double*, size_t);
};

const KernelTable& ScalarKernels();
const KernelTable* Avx2Kernels();  // nullptr when not compiled in
const KernelTable* NeonKernels();  // nullptr when not compiled in

}  // namespace prognos::kernels
