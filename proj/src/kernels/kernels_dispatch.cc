#include <atomic>
#include <cstdlib>
#include <string>

#include "prognos/error.h"
#include "prognos/kernels.h"

namespace prognos::kernels {

#if !defined(PROGNOS_HAVE_AVX2)
const KernelTable* Avx2Kernels() { return nullptr; }
#endif
#if !defined(PROGNOS_HAVE_NEON)
const KernelTable* NeonKernels() { return nullptr; }
#endif

namespace {

const KernelTable* TableFor(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return &ScalarKernels();
    case Isa::kAvx2:
      return Avx2Kernels();
    case Isa::kNeon:
      return NeonKernels();
  }
  return nullptr;
}

Isa DetectIsa() {
  if (const char* env = std::getenv("PROGNOS_ISA")) {
    const std::string want(env);
    if (want == "scalar") return Isa::kScalar;
    if (want == "avx2" && IsaAvailable(Isa::kAvx2)) return Isa::kAvx2;
    if (want == "neon" && IsaAvailable(Isa::kNeon)) return Isa::kNeon;
  }
  if (IsaAvailable(Isa::kAvx2)) return Isa::kAvx2;
  if (IsaAvailable(Isa::kNeon)) return Isa::kNeon;
  return Isa::kScalar;
}

struct Active {
  std::atomic<Isa> isa{DetectIsa()};
  std::atomic<const KernelTable*> table{TableFor(isa.load())};
};

Active& State() {
  static Active state;
  return state;
}

inline const KernelTable& Table() {
  return *State().table.load(std::memory_order_relaxed);
}

void CheckSameSize(size_t a, size_t b) {
  if (a != b) throw ShapeMismatch("kernel operands differ in length");
}

}  // namespace

std::string_view IsaName(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "unknown";
}

bool IsaAvailable(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(PROGNOS_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Isa::kNeon:
      return NeonKernels() != nullptr;
  }
  return false;
}

Isa ActiveIsa() { return State().isa.load(); }

void ForceIsa(Isa isa) {
  if (!IsaAvailable(isa)) {
    throw BadParam("ISA not available: " + std::string(IsaName(isa)));
  }
  State().isa = isa;
  State().table = TableFor(isa);
}

void ResetIsa() {
  const Isa isa = DetectIsa();
  State().isa = isa;
  State().table = TableFor(isa);
}

double Dot(std::span<const double> a, std::span<const double> b) {
  CheckSameSize(a.size(), b.size());
  return Table().dot(a.data(), b.data(), a.size());
}

double SquaredDistance(std::span<const double> a, std::span<const double> b) {
  CheckSameSize(a.size(), b.size());
  return Table().squared_distance(a.data(), b.data(), a.size());
}

double Sum(std::span<const double> a) { return Table().sum(a.data(), a.size()); }

void Axpy(double alpha, std::span<const double> x, std::span<double> y) {
  CheckSameSize(x.size(), y.size());
  Table().axpy(alpha, x.data(), y.data(), x.size());
}

void Gemv(std::span<const double> m, size_t rows, size_t cols,
          std::span<const double> x, std::span<double> out) {
  if (m.size() != rows * cols || x.size() != cols || out.size() != rows) {
    throw ShapeMismatch("gemv operand shapes disagree");
  }
  const auto& table = Table();
  for (size_t r = 0; r < rows; ++r) {
    out[r] = table.dot(m.data() + r * cols, x.data(), cols);
  }
}

}  // namespace prognos::kernels
