#include <atomic>
#include <cstdlib>
#include <string>

#include "riskdiff/error.hpp"
#include "riskdiff/kernels.hpp"

namespace riskdiff::kernels {
namespace {

bool cpu_has_avx2() {
#if RISKDIFF_HAVE_AVX2 && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("RISKDIFF_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return &scalar::kTable;
    if (want == "avx2" && supported(SimdLevel::avx2)) return &table(SimdLevel::avx2);
  }
  return supported(SimdLevel::avx2) ? &table(SimdLevel::avx2) : &scalar::kTable;
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

std::string_view to_string(SimdLevel level) {
  switch (level) {
    case SimdLevel::scalar:
      return "scalar";
    case SimdLevel::avx2:
      return "avx2";
  }
  return "unknown";
}

bool supported(SimdLevel level) {
  if (level == SimdLevel::scalar) return true;
  static const bool avx2 = cpu_has_avx2();
  return avx2;
}

const KernelTable& table(SimdLevel level) {
  if (!supported(level))
    throw DomainError("SIMD level not supported here: " + std::string(to_string(level)));
#if RISKDIFF_HAVE_AVX2
  if (level == SimdLevel::avx2) return avx2::kTable;
#endif
  return scalar::kTable;
}

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

void set_active(SimdLevel level) { active_slot().store(&table(level), std::memory_order_release); }

}  // namespace riskdiff::kernels
