#include <cstdlib>
#include <string_view>

#include "internal.hpp"

namespace pflow::kernels {

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
  }
  return "unknown";
}

const KernelTable& scalar() noexcept { return detail::kScalar; }

const KernelTable* avx2() noexcept {
#if defined(PFLOW_HAVE_AVX2)
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("bmi2") &&
           __builtin_cpu_supports("pclmul") && __builtin_cpu_supports("popcnt");
  }();
  return supported ? &detail::kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

std::vector<const KernelTable*> available() {
  std::vector<const KernelTable*> out{&scalar()};
  if (const KernelTable* t = avx2()) out.push_back(t);
  return out;
}

const KernelTable& active() noexcept {
  static const KernelTable& chosen = []() -> const KernelTable& {
    const char* forced = std::getenv("PFLOW_ISA");
    if (forced != nullptr && std::string_view(forced) == "scalar") return scalar();
    if (const KernelTable* t = avx2()) return *t;
    return scalar();
  }();
  return chosen;
}

}  // namespace pflow::kernels
