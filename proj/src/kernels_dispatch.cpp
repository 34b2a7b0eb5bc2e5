#include "svae/kernels.hpp"

namespace svae::kernels {

const Ops* avx2_ops_impl();  // defined in kernels_avx2.cpp

const Ops* avx2_ops() {
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    return avx2_ops_impl();
  }
#endif
  return nullptr;
}

const Ops& active() {
  static const Ops& selected = []() -> const Ops& {
    if (const Ops* v = avx2_ops()) return *v;
    return scalar_ops();
  }();
  return selected;
}

}  // namespace svae::kernels
