// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <cstdlib>
#include <string>

#include "urae/error.hpp"
#include "urae/kernels.hpp"

namespace urae::kernels {

std::string_view name(Backend backend) noexcept {
  switch (backend) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
    case Backend::Neon:
      return "neon";
  }
  return "unknown";
}

namespace {

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& select_backend() {
  const KernelTable* best = &detail::scalar_table();
  if (available(Backend::Avx2)) {
    best = detail::avx2_table();
  } else if (available(Backend::Neon)) {
    best = detail::neon_table();
  }

  const char* env = std::getenv("URAE_KERNELS");
  if (env == nullptr || *env == '\0') return *best;
  const std::string requested(env);
  if (requested == "auto") return *best;
  for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon}) {
    if (requested == name(b)) {
      if (available(b)) return table(b);
      std::fprintf(stderr, "urae: URAE_KERNELS=%s unavailable on this CPU; using %s\n",
                   env, std::string(name(best->backend)).c_str());
      return *best;
    }
  }
  std::fprintf(stderr, "urae: unknown URAE_KERNELS=%s; using %s\n", env,
               std::string(name(best->backend)).c_str());
  return *best;
}

}  // namespace

bool available(Backend backend) noexcept {
  switch (backend) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
      return detail::avx2_table() != nullptr && cpu_has_avx2();
    case Backend::Neon:
      return detail::neon_table() != nullptr;
  }
  return false;
}

const KernelTable& table(Backend backend) {
  if (!available(backend)) {
    throw ContractError("kernel backend '" + std::string(name(backend)) + "' is not available");
  }
  switch (backend) {
    case Backend::Avx2:
      return *detail::avx2_table();
    case Backend::Neon:
      return *detail::neon_table();
    case Backend::Scalar:
      break;
  }
  return detail::scalar_table();
}

const KernelTable& active() {
  static const KernelTable& selected = select_backend();
  return selected;
}

}  // namespace urae::kernels
