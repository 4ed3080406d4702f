#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

#include "ddss/kernels.hpp"

namespace ddss::kernels {

const Ops& scalar_ops();
const Ops& avx2_ops();

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

Backend resolve_initial() {
  const char* env = std::getenv("DDSS_KERNELS");
  if (env && *env) {
    std::string v(env);
    if (v == "scalar") return Backend::scalar;
    if (v == "avx2") {
      if (!cpu_has_avx2())
        throw std::runtime_error("DDSS_KERNELS=avx2 but the CPU lacks AVX2");
      return Backend::avx2;
    }
    if (v != "auto")
      throw std::runtime_error("DDSS_KERNELS must be scalar, avx2 or auto (got '" + v + "')");
  }
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

Backend& active() {
  static Backend b = resolve_initial();
  return b;
}

}  // namespace

Backend active_backend() { return active(); }

const char* backend_name() {
  return active() == Backend::avx2 ? "avx2" : "scalar";
}

void force_backend(Backend b) {
  if (b == Backend::avx2 && !cpu_has_avx2())
    throw std::runtime_error("force_backend: CPU lacks AVX2");
  active() = b;
}

const Ops& ops() {
  return active() == Backend::avx2 ? avx2_ops() : scalar_ops();
}

}  // namespace ddss::kernels
