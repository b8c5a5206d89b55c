#pragma once

#include <mutex>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace editfit::detail {

// Training iterations and inference tiles allocate and free the same multi-megabyte
// activations over and over. glibc would otherwise hand them back to the kernel each
// time and pay the page faults again.
inline void keep_heap_resident() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
  });
#endif
}

}  // namespace editfit::detail
