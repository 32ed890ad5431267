#pragma once

namespace madgan {

// Keeps freed tensor buffers in the heap instead of returning them to the
// OS after every step (glibc only; no-op elsewhere). Call once at startup.
void configure_allocator() noexcept;

}  // namespace madgan
