#include "slqd/parallel.hpp"

#include <atomic>

namespace slqd {

namespace {
std::atomic<unsigned> g_thread_cap{0};
}

void set_thread_cap(unsigned cap) { g_thread_cap.store(cap); }

unsigned thread_cap() { return g_thread_cap.load(); }

unsigned resolve_threads(unsigned requested) {
    unsigned n = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const unsigned cap = thread_cap(); cap != 0) n = std::min(n, cap);
    return std::max(1u, n);
}

}  // namespace slqd
