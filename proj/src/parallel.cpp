#include "neurolds/parallel.hpp"

#include <atomic>
#include <stdexcept>

#include <omp.h>

namespace neurolds {

namespace {
std::atomic<int> g_threads{1};
std::atomic<bool> g_deterministic{true};
}  // namespace

void set_thread_count(int threads) {
    if (threads < 1) throw std::invalid_argument("thread count must be at least 1");
    g_threads.store(threads);
    omp_set_num_threads(threads);
}

int thread_count() { return g_threads.load(); }

void set_deterministic(bool on) { g_deterministic.store(on); }
bool deterministic() { return g_deterministic.load(); }

}  // namespace neurolds
