#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace fracsob {

template <typename R>
std::vector<R> run_chunks(std::size_t chunks, const std::function<R(std::size_t)>& body) {
  std::vector<R> out(chunks);
  const auto threads = static_cast<std::size_t>(std::max(1, worker_threads()));
  if (threads == 1 || chunks <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) out[c] = body(c);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks) return;
      try {
        out[c] = body(c);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = chunks;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, chunks); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace fracsob
