#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

namespace balar {

/// Runs independent calls with at most `max_concurrent` in flight. Results come
/// back in input order whatever the completion order. If any call throws, every
/// started call still finishes and the exception of the lowest-index failure is
/// rethrown.
template <class T>
std::vector<T> dispatch_parallel(const std::vector<std::function<T()>>& calls, std::size_t max_concurrent) {
  const std::size_t n = calls.size();
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);

  auto run_one = [&](std::size_t i) {
    try {
      slots[i].emplace(calls[i]());
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const std::size_t workers = std::min(n, std::max<std::size_t>(1, max_concurrent));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    {
      std::vector<std::jthread> pool;
      pool.reserve(workers);
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            if (failed.load()) {
              // Remaining calls are skipped once the batch is known to fail.
              continue;
            }
            run_one(i);
            if (errors[i]) failed.store(true);
          }
        });
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
  }
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) {
    if (!s) throw std::logic_error("dispatch_parallel: missing result");
    out.push_back(std::move(*s));
  }
  return out;
}

}  // namespace balar
