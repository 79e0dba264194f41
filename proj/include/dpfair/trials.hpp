#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace dpfair {

/// Per-component sample mean and standard error of the mean over trials.
struct TrialMoments {
  std::uint64_t trials = 0;
  std::vector<double> mean;
  std::vector<double> stderr_of_mean;
};

namespace detail {

struct WelfordBlock {
  std::uint64_t count = 0;
  std::vector<double> mean;
  std::vector<double> m2;
};

// Chan et al. pairwise merge; b is folded into a.
inline void merge_into(WelfordBlock& a, const WelfordBlock& b) {
  if (b.count == 0) return;
  if (a.count == 0) {
    a = b;
    return;
  }
  const double na = static_cast<double>(a.count);
  const double nb = static_cast<double>(b.count);
  const double n = na + nb;
  for (std::size_t k = 0; k < a.mean.size(); ++k) {
    const double delta = b.mean[k] - a.mean[k];
    a.mean[k] += delta * (nb / n);
    a.m2[k] += b.m2[k] + delta * delta * (na * nb / n);
  }
  a.count += b.count;
}

// Tree reduction in block-index order: the shape depends only on the
// number of blocks, never on the thread count.
inline WelfordBlock tree_reduce(std::vector<WelfordBlock>& blocks) {
  if (blocks.empty()) return {};
  for (std::size_t stride = 1; stride < blocks.size(); stride *= 2) {
    for (std::size_t i = 0; i + stride < blocks.size(); i += 2 * stride) {
      merge_into(blocks[i], blocks[i + stride]);
    }
  }
  return std::move(blocks.front());
}

}  // namespace detail

/// Fixed trial-block size. Part of the reproducibility contract: changing it
/// changes the floating-point reduction order.
inline constexpr std::uint64_t kTrialBlockSize = 4096;

/// 0 means "use hardware concurrency".
inline unsigned resolve_threads(unsigned requested) noexcept {
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Runs `trials` independent trials and returns the mean and standard error
/// of each of the `width` per-trial outputs.
///
/// `make_worker()` is called once per thread and must return a callable
/// `void(std::uint64_t trial_index, std::span<double> out)` that owns its
/// own scratch space. Trials are grouped into fixed blocks, each accumulated
/// sequentially in trial order, and the blocks are combined by a fixed tree.
/// The result is bit-identical for any thread count.
template <class MakeWorker>
TrialMoments run_trials(std::uint64_t trials, std::size_t width,
                        unsigned threads, MakeWorker&& make_worker) {
  const std::uint64_t n_blocks = (trials + kTrialBlockSize - 1) / kTrialBlockSize;
  std::vector<detail::WelfordBlock> blocks(n_blocks);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto body = [&] {
    try {
      auto worker = make_worker();
      std::vector<double> out(width);
      for (std::uint64_t b = next++; b < n_blocks; b = next++) {
        detail::WelfordBlock acc;
        acc.mean.assign(width, 0.0);
        acc.m2.assign(width, 0.0);
        const std::uint64_t begin = b * kTrialBlockSize;
        const std::uint64_t end = std::min(trials, begin + kTrialBlockSize);
        for (std::uint64_t t = begin; t < end; ++t) {
          worker(t, std::span<double>(out));
          ++acc.count;
          const double inv = 1.0 / static_cast<double>(acc.count);
          for (std::size_t k = 0; k < width; ++k) {
            const double delta = out[k] - acc.mean[k];
            acc.mean[k] += delta * inv;
            acc.m2[k] += delta * (out[k] - acc.mean[k]);
          }
        }
        blocks[b] = std::move(acc);
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = n_blocks;
    }
  };

  const unsigned n_threads = static_cast<unsigned>(
      std::min<std::uint64_t>(resolve_threads(threads), std::max<std::uint64_t>(n_blocks, 1)));
  if (n_threads <= 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(body);
  }
  if (failure) std::rethrow_exception(failure);

  detail::WelfordBlock total = detail::tree_reduce(blocks);
  TrialMoments result;
  result.trials = total.count;
  result.mean = total.count ? total.mean : std::vector<double>(width, 0.0);
  result.stderr_of_mean.assign(width, 0.0);
  if (total.count > 1) {
    const double n = static_cast<double>(total.count);
    for (std::size_t k = 0; k < width; ++k) {
      const double var = std::max(0.0, total.m2[k] / (n - 1.0));
      result.stderr_of_mean[k] = std::sqrt(var / n);
    }
  }
  return result;
}

}  // namespace dpfair
