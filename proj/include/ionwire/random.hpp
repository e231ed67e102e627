// Seeded random streams and the deterministic ensemble runner.
//
// Every stochastic realization owns its generators. Stream seeds are
// splitmix64 mixes of (master seed, realization index, substream), so the
// draws seen by realization k do not depend on the ensemble size, on the
// thread count, or on the order in which realizations are executed.
#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace ionwire {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Substreams used by the integrators. Initial conditions and jitter draws
/// live on their own substreams so that two integrators run with the same
/// seed see identical starting states.
enum class Substream : std::uint64_t { initial_state = 0, dynamics = 1, jitter = 2, measurement = 3 };

constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index,
                                    Substream sub = Substream::dynamics) {
    return splitmix64(splitmix64(splitmix64(master) ^ index) + static_cast<std::uint64_t>(sub));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    Rng(std::uint64_t master, std::uint64_t index, Substream sub)
        : engine_(stream_seed(master, index, sub)) {}

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    long binomial(long trials, double p) {
        std::binomial_distribution<long> dist(trials, std::clamp(p, 0.0, 1.0));
        return dist(engine_);
    }
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Worker count: IONWIRE_THREADS if set, otherwise the hardware concurrency.
inline unsigned worker_count() {
    if (const char* env = std::getenv("IONWIRE_THREADS")) {
        try {
            const long n = std::stol(env);
            if (n > 0) return static_cast<unsigned>(n);
        } catch (...) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on the worker pool. fn must only touch
/// state owned by index i. The first exception thrown is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = count;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// Per-sample ensemble accumulator for two ions.
struct MomentAccumulator {
    std::vector<double> sum1, sumsq1, sum2, sumsq2;
    std::size_t count = 0;

    explicit MomentAccumulator(std::size_t samples = 0)
        : sum1(samples), sumsq1(samples), sum2(samples), sumsq2(samples) {}

    void add(std::size_t k, double n1, double n2) {
        sum1[k] += n1;
        sumsq1[k] += n1 * n1;
        sum2[k] += n2;
        sumsq2[k] += n2 * n2;
    }

    void merge(const MomentAccumulator& o) {
        for (std::size_t k = 0; k < sum1.size(); ++k) {
            sum1[k] += o.sum1[k];
            sumsq1[k] += o.sumsq1[k];
            sum2[k] += o.sum2[k];
            sumsq2[k] += o.sumsq2[k];
        }
        count += o.count;
    }
};

/// Fixed block size so that the reduction order is independent of the
/// number of workers.
inline constexpr std::size_t ensemble_block = 32;

/// Runs `realizations` independent realizations in fixed-size blocks. For
/// each realization, run(index, acc) must call acc.add(sample, n1, n2) for
/// every sample. Blocks are reduced in index order.
template <typename Run>
MomentAccumulator run_ensemble(std::size_t realizations, std::size_t samples, Run&& run) {
    const std::size_t blocks = (realizations + ensemble_block - 1) / ensemble_block;
    std::vector<MomentAccumulator> partial(blocks, MomentAccumulator(samples));
    parallel_for(blocks, [&](std::size_t b) {
        const std::size_t begin = b * ensemble_block;
        const std::size_t end = std::min(realizations, begin + ensemble_block);
        for (std::size_t i = begin; i < end; ++i) {
            run(i, partial[b]);
            ++partial[b].count;
        }
    });
    MomentAccumulator total(samples);
    for (const auto& p : partial) total.merge(p);
    return total;
}

}  // namespace ionwire
