#include "atnl/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace atnl {

namespace {

std::size_t initial_thread_count() {
    if (const char* env = std::getenv("ATNL_THREADS")) {
        long v = std::atol(env);
        if (v >= 1) return static_cast<std::size_t>(v);
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

std::atomic<std::size_t> g_threads{0};

// Lazy pool of worker threads that execute (begin, end) chunks of the
// current task. The pool never shrinks; set_thread_count only changes how
// many chunks are dispatched.
class Pool {
public:
    static Pool& instance() {
        // Leaked on purpose: workers block in wait() forever, so running the
        // destructor at exit would terminate on joinable threads.
        static Pool* pool = new Pool();
        return *pool;
    }

    void run(std::size_t n, std::size_t workers,
             const std::function<void(std::size_t, std::size_t)>& fn) {
        ensure_workers(workers - 1);
        std::size_t chunk = (n + workers - 1) / workers;
        {
            std::unique_lock lock(m_);
            task_ = &fn;
            n_ = n;
            chunk_ = chunk;
            pending_ = 0;
            for (std::size_t w = 1; w < workers; ++w) {
                if (w * chunk >= n) break;
                ++pending_;
            }
            dispatch_count_ = pending_;
            ++generation_;
        }
        cv_.notify_all();
        // Worker 0 is the calling thread.
        std::size_t end0 = std::min(chunk, n);
        fn(0, end0);
        std::unique_lock lock(m_);
        done_cv_.wait(lock, [&] { return pending_ == 0; });
        task_ = nullptr;
    }

private:
    Pool() = default;

    void ensure_workers(std::size_t count) {
        std::unique_lock lock(m_);
        while (threads_.size() < count) {
            std::size_t id = threads_.size() + 1;
            threads_.emplace_back([this, id] { worker_loop(id); });
        }
    }

    void worker_loop(std::size_t id) {
        std::uint64_t seen = 0;
        for (;;) {
            const std::function<void(std::size_t, std::size_t)>* task = nullptr;
            std::size_t begin = 0, end = 0;
            {
                std::unique_lock lock(m_);
                cv_.wait(lock, [&] { return generation_ != seen; });
                seen = generation_;
                if (id > dispatch_count_) continue;
                begin = id * chunk_;
                end = std::min(begin + chunk_, n_);
                if (begin >= end) continue;
                task = task_;
            }
            (*task)(begin, end);
            {
                std::unique_lock lock(m_);
                if (--pending_ == 0) done_cv_.notify_all();
            }
        }
    }

    std::mutex m_;
    std::condition_variable cv_, done_cv_;
    std::vector<std::thread> threads_;
    const std::function<void(std::size_t, std::size_t)>* task_ = nullptr;
    std::size_t n_ = 0, chunk_ = 0, pending_ = 0, dispatch_count_ = 0;
    std::uint64_t generation_ = 0;
};

} // namespace

std::size_t thread_count() {
    std::size_t v = g_threads.load(std::memory_order_relaxed);
    if (v == 0) {
        v = initial_thread_count();
        g_threads.store(v, std::memory_order_relaxed);
    }
    return v;
}

void set_thread_count(std::size_t n) {
    g_threads.store(n == 0 ? 1 : n, std::memory_order_relaxed);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t min_per_thread) {
    if (n == 0) return;
    std::size_t workers = thread_count();
    if (workers > 1 && min_per_thread > 0) {
        workers = std::min(workers, (n + min_per_thread - 1) / min_per_thread);
    }
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    Pool::instance().run(n, workers, fn);
}

} // namespace atnl
