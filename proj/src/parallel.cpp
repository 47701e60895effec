#include "rfmesh/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rfmesh {

namespace {

constexpr int kMaxWorkers = 64;

int initial_worker_count() {
    if (const char* env = std::getenv("RFMESH_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) return std::min(v, kMaxWorkers);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? std::min<int>(int(hw), kMaxWorkers) : 1;
}

std::atomic<int> g_workers{0};

// Generation-dispatched pool. Helper threads are created lazily and kept for
// the process lifetime; the calling thread always acts as worker 0.
class Pool {
  public:
    static Pool& instance() {
        // Leaked on purpose: helper threads block in worker_loop forever, so
        // destroying the pool (and its joinable threads) at exit would abort.
        static Pool* p = new Pool();
        return *p;
    }

    void run(int workers, const std::function<void(int)>& body) {
        std::unique_lock<std::mutex> lk(mu_);
        ensure_threads(workers - 1);
        body_ = &body;
        active_ = workers - 1;
        pending_ = workers - 1;
        error_ = nullptr;
        ++epoch_;
        cv_work_.notify_all();
        lk.unlock();

        try {
            body(0);
        } catch (...) {
            std::lock_guard<std::mutex> g(mu_);
            if (!error_) error_ = std::current_exception();
        }

        lk.lock();
        cv_done_.wait(lk, [&] { return pending_ == 0; });
        body_ = nullptr;
        if (error_) std::rethrow_exception(error_);
    }

  private:
    void ensure_threads(int helpers) {
        while (int(threads_.size()) < helpers) {
            int id = int(threads_.size()) + 1;
            threads_.emplace_back([this, id] { worker_loop(id); });
        }
    }

    void worker_loop(int id) {
        int seen = 0;
        for (;;) {
            std::unique_lock<std::mutex> lk(mu_);
            cv_work_.wait(lk, [&] { return epoch_ != seen && id <= active_; });
            seen = epoch_;
            const std::function<void(int)>* body = body_;
            lk.unlock();
            try {
                (*body)(id);
            } catch (...) {
                std::lock_guard<std::mutex> g(mu_);
                if (!error_) error_ = std::current_exception();
            }
            lk.lock();
            if (--pending_ == 0) cv_done_.notify_all();
        }
    }

    std::mutex mu_;
    std::condition_variable cv_work_, cv_done_;
    std::vector<std::thread> threads_;
    const std::function<void(int)>* body_ = nullptr;
    int epoch_ = 0;
    int active_ = 0;
    int pending_ = 0;
    std::exception_ptr error_;
};

}  // namespace

int worker_count() {
    int w = g_workers.load(std::memory_order_relaxed);
    if (w == 0) {
        w = initial_worker_count();
        g_workers.store(w, std::memory_order_relaxed);
    }
    return w;
}

void set_worker_count(int workers) {
    if (workers < 1) workers = 1;
    if (workers > kMaxWorkers) workers = kMaxWorkers;
    g_workers.store(workers, std::memory_order_relaxed);
}

void parallel_chunks(int64_t n, int chunks_hint,
                     const std::function<void(int, int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    int workers = worker_count();
    if (chunks_hint <= 0) chunks_hint = workers * 4;
    int64_t chunks = std::min<int64_t>(n, chunks_hint);
    int64_t chunk_size = (n + chunks - 1) / chunks;
    chunks = (n + chunk_size - 1) / chunk_size;

    if (workers == 1 || chunks == 1) {
        for (int64_t c = 0; c < chunks; ++c) {
            int64_t b = c * chunk_size;
            fn(0, b, std::min(n, b + chunk_size));
        }
        return;
    }

    int used = int(std::min<int64_t>(workers, chunks));
    Pool::instance().run(used, [&](int w) {
        for (int64_t c = w; c < chunks; c += used) {
            int64_t b = c * chunk_size;
            fn(w, b, std::min(n, b + chunk_size));
        }
    });
}

void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
    parallel_chunks(n, 0, [&](int, int64_t b, int64_t e) {
        for (int64_t i = b; i < e; ++i) fn(i);
    });
}

}  // namespace rfmesh
