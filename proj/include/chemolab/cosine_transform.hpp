#ifndef CHEMOLAB_COSINE_TRANSFORM_HPP
#define CHEMOLAB_COSINE_TRANSFORM_HPP

#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include <fftw3.h>

namespace chemolab {

/// Expansion in the Neumann cosine modes of a cell-centered grid.
///
/// forward() returns coefficients c_k with f_j = sum_k c_k cos(k pi (j+1/2)/n);
/// inverse() evaluates that sum. The fast path is FFTW's REDFT10/REDFT01 pair
/// (DCT-II/DCT-III); the direct path is the O(n^2) projection on a cached
/// cosine table. Both are exposed so they can be checked against each other.
class CosineTransform {
public:
    enum class Path { automatic, fast, direct };

    explicit CosineTransform(std::size_t n) : n_(n)
    {
        std::vector<double> a(n), b(n);
        std::lock_guard<std::mutex> lock(planner_mutex());
        forward_plan_ = fftw_plan_r2r_1d(static_cast<int>(n), a.data(), b.data(), FFTW_REDFT10,
                                         FFTW_ESTIMATE | FFTW_UNALIGNED);
        inverse_plan_ = fftw_plan_r2r_1d(static_cast<int>(n), a.data(), b.data(), FFTW_REDFT01,
                                         FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
    CosineTransform(const CosineTransform&) = delete;
    CosineTransform& operator=(const CosineTransform&) = delete;
    ~CosineTransform()
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(forward_plan_);
        fftw_destroy_plan(inverse_plan_);
    }

    /// Shared instance for size n; safe to call from several threads.
    static std::shared_ptr<const CosineTransform> get(std::size_t n)
    {
        static std::mutex m;
        static std::map<std::size_t, std::shared_ptr<const CosineTransform>> cache;
        std::lock_guard<std::mutex> lock(m);
        auto& slot = cache[n];
        if (!slot) slot = std::make_shared<const CosineTransform>(n);
        return slot;
    }

    std::size_t size() const { return n_; }

    /// Sizes whose prime factors are all <= 7 go through FFTW by default.
    static bool convenient(std::size_t n)
    {
        for (std::size_t p : {2u, 3u, 5u, 7u})
            while (n % p == 0) n /= p;
        return n == 1;
    }

    void forward(std::span<const double> f, std::span<double> coeff, Path path = Path::automatic) const
    {
        if (use_fast(path)) {
            fftw_execute_r2r(forward_plan_, const_cast<double*>(f.data()), coeff.data());
            const double inv_n = 1.0 / static_cast<double>(n_);
            coeff[0] *= 0.5 * inv_n;
            for (std::size_t k = 1; k < n_; ++k) coeff[k] *= inv_n;
            return;
        }
        const auto& c = table();
        for (std::size_t k = 0; k < n_; ++k) {
            const double* row = &c[k * n_];
            double s = 0.0;
            for (std::size_t j = 0; j < n_; ++j) s += row[j] * f[j];
            coeff[k] = s * (k == 0 ? 1.0 : 2.0) / static_cast<double>(n_);
        }
    }

    void inverse(std::span<const double> coeff, std::span<double> f, Path path = Path::automatic) const
    {
        if (use_fast(path)) {
            std::vector<double> half(coeff.begin(), coeff.end());
            for (std::size_t k = 1; k < n_; ++k) half[k] *= 0.5;
            fftw_execute_r2r(inverse_plan_, half.data(), f.data());
            return;
        }
        const auto& c = table();
        for (std::size_t j = 0; j < n_; ++j) f[j] = 0.0;
        for (std::size_t k = 0; k < n_; ++k) {
            const double* row = &c[k * n_];
            const double ck = coeff[k];
            for (std::size_t j = 0; j < n_; ++j) f[j] += ck * row[j];
        }
    }

private:
    bool use_fast(Path path) const
    {
        return path == Path::fast || (path == Path::automatic && convenient(n_));
    }

    const std::vector<double>& table() const
    {
        std::call_once(table_once_, [this] {
            table_.resize(n_ * n_);
            const double n = static_cast<double>(n_);
            for (std::size_t k = 0; k < n_; ++k)
                for (std::size_t j = 0; j < n_; ++j)
                    table_[k * n_ + j] =
                        std::cos(std::numbers::pi * static_cast<double>(k) * (static_cast<double>(j) + 0.5) / n);
        });
        return table_;
    }

    static std::mutex& planner_mutex()
    {
        static std::mutex m;
        return m;
    }

    std::size_t n_;
    fftw_plan forward_plan_;
    fftw_plan inverse_plan_;
    mutable std::once_flag table_once_;
    mutable std::vector<double> table_;
};

} // namespace chemolab

#endif
