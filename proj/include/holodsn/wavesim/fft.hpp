#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <mutex>
#include <span>

#include <fftw3.h>

#include "holodsn/core/errors.hpp"

namespace holodsn {

namespace detail {
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace detail

/// In-place 2D complex FFT over an x-fastest nx × ny array (FFTW, double precision).
/// Forward is unnormalized; inverse divides by nx·ny. One instance must not be used
/// from two threads at once; distinct instances are independent.
class Fft2D {
public:
    Fft2D(std::size_t nx, std::size_t ny) : nx_(nx), ny_(ny) {
        if (nx == 0 || ny == 0) throw ShapeError("FFT size must be positive");
        std::lock_guard lock(detail::fftw_planner_mutex());
        buf_ = fftw_alloc_complex(nx * ny);
        if (!buf_) throw Error("fftw_alloc_complex failed");
        fwd_ = fftw_plan_dft_2d(static_cast<int>(ny), static_cast<int>(nx), buf_, buf_, FFTW_FORWARD,
                                FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_2d(static_cast<int>(ny), static_cast<int>(nx), buf_, buf_, FFTW_BACKWARD,
                                FFTW_ESTIMATE);
        if (!fwd_ || !bwd_) throw Error("FFTW planning failed");
    }

    Fft2D(const Fft2D&) = delete;
    Fft2D& operator=(const Fft2D&) = delete;

    ~Fft2D() {
        std::lock_guard lock(detail::fftw_planner_mutex());
        if (fwd_) fftw_destroy_plan(fwd_);
        if (bwd_) fftw_destroy_plan(bwd_);
        if (buf_) fftw_free(buf_);
    }

    [[nodiscard]] std::size_t nx() const noexcept { return nx_; }
    [[nodiscard]] std::size_t ny() const noexcept { return ny_; }

    void forward(std::span<std::complex<double>> data) { run(fwd_, data, 1.0); }

    void inverse(std::span<std::complex<double>> data) {
        run(bwd_, data, 1.0 / static_cast<double>(nx_ * ny_));
    }

private:
    void run(fftw_plan plan, std::span<std::complex<double>> data, double scale) {
        if (data.size() != nx_ * ny_) throw ShapeError("FFT input size mismatch");
        auto* b = reinterpret_cast<std::complex<double>*>(buf_);
        std::copy(data.begin(), data.end(), b);
        fftw_execute(plan);
        if (scale == 1.0) {
            std::copy(b, b + data.size(), data.begin());
        } else {
            for (std::size_t i = 0; i < data.size(); ++i) data[i] = b[i] * scale;
        }
    }

    std::size_t nx_;
    std::size_t ny_;
    fftw_complex* buf_ = nullptr;
    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
};

}  // namespace holodsn
