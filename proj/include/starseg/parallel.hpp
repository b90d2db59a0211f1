#pragma once

// Every data-parallel kernel in the library takes an Exec tag. Exec::Serial
// is the reference path kept for testing; Exec::Parallel runs the same loop
// body under OpenMP and must produce bit-identical results.

#include <cstddef>
#include <cstdint>
#include <exception>

#include <omp.h>

namespace starseg {

enum class Exec { Serial, Parallel };

/// Runs f(i) for i in [0, n). Iterations must be independent and write only
/// to slots owned by i.
template <typename F>
void for_each_index(Exec exec, std::size_t n, F&& f) {
    const auto count = static_cast<std::int64_t>(n);
    if (exec == Exec::Parallel) {
        // Exceptions cannot leave an OpenMP region; keep the one from the
        // lowest index so the error reported matches the serial path.
        std::exception_ptr error;
        std::int64_t error_at = count;
#pragma omp parallel for schedule(dynamic, 1)
        for (std::int64_t i = 0; i < count; ++i) {
            try {
                f(static_cast<std::size_t>(i));
            } catch (...) {
#pragma omp critical(starseg_for_each_index)
                if (i < error_at) {
                    error_at = i;
                    error = std::current_exception();
                }
            }
        }
        if (error) std::rethrow_exception(error);
    } else {
        for (std::int64_t i = 0; i < count; ++i) f(static_cast<std::size_t>(i));
    }
}

/// Sets the OpenMP team size for subsequent Exec::Parallel calls; 0 keeps
/// the runtime default.
inline void set_thread_count(int threads) {
    if (threads > 0) omp_set_num_threads(threads);
}

}  // namespace starseg
