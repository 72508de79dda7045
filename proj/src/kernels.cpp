#include "finsrag/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <stdexcept>

#include "finsrag/baselines.hpp"

namespace finsrag::kernels {

namespace {

// Exceptions must not unwind out of an OpenMP region; workers park the first
// failure here and the driver rethrows it after the loop.
struct ErrorSlot {
    std::atomic<bool> failed{false};
    std::mutex mu;
    std::string message;

    void capture(const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failed.load(std::memory_order_relaxed)) {
            message = e.what();
            failed.store(true, std::memory_order_relaxed);
        }
    }
    void rethrow(const char* where) const {
        if (failed.load(std::memory_order_relaxed))
            throw std::runtime_error(std::string(where) + ": " + message);
    }
};

}  // namespace

std::vector<float> embed_rows(const EmbedderParams& params, std::span<const Candidate> candidates,
                              ExecMode mode) {
    size_t dim = size_t(params.output_dim());
    std::vector<float> rows(candidates.size() * dim);
    ErrorSlot err;
    for_each_index(candidates.size(), mode, [&](size_t i) {
        if (err.failed.load(std::memory_order_relaxed)) return;
        try {
            std::vector<float> e = embed_f32(params, featurize(candidates[i]));
            std::copy(e.begin(), e.end(), rows.begin() + ptrdiff_t(i * dim));
        } catch (const std::exception& e) {
            err.capture(e);
        }
    });
    err.rethrow("embed_rows");
    return rows;
}

std::vector<double> similarity_scan(std::span<const float> query, std::span<const float> rows,
                                    size_t dim, ExecMode mode) {
    if (dim == 0) throw std::invalid_argument("similarity_scan: dim must be positive");
    if (query.size() != dim)
        throw std::invalid_argument("similarity_scan: query length does not match dim");
    if (rows.size() % dim != 0)
        throw std::invalid_argument("similarity_scan: rows not a multiple of dim");
    size_t n = rows.size() / dim;
    std::vector<double> scores(n);
    for_each_index(n, mode, [&](size_t i) {
        const float* r = rows.data() + i * dim;
        double s = 0;
        for (size_t k = 0; k < dim; ++k) s += double(query[k]) * double(r[k]);
        scores[i] = s;
    });
    return scores;
}

std::vector<double> dtw_scan(const std::array<double, kWindowDays>& query_window,
                             std::span<const Candidate> candidates,
                             std::span<const size_t> indices, ExecMode mode) {
    for (size_t i : indices)
        if (i >= candidates.size())
            throw std::invalid_argument("dtw_scan: index out of range");
    std::vector<double> out(indices.size());
    ErrorSlot err;
    for_each_index(indices.size(), mode, [&](size_t j) {
        if (err.failed.load(std::memory_order_relaxed)) return;
        try {
            const Candidate& c = candidates[indices[j]];
            std::array<double, kWindowDays> w;
            for (int i = 0; i < kWindowDays; ++i) {
                const double* v = std::get_if<double>(&c.values[i]);
                if (!v)
                    throw std::invalid_argument("candidate " + c.stock + " " +
                                                format_date(c.date) +
                                                " has a non-numeric window");
                w[i] = *v;
            }
            out[j] = dtw_distance(std::span<const double>(query_window),
                                  std::span<const double>(w));
        } catch (const std::exception& e) {
            err.capture(e);
        }
    });
    err.rethrow("dtw_scan");
    return out;
}

}  // namespace finsrag::kernels
