#include "finsrag/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "finsrag/kernels.hpp"
#include "finsrag/rng.hpp"

namespace finsrag {

double dtw_distance(std::span<const double> x, std::span<const double> y) {
    if (x.empty() || y.empty()) throw std::domain_error("dtw_distance: empty sequence");
    for (double v : x)
        if (!std::isfinite(v)) throw std::domain_error("dtw_distance: non-finite value");
    for (double v : y)
        if (!std::isfinite(v)) throw std::domain_error("dtw_distance: non-finite value");

    const double inf = std::numeric_limits<double>::infinity();
    size_t m = y.size();
    std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
    prev[0] = 0;
    for (size_t i = 1; i <= x.size(); ++i) {
        cur[0] = inf;
        for (size_t j = 1; j <= m; ++j) {
            double d = x[i - 1] - y[j - 1];
            cur[j] = d * d + std::min({prev[j - 1], prev[j], cur[j - 1]});
        }
        std::swap(prev, cur);
    }
    return std::sqrt(prev[m]);
}

std::vector<RetrievedCandidate> retrieve_dtw(const Query& query, const PoolView& view, size_t k,
                                             ExecMode mode) {
    size_t n = view.items.size();
    if (n == 0 || k == 0) return {};
    std::vector<size_t> numeric;
    numeric.reserve(n);
    for (size_t i = 0; i < n; ++i)
        if (kColumns[view.items[i].column].kind == ColumnKind::numeric) numeric.push_back(i);
    if (numeric.empty()) return {};

    std::vector<double> dist = kernels::dtw_scan(query.adjusted_close, view.items, numeric, mode);

    std::vector<size_t> order(numeric.size());
    std::iota(order.begin(), order.end(), size_t{0});
    size_t kk = std::min(k, numeric.size());
    std::partial_sort(order.begin(), order.begin() + kk, order.end(), [&](size_t a, size_t b) {
        if (dist[a] != dist[b]) return dist[a] < dist[b];
        return candidate_less(view.items[numeric[a]], view.items[numeric[b]]);
    });
    std::vector<RetrievedCandidate> out;
    out.reserve(kk);
    for (size_t j = 0; j < kk; ++j) {
        size_t id = numeric[order[j]];
        out.push_back({id, &view.items[id], dist[order[j]]});
    }
    return out;
}

std::vector<RetrievedCandidate> retrieve_random(const Query& query, const PoolView& view, size_t k,
                                                uint64_t base_seed) {
    size_t n = view.items.size();
    if (n == 0 || k == 0) return {};
    DetRng rng(derive_seed(base_seed,
                           "random-retrieval/" + query.stock + "/" + format_date(query.date)));
    std::vector<size_t> picks = rng.sample_without_replacement(n, std::min(k, n));
    std::vector<RetrievedCandidate> out;
    out.reserve(picks.size());
    for (size_t id : picks) out.push_back({id, &view.items[id], 0.0});
    return out;
}

}  // namespace finsrag
