#pragma once
// Retrieval baselines: dynamic time warping over raw value windows, and
// seeded uniform random draws from the pool.

#include <cstdint>
#include <span>
#include <vector>

#include "finsrag/exec.hpp"
#include "finsrag/retriever.hpp"

namespace finsrag {

// min over warping paths of sqrt(sum of squared pointwise differences),
// by the standard dynamic program over squared costs. Throws on empty input.
double dtw_distance(std::span<const double> x, std::span<const double> y);

// Ascending by DTW distance between the query's adjusted-close window and
// each numeric candidate's value window; signal- and movement-typed
// candidates are skipped. Ties: (date, stock, indicator name).
std::vector<RetrievedCandidate> retrieve_dtw(const Query& query, const PoolView& view, size_t k,
                                             ExecMode mode = ExecMode::parallel);

// Uniform sample without replacement, seeded by the query identity; excess k
// returns the whole view in draw order.
std::vector<RetrievedCandidate> retrieve_random(const Query& query, const PoolView& view, size_t k,
                                                uint64_t base_seed);

}  // namespace finsrag
