#pragma once
// The retrieval-path hot loops, each runnable serially or OpenMP
// data-parallel with bitwise-identical results: every element is computed by
// the same arithmetic and written to its own slot.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "finsrag/exec.hpp"
#include "finsrag/retriever.hpp"

namespace finsrag::kernels {

// Featurize + embed, one f32 row per candidate.
std::vector<float> embed_rows(const EmbedderParams& params, std::span<const Candidate> candidates,
                              ExecMode mode);

// Double-precision dot of the query embedding against each row of the cache.
std::vector<double> similarity_scan(std::span<const float> query, std::span<const float> rows,
                                    size_t dim, ExecMode mode);

// DTW distance from the query window to each candidates[indices[j]], output
// aligned with `indices` (callers pick the numeric candidates).
std::vector<double> dtw_scan(const std::array<double, kWindowDays>& query_window,
                             std::span<const Candidate> candidates,
                             std::span<const size_t> indices, ExecMode mode);

}  // namespace finsrag::kernels
