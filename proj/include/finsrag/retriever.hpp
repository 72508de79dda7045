#pragma once
// Sequence featurization, a compact feed-forward embedder trained by KL
// distillation against teacher weights, and top-k retrieval by inner product
// over L2-normalized embeddings.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "finsrag/exec.hpp"
#include "finsrag/scorer.hpp"

namespace finsrag {

// Feature layout: [0,35) indicator one-hot (the 34 columns plus slot 34 for
// the query's adjusted-close window), [35,40) the 5 window values z-scored
// within the window (symbolic values mapped to ±1/0 codes first; population
// std floored at 1e-8), [40,44) movement one-hot rise/fall/freeze/absent,
// [44] log1p of the window's mean absolute value.
inline constexpr int kFeatureDim = 45;

std::vector<double> featurize(const Query& q);
std::vector<double> featurize(const Candidate& c);

struct EmbedderConfig {
    std::vector<int> hidden{128, 128};
    int output_dim = 64;
    uint64_t seed = 0;
};

struct EmbedderParams {
    struct Layer {
        int in = 0, out = 0;
        std::vector<double> w;  // row-major, out rows of in columns
        std::vector<double> b;  // out
    };
    std::vector<Layer> layers;
    int input_dim() const;
    int output_dim() const;
};

// Weights uniform in [-a, a] with a = sqrt(6/(fan_in+fan_out)), biases zero.
// Each layer draws from its own derived stream, so resizing one layer does
// not shift the others' initialization.
EmbedderParams init_embedder(const EmbedderConfig& cfg, int input_dim = kFeatureDim);

// Hidden layers tanh, linear output, then L2 normalization. Throws on a
// non-finite activation (naming the layer) or a vanishing output norm.
std::vector<double> embed(const EmbedderParams& params, const std::vector<double>& features);

// The retrieval-side form: same forward pass, narrowed to f32 after
// normalization so cached and recomputed embeddings match bit for bit.
std::vector<float> embed_f32(const EmbedderParams& params, const std::vector<double>& features);

// Inner product accumulated left to right in double; lengths must match.
double similarity(std::span<const double> a, std::span<const double> b);
double similarity(std::span<const float> a, std::span<const float> b);

struct TrainConfig {
    double alpha = 0.05;      // teacher softmax temperature (applied at mining time)
    double tau = 0.02;        // similarity softmax temperature
    double learn_rate = 0.05;
    int batch_size = 8;
    int epochs = 10;
    uint64_t seed = 0;
};

struct DistillResult {
    double loss = 0;
    EmbedderParams grad;  // same shape as the params the loss was taken at
};

// loss = -sum_i w_i log softmax(<e_q, e_ci>/tau)_i over the example's
// candidates (positive first); gradient by reverse mode through the L2
// normalization and every layer.
DistillResult distill_loss(const TrainingExample& ex, const EmbedderParams& params, double tau);

struct TrainOutcome {
    EmbedderParams params;
    std::vector<double> epoch_mean_loss;  // one entry per epoch
};

// Minibatch SGD with a seeded per-epoch shuffle; sequential over batches so
// runs with equal inputs are bit-identical. Aborts on non-finite loss.
TrainOutcome train(const std::vector<TrainingExample>& examples, const EmbedderConfig& net,
                   const TrainConfig& cfg);

struct RetrievedCandidate {
    size_t id = 0;  // canonical pool index
    const Candidate* candidate = nullptr;
    // Similarity for embedding retrieval (descending), DTW distance for the
    // DTW baseline (ascending), 0 for random retrieval.
    double score = 0;
};

struct EmbeddingCache {
    uint32_t dim = 0;
    std::vector<float> rows;  // row i = embedding of pool candidate id i
    size_t count() const { return dim == 0 ? 0 : rows.size() / dim; }
};

EmbeddingCache embed_pool(std::span<const Candidate> pool, const EmbedderParams& params,
                          ExecMode mode = ExecMode::parallel);

// Top k by similarity, ties broken by (date, stock, indicator name). When a
// cache is given it must cover the view (a prefix of the pool, so row ids
// line up); otherwise the view is embedded on the fly.
std::vector<RetrievedCandidate> retrieve_topk(const Query& query, const PoolView& view,
                                              const EmbedderParams& params, size_t k,
                                              const EmbeddingCache* cache = nullptr,
                                              ExecMode mode = ExecMode::parallel);

// Params file: "FSEER1", layer count, per-layer dims, then f32 weights and
// biases per layer, all little-endian, with a trailing FNV-1a checksum.
void write_params(const EmbedderParams& params, std::ostream& out);
EmbedderParams read_params(std::istream& in);

// Cache file: "FSEMB1", count, dim, then row-major f32 rows (integrity is
// covered by the manifest hash, not an embedded checksum).
void write_embedding_cache(const EmbeddingCache& cache, std::ostream& out);
EmbeddingCache read_embedding_cache(std::istream& in);

// External embedding endpoint: POST {text} -> {embedding: [...]}. Replies
// are validated, unit-normalized, and narrowed to f32.
class RemoteEmbedder {
public:
    explicit RemoteEmbedder(HttpEndpoint endpoint);
    std::vector<float> embed_text(const std::string& text);

private:
    HttpEndpoint endpoint_;
};

// retrieve_topk over embeddings of the serialized query/candidate text from
// a remote embedder; one call per sequence, so meant for small pools.
std::vector<RetrievedCandidate> retrieve_topk_remote(const Query& query, const PoolView& view,
                                                     RemoteEmbedder& embedder, size_t k);

}  // namespace finsrag
