#include "finsrag/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <iterator>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "finsrag/hash.hpp"
#include "finsrag/kernels.hpp"
#include "finsrag/rng.hpp"

namespace finsrag {

// ─── featurization ───

namespace {

// movement slot: rise 0, fall 1, freeze 2, absent-for-query 3
std::vector<double> featurize_core(int one_hot, const std::array<double, kWindowDays>& window,
                                   int movement_slot) {
    std::vector<double> f(kFeatureDim, 0.0);
    f[one_hot] = 1.0;
    double mean = 0, mean_abs = 0;
    for (double v : window) {
        if (!std::isfinite(v)) throw std::invalid_argument("featurize: non-finite window value");
        mean += v;
        mean_abs += std::abs(v);
    }
    mean /= kWindowDays;
    mean_abs /= kWindowDays;
    double var = 0;
    for (double v : window) var += (v - mean) * (v - mean);
    var /= kWindowDays;
    double sd = std::max(std::sqrt(var), 1e-8);
    for (int i = 0; i < kWindowDays; ++i) f[35 + i] = (window[i] - mean) / sd;
    f[40 + movement_slot] = 1.0;
    f[44] = std::log1p(mean_abs);
    return f;
}

}  // namespace

std::vector<double> featurize(const Query& q) {
    return featurize_core(34, q.adjusted_close, 3);
}

std::vector<double> featurize(const Candidate& c) {
    if (c.column < 0 || c.column >= kNumColumns)
        throw std::invalid_argument("featurize: unknown indicator index " + std::to_string(c.column));
    std::array<double, kWindowDays> window;
    for (int i = 0; i < kWindowDays; ++i) {
        const CandidateValue& v = c.values[i];
        if (const double* d = std::get_if<double>(&v)) window[i] = *d;
        else if (const Signal* s = std::get_if<Signal>(&v)) window[i] = symbolic_code(*s);
        else window[i] = symbolic_code(std::get<Movement>(v));
    }
    int slot = c.movement == Movement::rise ? 0 : c.movement == Movement::fall ? 1 : 2;
    return featurize_core(c.column, window, slot);
}

// ─── embedder ───

int EmbedderParams::input_dim() const {
    if (layers.empty()) throw std::logic_error("embedder has no layers");
    return layers.front().in;
}

int EmbedderParams::output_dim() const {
    if (layers.empty()) throw std::logic_error("embedder has no layers");
    return layers.back().out;
}

EmbedderParams init_embedder(const EmbedderConfig& cfg, int input_dim) {
    std::vector<int> dims;
    dims.push_back(input_dim);
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(cfg.output_dim);
    for (int d : dims)
        if (d < 1) throw std::invalid_argument("init_embedder: layer widths must be positive");

    EmbedderParams p;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        EmbedderParams::Layer layer;
        layer.in = dims[l];
        layer.out = dims[l + 1];
        double a = std::sqrt(6.0 / (layer.in + layer.out));
        DetRng rng(derive_seed(cfg.seed, "init", l));
        layer.w.resize(size_t(layer.out) * layer.in);
        for (double& w : layer.w) w = rng.uniform(-a, a);
        layer.b.assign(layer.out, 0.0);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

namespace {

struct ForwardCache {
    std::vector<std::vector<double>> act;  // act[0] = input, act[l+1] = layer l output
    std::vector<double> unit;
    double norm = 0;
};

ForwardCache forward_pass(const EmbedderParams& params, const std::vector<double>& x) {
    if (params.layers.empty()) throw std::invalid_argument("embed: params have no layers");
    if (int(x.size()) != params.layers.front().in)
        throw std::invalid_argument("embed: feature length " + std::to_string(x.size()) +
                                    " does not match input dim " +
                                    std::to_string(params.layers.front().in));
    ForwardCache c;
    c.act.reserve(params.layers.size() + 1);
    c.act.push_back(x);
    for (size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        const auto& a = c.act.back();
        if (int(a.size()) != layer.in)
            throw std::invalid_argument("embed: dim chain breaks at layer " + std::to_string(l + 1));
        bool last = l + 1 == params.layers.size();
        std::vector<double> z(layer.out);
        for (int r = 0; r < layer.out; ++r) {
            double s = layer.b[r];
            const double* wr = &layer.w[size_t(r) * layer.in];
            for (int k = 0; k < layer.in; ++k) s += wr[k] * a[k];
            z[r] = last ? s : std::tanh(s);
            if (!std::isfinite(z[r]))
                throw std::runtime_error("embed: non-finite activation in layer " +
                                         std::to_string(l + 1) + " of " +
                                         std::to_string(params.layers.size()));
        }
        c.act.push_back(std::move(z));
    }
    const auto& y = c.act.back();
    double n2 = 0;
    for (double v : y) n2 += v * v;
    c.norm = std::sqrt(n2);
    if (!(c.norm > 1e-12))
        throw std::runtime_error("embed: output norm is below 1e-12, cannot normalize");
    c.unit.resize(y.size());
    for (size_t i = 0; i < y.size(); ++i) c.unit[i] = y[i] / c.norm;
    return c;
}

EmbedderParams zero_like(const EmbedderParams& p) {
    EmbedderParams z;
    z.layers.reserve(p.layers.size());
    for (const auto& layer : p.layers) {
        EmbedderParams::Layer zl;
        zl.in = layer.in;
        zl.out = layer.out;
        zl.w.assign(layer.w.size(), 0.0);
        zl.b.assign(layer.b.size(), 0.0);
        z.layers.push_back(std::move(zl));
    }
    return z;
}

// grad += d(loss)/d(params) for one sequence whose normalized output got
// gradient g_unit. Walks the normalization Jacobian, then each layer.
void backward_pass(const EmbedderParams& params, const ForwardCache& c,
                   const std::vector<double>& g_unit, EmbedderParams& grad) {
    size_t n_layers = params.layers.size();
    double gu_dot_u = 0;
    for (size_t i = 0; i < c.unit.size(); ++i) gu_dot_u += g_unit[i] * c.unit[i];
    std::vector<double> g(c.unit.size());
    for (size_t i = 0; i < c.unit.size(); ++i)
        g[i] = (g_unit[i] - gu_dot_u * c.unit[i]) / c.norm;

    for (size_t l = n_layers; l-- > 0;) {
        const auto& layer = params.layers[l];
        const auto& a_in = c.act[l];
        const auto& a_out = c.act[l + 1];
        std::vector<double> gz = std::move(g);
        if (l + 1 != n_layers)  // hidden layers are tanh; the last is linear
            for (int r = 0; r < layer.out; ++r) gz[r] *= 1.0 - a_out[r] * a_out[r];
        auto& gl = grad.layers[l];
        for (int r = 0; r < layer.out; ++r) {
            gl.b[r] += gz[r];
            double* gw = &gl.w[size_t(r) * layer.in];
            for (int k = 0; k < layer.in; ++k) gw[k] += gz[r] * a_in[k];
        }
        if (l > 0) {
            g.assign(layer.in, 0.0);
            for (int r = 0; r < layer.out; ++r) {
                const double* wr = &layer.w[size_t(r) * layer.in];
                for (int k = 0; k < layer.in; ++k) g[k] += wr[k] * gz[r];
            }
        }
    }
}

}  // namespace

std::vector<double> embed(const EmbedderParams& params, const std::vector<double>& features) {
    return forward_pass(params, features).unit;
}

std::vector<float> embed_f32(const EmbedderParams& params, const std::vector<double>& features) {
    std::vector<double> u = embed(params, features);
    return std::vector<float>(u.begin(), u.end());
}

double similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("similarity: length mismatch");
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double similarity(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw std::invalid_argument("similarity: length mismatch");
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += double(a[i]) * double(b[i]);
    return s;
}

// ─── distillation ───

DistillResult distill_loss(const TrainingExample& ex, const EmbedderParams& params, double tau) {
    if (!(tau > 0) || !std::isfinite(tau))
        throw std::invalid_argument("distill_loss: tau must be positive");
    size_t m = 1 + ex.negatives.size();
    if (ex.weights.size() != m)
        throw std::invalid_argument("distill_loss: " + std::to_string(ex.weights.size()) +
                                    " weights for " + std::to_string(m) + " candidates");
    for (double w : ex.weights)
        if (!std::isfinite(w) || w < 0)
            throw std::invalid_argument("distill_loss: weights must be finite and non-negative");

    ForwardCache cq = forward_pass(params, featurize(ex.query));
    std::vector<ForwardCache> cc;
    cc.reserve(m);
    cc.push_back(forward_pass(params, featurize(ex.positive)));
    for (const Candidate& neg : ex.negatives) cc.push_back(forward_pass(params, featurize(neg)));

    std::vector<double> s(m);
    for (size_t j = 0; j < m; ++j) s[j] = similarity(cq.unit, cc[j].unit) / tau;
    double mx = *std::max_element(s.begin(), s.end());
    double lse = 0;
    for (double v : s) lse += std::exp(v - mx);
    lse = mx + std::log(lse);

    double sw = 0, loss = 0;
    for (size_t j = 0; j < m; ++j) {
        sw += ex.weights[j];
        loss += ex.weights[j] * (lse - s[j]);
    }

    // dL/ds_j = p_j * sum(w) - w_j, which is the usual p - w for a
    // probability vector w.
    std::vector<double> d(m);
    for (size_t j = 0; j < m; ++j) d[j] = std::exp(s[j] - lse) * sw - ex.weights[j];

    DistillResult out;
    out.loss = loss;
    out.grad = zero_like(params);
    size_t dim = cq.unit.size();
    std::vector<double> g_uq(dim, 0.0);
    for (size_t j = 0; j < m; ++j)
        for (size_t i = 0; i < dim; ++i) g_uq[i] += d[j] * cc[j].unit[i] / tau;
    backward_pass(params, cq, g_uq, out.grad);
    std::vector<double> g_uc(dim);
    for (size_t j = 0; j < m; ++j) {
        for (size_t i = 0; i < dim; ++i) g_uc[i] = d[j] * cq.unit[i] / tau;
        backward_pass(params, cc[j], g_uc, out.grad);
    }
    return out;
}

TrainOutcome train(const std::vector<TrainingExample>& examples, const EmbedderConfig& net,
                   const TrainConfig& cfg) {
    if (examples.empty()) throw std::invalid_argument("train: need at least one example");
    if (!(cfg.tau > 0)) throw std::invalid_argument("train: tau must be positive");
    if (!(cfg.learn_rate > 0) || !std::isfinite(cfg.learn_rate))
        throw std::invalid_argument("train: step size must be positive");
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch size must be at least 1");
    if (cfg.epochs < 0) throw std::invalid_argument("train: epochs must be non-negative");

    TrainOutcome out;
    out.params = init_embedder(net);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<size_t> order(examples.size());
        std::iota(order.begin(), order.end(), size_t{0});
        DetRng rng(derive_seed(cfg.seed, "shuffle", uint64_t(epoch)));
        rng.shuffle(order);

        double loss_sum = 0;
        for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_size)) {
            size_t stop = std::min(order.size(), start + size_t(cfg.batch_size));
            EmbedderParams grad = zero_like(out.params);
            double batch_loss = 0;
            for (size_t j = start; j < stop; ++j) {
                DistillResult r = distill_loss(examples[order[j]], out.params, cfg.tau);
                batch_loss += r.loss;
                for (size_t l = 0; l < grad.layers.size(); ++l) {
                    auto& gl = grad.layers[l];
                    const auto& rl = r.grad.layers[l];
                    for (size_t i = 0; i < gl.w.size(); ++i) gl.w[i] += rl.w[i];
                    for (size_t i = 0; i < gl.b.size(); ++i) gl.b[i] += rl.b[i];
                }
            }
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch + 1) + ", batch at example " +
                                         std::to_string(start) + "; lower the step size");
            loss_sum += batch_loss;
            double step = cfg.learn_rate / double(stop - start);
            for (size_t l = 0; l < out.params.layers.size(); ++l) {
                auto& pl = out.params.layers[l];
                const auto& gl = grad.layers[l];
                for (size_t i = 0; i < pl.w.size(); ++i) pl.w[i] -= step * gl.w[i];
                for (size_t i = 0; i < pl.b.size(); ++i) pl.b[i] -= step * gl.b[i];
            }
        }
        out.epoch_mean_loss.push_back(loss_sum / double(examples.size()));
    }
    return out;
}

// ─── retrieval ───

EmbeddingCache embed_pool(std::span<const Candidate> pool, const EmbedderParams& params,
                          ExecMode mode) {
    EmbeddingCache cache;
    cache.dim = uint32_t(params.output_dim());
    cache.rows = kernels::embed_rows(params, pool, mode);
    return cache;
}

std::vector<RetrievedCandidate> retrieve_topk(const Query& query, const PoolView& view,
                                              const EmbedderParams& params, size_t k,
                                              const EmbeddingCache* cache, ExecMode mode) {
    size_t n = view.items.size();
    if (n == 0 || k == 0) return {};
    std::vector<float> q_emb = embed_f32(params, featurize(query));

    EmbeddingCache local;
    const EmbeddingCache* rows = cache;
    if (rows) {
        if (rows->dim != q_emb.size())
            throw std::invalid_argument("retrieve_topk: cache dim " + std::to_string(rows->dim) +
                                        " does not match embedder output " +
                                        std::to_string(q_emb.size()));
        if (rows->count() < n)
            throw std::invalid_argument("retrieve_topk: cache holds " +
                                        std::to_string(rows->count()) + " rows for a view of " +
                                        std::to_string(n));
    } else {
        local = embed_pool(view.items, params, mode);
        rows = &local;
    }

    std::vector<double> scores = kernels::similarity_scan(
        q_emb, std::span<const float>(rows->rows.data(), n * rows->dim), rows->dim, mode);

    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    size_t kk = std::min(k, n);
    std::partial_sort(idx.begin(), idx.begin() + kk, idx.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return candidate_less(view.items[a], view.items[b]);
    });
    std::vector<RetrievedCandidate> out;
    out.reserve(kk);
    for (size_t j = 0; j < kk; ++j)
        out.push_back({idx[j], &view.items[idx[j]], scores[idx[j]]});
    return out;
}

// ─── binary round trips ───

namespace {

void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& buf, float f) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(buf, bits);
}

struct Cursor {
    const std::string& buf;
    size_t at = 0;
    const char* what;

    void need(size_t n) const {
        if (at + n > buf.size())
            throw std::runtime_error(std::string(what) + ": truncated file");
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(buf[at + i])) << (8 * i);
        at += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(buf[at + i])) << (8 * i);
        at += 8;
        return v;
    }
    float f32() {
        uint32_t bits = u32();
        float f;
        std::memcpy(&f, &bits, 4);
        return f;
    }
};

std::string slurp(std::istream& in) {
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

void write_params(const EmbedderParams& params, std::ostream& out) {
    if (params.layers.empty()) throw std::invalid_argument("write_params: params have no layers");
    std::string buf = "FSEER1";
    put_u32(buf, uint32_t(params.layers.size()));
    for (const auto& layer : params.layers) {
        put_u32(buf, uint32_t(layer.in));
        put_u32(buf, uint32_t(layer.out));
    }
    for (const auto& layer : params.layers) {
        for (double w : layer.w) put_f32(buf, float(w));
        for (double b : layer.b) put_f32(buf, float(b));
    }
    put_u64(buf, fnv1a64(std::string_view(buf)));
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out) throw std::runtime_error("write_params: stream failure");
}

EmbedderParams read_params(std::istream& in) {
    std::string buf = slurp(in);
    if (buf.size() < 6 + 4 + 8 || buf.compare(0, 6, "FSEER1") != 0)
        throw std::runtime_error("params file: bad magic (expected FSEER1)");
    uint64_t stored = 0;
    for (int i = 0; i < 8; ++i)
        stored |= uint64_t(uint8_t(buf[buf.size() - 8 + i])) << (8 * i);
    if (fnv1a64(std::string_view(buf.data(), buf.size() - 8)) != stored)
        throw std::runtime_error("params file: checksum mismatch (corrupt or truncated)");

    Cursor cur{buf, 6, "params file"};
    uint32_t n_layers = cur.u32();
    if (n_layers == 0 || n_layers > 64)
        throw std::runtime_error("params file: implausible layer count " +
                                 std::to_string(n_layers));
    EmbedderParams p;
    for (uint32_t l = 0; l < n_layers; ++l) {
        EmbedderParams::Layer layer;
        layer.in = int(cur.u32());
        layer.out = int(cur.u32());
        if (layer.in < 1 || layer.out < 1 || layer.in > 1'000'000 || layer.out > 1'000'000)
            throw std::runtime_error("params file: implausible layer dims");
        if (!p.layers.empty() && p.layers.back().out != layer.in)
            throw std::runtime_error("params file: layer dim chain breaks at layer " +
                                     std::to_string(l + 1));
        p.layers.push_back(std::move(layer));
    }
    for (auto& layer : p.layers) {
        layer.w.resize(size_t(layer.out) * layer.in);
        for (double& w : layer.w) w = cur.f32();
        layer.b.resize(layer.out);
        for (double& b : layer.b) b = cur.f32();
    }
    if (cur.at != buf.size() - 8)
        throw std::runtime_error("params file: trailing bytes before checksum");
    for (const auto& layer : p.layers) {
        for (double w : layer.w)
            if (!std::isfinite(w)) throw std::runtime_error("params file: non-finite weight");
        for (double b : layer.b)
            if (!std::isfinite(b)) throw std::runtime_error("params file: non-finite bias");
    }
    return p;
}

void write_embedding_cache(const EmbeddingCache& cache, std::ostream& out) {
    if (cache.dim == 0 && !cache.rows.empty())
        throw std::invalid_argument("write_embedding_cache: dim 0 with rows present");
    if (cache.dim != 0 && cache.rows.size() % cache.dim != 0)
        throw std::invalid_argument("write_embedding_cache: rows not a multiple of dim");
    std::string buf = "FSEMB1";
    put_u32(buf, uint32_t(cache.count()));
    put_u32(buf, cache.dim);
    for (float f : cache.rows) put_f32(buf, f);
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out) throw std::runtime_error("write_embedding_cache: stream failure");
}

EmbeddingCache read_embedding_cache(std::istream& in) {
    std::string buf = slurp(in);
    if (buf.size() < 6 + 8 || buf.compare(0, 6, "FSEMB1") != 0)
        throw std::runtime_error("embedding cache: bad magic (expected FSEMB1)");
    Cursor cur{buf, 6, "embedding cache"};
    uint32_t count = cur.u32();
    uint32_t dim = cur.u32();
    if (count != 0 && dim == 0)
        throw std::runtime_error("embedding cache: zero dim with rows present");
    if (buf.size() != 6 + 8 + size_t(4) * count * dim)
        throw std::runtime_error("embedding cache: size does not match header");
    EmbeddingCache cache;
    cache.dim = dim;
    cache.rows.resize(size_t(count) * dim);
    for (float& f : cache.rows) {
        f = cur.f32();
        if (!std::isfinite(f)) throw std::runtime_error("embedding cache: non-finite entry");
    }
    return cache;
}

// ─── remote embedder ───

RemoteEmbedder::RemoteEmbedder(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

std::vector<float> RemoteEmbedder::embed_text(const std::string& text) {
    nlohmann::ordered_json body = nlohmann::ordered_json::object();
    body["text"] = text;
    nlohmann::ordered_json reply = post_json(endpoint_, body);
    if (!reply.is_object() || !reply.contains("embedding") || !reply["embedding"].is_array() ||
        reply["embedding"].empty())
        throw std::runtime_error("embedder reply: expected a non-empty embedding array");
    std::vector<double> v;
    v.reserve(reply["embedding"].size());
    for (const auto& e : reply["embedding"]) {
        if (!e.is_number()) throw std::runtime_error("embedder reply: non-numeric entry");
        double d = e.get<double>();
        if (!std::isfinite(d)) throw std::runtime_error("embedder reply: non-finite entry");
        v.push_back(d);
    }
    double n2 = 0;
    for (double d : v) n2 += d * d;
    double norm = std::sqrt(n2);
    if (!(norm > 1e-12)) throw std::runtime_error("embedder reply: zero-norm embedding");
    std::vector<float> out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = float(v[i] / norm);
    return out;
}

std::vector<RetrievedCandidate> retrieve_topk_remote(const Query& query, const PoolView& view,
                                                     RemoteEmbedder& embedder, size_t k) {
    size_t n = view.items.size();
    if (n == 0 || k == 0) return {};
    std::vector<float> q_emb = embedder.embed_text(serialize_query(query));
    std::vector<double> scores(n);
    for (size_t i = 0; i < n; ++i) {
        std::vector<float> c_emb = embedder.embed_text(serialize_candidate(view.items[i]));
        if (c_emb.size() != q_emb.size())
            throw std::runtime_error("embedder reply: dimension changed between calls");
        scores[i] = similarity(std::span<const float>(q_emb), std::span<const float>(c_emb));
    }
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    size_t kk = std::min(k, n);
    std::partial_sort(idx.begin(), idx.begin() + kk, idx.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return candidate_less(view.items[a], view.items[b]);
    });
    std::vector<RetrievedCandidate> out;
    out.reserve(kk);
    for (size_t j = 0; j < kk; ++j)
        out.push_back({idx[j], &view.items[idx[j]], scores[idx[j]]});
    return out;
}

}  // namespace finsrag
