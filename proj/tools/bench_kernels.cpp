// Times the retrieval hot loops serially and OpenMP-parallel on a generated
// universe and confirms both modes produce identical bytes. Build and run:
//   cmake --build build --target bench_kernels && build/tools/bench_kernels
#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "finsrag/indicators.hpp"
#include "finsrag/kernels.hpp"
#include "finsrag/sequence.hpp"
#include "finsrag/synthetic.hpp"

using namespace finsrag;

namespace {

double seconds(std::chrono::steady_clock::time_point a, std::chrono::steady_clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

template <class Fn>
double time_best_of(int reps, Fn&& fn) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        auto t0 = std::chrono::steady_clock::now();
        fn();
        auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, seconds(t0, t1));
    }
    return best;
}

void report(const char* name, double serial, double parallel, bool identical) {
    std::printf("%-16s serial %8.3f ms   parallel %8.3f ms   speedup %5.2fx   %s\n", name,
                serial * 1e3, parallel * 1e3, parallel > 0 ? serial / parallel : 0.0,
                identical ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    int stocks = 10, days = 260, reps = 3;
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        auto val = [&] { return i + 1 < argc ? std::stoi(argv[++i]) : 0; };
        if (a == "--stocks") stocks = val();
        else if (a == "--days") days = val();
        else if (a == "--reps") reps = val();
        else {
            std::fprintf(stderr, "usage: bench_kernels [--stocks N] [--days N] [--reps N]\n");
            return 2;
        }
    }

    SyntheticMarketSpec spec;
    spec.stocks = stocks;
    spec.days = days;
    BarTable bars = generate_synthetic_market(spec);
    FeatureTable table = build_feature_table(bars);
    CandidatePool pool = build_pool(table, table.last_date(), table.first_date());
    std::printf("universe: %d stocks x %d days -> %zu candidates\n", stocks, days,
                pool.items.size());

    EmbedderConfig net;
    EmbedderParams params = init_embedder(net);

    std::vector<float> rows_s, rows_p;
    double t_s = time_best_of(reps, [&] {
        rows_s = kernels::embed_rows(params, pool.items, ExecMode::serial);
    });
    double t_p = time_best_of(reps, [&] {
        rows_p = kernels::embed_rows(params, pool.items, ExecMode::parallel);
    });
    bool ok = rows_s.size() == rows_p.size() &&
              std::memcmp(rows_s.data(), rows_p.data(), rows_s.size() * sizeof(float)) == 0;
    report("embed_rows", t_s, t_p, ok);
    bool all_ok = ok;

    const StockFeatures& sf = table.stocks.front();
    std::optional<Query> built;
    for (size_t t = sf.size(); t-- > 0 && !built;) built = build_query(table, sf.stock, sf.dates[t]);
    if (!built) {
        std::fprintf(stderr, "no non-freeze query day found\n");
        return 1;
    }
    Query q = *built;
    std::vector<float> qe = embed_f32(params, featurize(q));
    size_t dim = size_t(params.output_dim());
    std::vector<double> sim_s, sim_p;
    t_s = time_best_of(reps, [&] {
        sim_s = kernels::similarity_scan(qe, rows_s, dim, ExecMode::serial);
    });
    t_p = time_best_of(reps, [&] {
        sim_p = kernels::similarity_scan(qe, rows_s, dim, ExecMode::parallel);
    });
    ok = sim_s.size() == sim_p.size() &&
         std::memcmp(sim_s.data(), sim_p.data(), sim_s.size() * sizeof(double)) == 0;
    report("similarity_scan", t_s, t_p, ok);
    all_ok = all_ok && ok;

    std::vector<size_t> numeric;
    for (size_t i = 0; i < pool.items.size(); ++i)
        if (kColumns[size_t(pool.items[i].column)].kind == ColumnKind::numeric)
            numeric.push_back(i);
    std::vector<double> dtw_s, dtw_p;
    t_s = time_best_of(reps, [&] {
        dtw_s = kernels::dtw_scan(q.adjusted_close, pool.items, numeric, ExecMode::serial);
    });
    t_p = time_best_of(reps, [&] {
        dtw_p = kernels::dtw_scan(q.adjusted_close, pool.items, numeric, ExecMode::parallel);
    });
    ok = dtw_s.size() == dtw_p.size() &&
         std::memcmp(dtw_s.data(), dtw_p.data(), dtw_s.size() * sizeof(double)) == 0;
    report("dtw_scan", t_s, t_p, ok);
    all_ok = all_ok && ok;

    return all_ok ? 0 : 1;
}
