#include "finsrag/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "finsrag/rng.hpp"

namespace finsrag {

namespace {

int day_of_week(const Date& date) {  // 0 = Sunday (Sakamoto)
    static const int shift[] = {0, 3, 2, 5, 0, 3, 5, 1, 4, 6, 2, 4};
    int y = date.y - (date.m < 3 ? 1 : 0);
    return (y + y / 4 - y / 100 + y / 400 + shift[date.m - 1] + date.d) % 7;
}

std::vector<Date> weekday_calendar(Date start, int days) {
    std::vector<Date> out;
    out.reserve(size_t(days));
    Date d = start;
    while (int(out.size()) < days) {
        int dow = day_of_week(d);
        if (dow != 0 && dow != 6) out.push_back(d);
        d = next_calendar_day(d);
    }
    return out;
}

// Volume path built from runs: strictly rising stretches, strictly falling
// stretches, and flat jiggle between them. Values stay integral inside
// [1e4, 1e9]; the level is steered back toward mid-scale when it drifts.
std::vector<double> volume_path(int days, DetRng& rng) {
    std::vector<double> vol(size_t(days), 0.0);
    double v = rng.uniform(5e5, 2e6);
    int t = 0;
    while (t < days) {
        int kind;  // 0 rising, 1 falling, 2 flat
        if (v > 8e6) kind = 1;
        else if (v < 1.5e5) kind = 0;
        else {
            double u = rng.unit();
            kind = u < 0.35 ? 0 : (u < 0.70 ? 1 : 2);
        }
        int len = kind == 2 ? int(3 + rng.below(5)) : int(5 + rng.below(6));
        for (int j = 0; j < len && t < days; ++j, ++t) {
            if (kind == 0) v *= rng.uniform(1.02, 1.10);
            else if (kind == 1) v /= rng.uniform(1.02, 1.10);
            else {
                double jig = rng.uniform(0.001, 0.01);
                v *= rng.unit() < 0.5 ? 1.0 + jig : 1.0 - jig;
            }
            v = std::round(std::clamp(v, 1e4, 1e9));
            vol[size_t(t)] = v;
        }
    }
    return vol;
}

bool strictly_rising(const std::vector<double>& v, int first, int last) {
    for (int i = first + 1; i <= last; ++i)
        if (!(v[size_t(i)] > v[size_t(i) - 1])) return false;
    return true;
}

bool strictly_falling(const std::vector<double>& v, int first, int last) {
    for (int i = first + 1; i <= last; ++i)
        if (!(v[size_t(i)] < v[size_t(i) - 1])) return false;
    return true;
}

}  // namespace

BarTable generate_synthetic_market(const SyntheticMarketSpec& spec) {
    if (spec.stocks < 1) throw std::invalid_argument("synthetic market needs at least 1 stock");
    if (spec.days < 10) throw std::invalid_argument("synthetic market needs at least 10 days");
    const std::vector<Date> calendar = weekday_calendar(spec.start, spec.days);

    BarTable table;
    for (int s = 0; s < spec.stocks; ++s) {
        char name[16];
        std::snprintf(name, sizeof name, "SYN%02d", s);
        DetRng rng(derive_seed(spec.seed, "synthetic-market", uint64_t(s)));

        std::vector<double> vol = volume_path(spec.days, rng);

        // The five volumes before day t decide the return on day t. The
        // planted branches clear the movement thresholds with a wide margin
        // so labels survive CSV round-trips untouched.
        std::vector<double> ret(size_t(spec.days), 0.0);  // percent, ret[0] unused
        for (int t = 1; t < spec.days; ++t) {
            if (t >= 5 && strictly_rising(vol, t - 5, t - 1))
                ret[size_t(t)] = rng.uniform(1.0, 1.4);
            else if (t >= 5 && strictly_falling(vol, t - 5, t - 1))
                ret[size_t(t)] = rng.uniform(-1.3, -0.9);
            else
                ret[size_t(t)] = rng.normal(0.0, 1.0);
        }

        StockSeries series;
        series.stock = name;
        series.dates = calendar;
        series.open.resize(size_t(spec.days));
        series.high.resize(size_t(spec.days));
        series.low.resize(size_t(spec.days));
        series.close.resize(size_t(spec.days));
        series.adj_close.resize(size_t(spec.days));
        series.volume = vol;

        double close = rng.uniform(30.0, 80.0);
        for (int t = 0; t < spec.days; ++t) {
            double prev = close;
            if (t > 0) close = prev * (1.0 + ret[size_t(t)] / 100.0);
            double open = prev * (1.0 + rng.normal(0.0, 0.002));
            double high = std::max(open, close) * (1.0 + std::fabs(rng.normal(0.0, 0.003)));
            double low = std::min(open, close) * (1.0 - std::fabs(rng.normal(0.0, 0.003)));
            series.open[size_t(t)] = open;
            series.high[size_t(t)] = high;
            series.low[size_t(t)] = low;
            series.close[size_t(t)] = close;
            series.adj_close[size_t(t)] = close;  // no splits or dividends here
        }
        table.stocks.push_back(std::move(series));
    }
    std::sort(table.stocks.begin(), table.stocks.end(),
              [](const StockSeries& a, const StockSeries& b) { return a.stock < b.stock; });
    return table;
}

PartitionSpec synthetic_partition(const BarTable& table) {
    size_t n = table.stocks.size();
    size_t n_test = n >= 2 ? std::max<size_t>(1, n / 5) : 0;
    size_t n_valid = n >= 3 ? std::max<size_t>(1, n / 5) : 0;
    size_t n_train = n - n_test - n_valid;
    PartitionSpec spec;
    spec.splits["train"];
    spec.splits["valid"];
    spec.splits["test"];
    for (size_t i = 0; i < n; ++i) {
        const std::string& t = table.stocks[i].stock;
        if (i < n_train) spec.splits["train"].push_back(t);
        else if (i < n_train + n_valid) spec.splits["valid"].push_back(t);
        else spec.splits["test"].push_back(t);
    }
    return spec;
}

}  // namespace finsrag
