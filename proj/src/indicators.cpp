#include "finsrag/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace finsrag {

double compute_vwap(double high, double low, double close) {
    if (!std::isfinite(high) || !std::isfinite(low) || !std::isfinite(close))
        throw std::domain_error("compute_vwap: non-finite input");
    return (high + low + close) / 3.0;
}

// ─── MACD ────────────────────────────────────────────────────────────────

MacdResult compute_macd(const std::vector<double>& x, const IndicatorParams& p) {
    size_t n = x.size();
    MacdResult r;
    r.histogram.assign(n, std::nullopt);
    r.crossover.assign(n, std::nullopt);
    if (n < 2) return r;

    auto ema = [&](const std::vector<double>& v, int period) {
        std::vector<double> e(v.size());
        double a = 2.0 / (period + 1);
        e[0] = v[0];
        for (size_t t = 1; t < v.size(); ++t) e[t] = a * v[t] + (1.0 - a) * e[t - 1];
        return e;
    };
    auto fast = ema(x, p.macd_fast);
    auto slow = ema(x, p.macd_slow);
    std::vector<double> macd(n);
    for (size_t t = 0; t < n; ++t) macd[t] = fast[t] - slow[t];
    auto sig = ema(macd, p.macd_signal);

    size_t hist_start = size_t(p.macd_slow - 1);
    size_t cross_start = hist_start + size_t(p.macd_signal);
    for (size_t t = hist_start; t < n; ++t) r.histogram[t] = macd[t] - sig[t];
    for (size_t t = std::max<size_t>(cross_start, 1); t < n; ++t) {
        double prev = macd[t - 1] - sig[t - 1];
        double cur = macd[t] - sig[t];
        if (prev < 0 && cur > 0)
            r.crossover[t] = Signal::bullish;
        else if (prev > 0 && cur < 0)
            r.crossover[t] = Signal::bearish;
    }
    return r;
}

// ─── Bollinger ───────────────────────────────────────────────────────────

BollingerResult compute_bollinger(const std::vector<double>& x, const IndicatorParams& p) {
    size_t n = x.size();
    size_t w = size_t(p.boll_window);
    BollingerResult r;
    r.signal.assign(n, std::nullopt);
    r.exceeding_upper.assign(n, std::nullopt);
    r.exceeding_lower.assign(n, std::nullopt);
    for (size_t t = w - 1; t < n; ++t) {
        double mean = 0;
        for (size_t i = t + 1 - w; i <= t; ++i) mean += x[i];
        mean /= double(w);
        double var = 0;
        for (size_t i = t + 1 - w; i <= t; ++i) var += (x[i] - mean) * (x[i] - mean);
        var /= double(w);  // population variance
        double band = p.boll_width * std::sqrt(var);
        double over = x[t] - (mean + band);
        double under = (mean - band) - x[t];
        if (over > 0) {
            r.exceeding_upper[t] = over;
            r.signal[t] = Signal::exceed_upper;
        } else if (under > 0) {
            r.exceeding_lower[t] = under;
            r.signal[t] = Signal::exceed_lower;
        }
    }
    return r;
}

// ─── KDJ ─────────────────────────────────────────────────────────────────

std::optional<Signal> kdj_condition(double k, double d, double j, const IndicatorParams& p) {
    if (k > p.overbought_k && d > p.overbought_d && j > p.overbought_j) return Signal::overbought;
    if (k < p.oversold_k && d < p.oversold_d && j < p.oversold_j) return Signal::oversold;
    return std::nullopt;
}

KdjResult compute_kdj(const std::vector<double>& high, const std::vector<double>& low,
                      const std::vector<double>& close, const IndicatorParams& p) {
    size_t n = close.size();
    if (high.size() != n || low.size() != n)
        throw std::invalid_argument("compute_kdj: series lengths differ");
    size_t w = size_t(p.kdj_window);
    KdjResult r;
    r.condition.assign(n, std::nullopt);
    r.crossover.assign(n, std::nullopt);
    double nan = std::numeric_limits<double>::quiet_NaN();
    r.k.assign(n, nan);
    r.d.assign(n, nan);
    r.j.assign(n, nan);
    for (size_t t = w - 1; t < n && w <= n; ++t) {
        double hh = high[t + 1 - w], ll = low[t + 1 - w];
        for (size_t i = t + 2 - w; i <= t; ++i) {
            hh = std::max(hh, high[i]);
            ll = std::min(ll, low[i]);
        }
        double rsv = (hh == ll) ? 50.0 : 100.0 * (close[t] - ll) / (hh - ll);
        double kprev = (t == w - 1) ? p.kdj_seed : r.k[t - 1];
        double dprev = (t == w - 1) ? p.kdj_seed : r.d[t - 1];
        r.k[t] = (1.0 / 3.0) * rsv + (2.0 / 3.0) * kprev;
        r.d[t] = (1.0 / 3.0) * r.k[t] + (2.0 / 3.0) * dprev;
        r.j[t] = 3.0 * r.k[t] - 2.0 * r.d[t];
        r.condition[t] = kdj_condition(r.k[t], r.d[t], r.j[t], p);
        if (t >= w) {
            if (r.k[t - 1] <= r.d[t - 1] && r.k[t] > r.d[t])
                r.crossover[t] = Signal::bullish;
            else if (r.k[t - 1] >= r.d[t - 1] && r.k[t] < r.d[t])
                r.crossover[t] = Signal::bearish;
        }
    }
    return r;
}

// ─── Alpha factors ───────────────────────────────────────────────────────

const std::array<std::string_view, kNumAlphas> kAlphaNames = {
    "alpha_smr", "alpha_mom", "alpha_002", "alpha_006", "alpha_009", "alpha_012",
    "alpha_021", "alpha_023", "alpha_024", "alpha_028", "alpha_032", "alpha_041",
    "alpha_046", "alpha_049", "alpha_051", "alpha_053", "alpha_054", "alpha_101",
};

namespace {

using OptD = std::optional<double>;
using Series = std::vector<OptD>;

OptD guard(double v) {
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

Series lift(const std::vector<double>& v) {
    Series out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = v[i];
    return out;
}

template <class F>
Series map1(const Series& a, F f) {
    Series out(a.size());
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i]) out[i] = guard(f(*a[i]));
    return out;
}

template <class F>
Series zip2(const Series& a, const Series& b, F f) {
    Series out(a.size());
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i] && b[i]) out[i] = guard(f(*a[i], *b[i]));
    return out;
}

Series delay(const Series& x, size_t k) {
    Series out(x.size());
    for (size_t t = k; t < x.size(); ++t) out[t] = x[t - k];
    return out;
}

Series delta(const Series& x, size_t k) {
    Series out(x.size());
    for (size_t t = k; t < x.size(); ++t)
        if (x[t] && x[t - k]) out[t] = *x[t] - *x[t - k];
    return out;
}

// Trailing window including today; null unless all w values present.
template <class F>
Series rolling(const Series& x, size_t w, F f) {
    Series out(x.size());
    for (size_t t = w - 1; t < x.size() && w <= x.size(); ++t) {
        bool full = true;
        for (size_t i = t + 1 - w; i <= t; ++i)
            if (!x[i]) {
                full = false;
                break;
            }
        if (!full) continue;
        out[t] = guard(f(t + 1 - w, t));
    }
    return out;
}

Series ts_mean(const Series& x, size_t w) {
    return rolling(x, w, [&](size_t lo, size_t hi) {
        double s = 0;
        for (size_t i = lo; i <= hi; ++i) s += *x[i];
        return s / double(w);
    });
}

Series ts_min(const Series& x, size_t w) {
    return rolling(x, w, [&](size_t lo, size_t hi) {
        double m = *x[lo];
        for (size_t i = lo + 1; i <= hi; ++i) m = std::min(m, *x[i]);
        return m;
    });
}

Series ts_max(const Series& x, size_t w) {
    return rolling(x, w, [&](size_t lo, size_t hi) {
        double m = *x[lo];
        for (size_t i = lo + 1; i <= hi; ++i) m = std::max(m, *x[i]);
        return m;
    });
}

// Sample standard deviation (ddof = 1), two-pass for stability.
Series ts_std(const Series& x, size_t w) {
    return rolling(x, w, [&](size_t lo, size_t hi) -> double {
        double mean = 0;
        for (size_t i = lo; i <= hi; ++i) mean += *x[i];
        mean /= double(w);
        double ss = 0;
        for (size_t i = lo; i <= hi; ++i) ss += (*x[i] - mean) * (*x[i] - mean);
        return std::sqrt(ss / double(w - 1));
    });
}

// Pearson correlation over the trailing window, two-pass centered; zero
// variance on either side -> null (division by zero convention).
Series ts_corr(const Series& x, const Series& y, size_t w) {
    Series out(x.size());
    for (size_t t = w - 1; t < x.size() && w <= x.size(); ++t) {
        bool full = true;
        for (size_t i = t + 1 - w; i <= t; ++i)
            if (!x[i] || !y[i]) {
                full = false;
                break;
            }
        if (!full) continue;
        double mx = 0, my = 0;
        for (size_t i = t + 1 - w; i <= t; ++i) {
            mx += *x[i];
            my += *y[i];
        }
        mx /= double(w);
        my /= double(w);
        double sxy = 0, sxx = 0, syy = 0;
        for (size_t i = t + 1 - w; i <= t; ++i) {
            double dx = *x[i] - mx, dy = *y[i] - my;
            sxy += dx * dy;
            sxx += dx * dx;
            syy += dy * dy;
        }
        double den = std::sqrt(sxx) * std::sqrt(syy);
        if (den == 0) continue;
        out[t] = guard(sxy / den);
    }
    return out;
}

Series neg(const Series& x) {
    return map1(x, [](double v) { return -v; });
}

// Panel alignment for the cross-sectional operators.
struct PanelAlign {
    std::vector<Date> dates;  // union calendar, ascending
    // per_date[g] lists (stock index, local t) of stocks trading that date
    std::vector<std::vector<std::pair<size_t, size_t>>> per_date;
};

PanelAlign align_panel(const BarTable& panel) {
    PanelAlign a;
    std::map<Date, std::vector<std::pair<size_t, size_t>>> by_date;
    for (size_t s = 0; s < panel.stocks.size(); ++s)
        for (size_t t = 0; t < panel.stocks[s].dates.size(); ++t)
            by_date[panel.stocks[s].dates[t]].emplace_back(s, t);
    for (auto& [date, members] : by_date) {
        a.dates.push_back(date);
        a.per_date.push_back(std::move(members));
    }
    return a;
}

// Average fractional rank in (0,1] per date over stocks with non-null input.
// Needs >= 2 participants, else null.
std::vector<Series> cross_rank(const std::vector<Series>& in, const PanelAlign& align) {
    std::vector<Series> out(in.size());
    for (size_t s = 0; s < in.size(); ++s) out[s].assign(in[s].size(), std::nullopt);
    std::vector<std::tuple<double, size_t, size_t>> row;  // value, stock, t
    for (const auto& members : align.per_date) {
        row.clear();
        for (auto [s, t] : members)
            if (in[s][t]) row.emplace_back(*in[s][t], s, t);
        size_t m = row.size();
        if (m < 2) continue;
        std::sort(row.begin(), row.end());
        size_t i = 0;
        while (i < m) {
            size_t j = i;
            while (j + 1 < m && std::get<0>(row[j + 1]) == std::get<0>(row[i])) ++j;
            double avg_rank = (double(i + 1) + double(j + 1)) / 2.0;
            for (size_t q = i; q <= j; ++q)
                out[std::get<1>(row[q])][std::get<2>(row[q])] = avg_rank / double(m);
            i = j + 1;
        }
    }
    return out;
}

// x / sum(|x|) per date; needs >= 2 participants and a nonzero sum.
std::vector<Series> cross_scale(const std::vector<Series>& in, const PanelAlign& align) {
    std::vector<Series> out(in.size());
    for (size_t s = 0; s < in.size(); ++s) out[s].assign(in[s].size(), std::nullopt);
    for (const auto& members : align.per_date) {
        double denom = 0;
        size_t m = 0;
        for (auto [s, t] : members)
            if (in[s][t]) {
                denom += std::fabs(*in[s][t]);
                ++m;
            }
        if (m < 2 || denom == 0) continue;
        for (auto [s, t] : members)
            if (in[s][t]) out[s][t] = guard(*in[s][t] / denom);
    }
    return out;
}

struct StockAlphaWork {
    std::array<Series, kNumAlphas> alphas;  // per-stock results (cross slots empty)
    Series a2_in1, a2_in2;                  // rank inputs for alpha_002
    Series a28_inner;                       // pre-scale term for alpha_028
    Series a32_t1, a32_t2;                  // pre-scale terms for alpha_032
};

StockAlphaWork alpha_stock_pass(const StockSeries& s, const IndicatorParams& p) {
    StockAlphaWork w;
    Series open = lift(s.open), high = lift(s.high), low = lift(s.low), close = lift(s.close);
    Series volume = lift(s.volume), adj = lift(s.adj_close);
    Series vwap = zip2(zip2(high, low, [](double h, double l) { return h + l; }), close,
                       [](double hl, double c) { return (hl + c) / 3.0; });
    Series dollar = zip2(close, volume, [](double c, double v) { return c * v; });
    Series adv20 = ts_mean(dollar, 20);

    // alpha_smr / alpha_mom: adjusted-close returns over configurable windows
    w.alphas[0] = zip2(adj, delay(adj, size_t(p.smr_window)),
                       [](double a, double b) { return -(a / b - 1.0); });
    w.alphas[1] = zip2(adj, delay(adj, size_t(p.mom_window)),
                       [](double a, double b) { return a / b - 1.0; });

    // alpha_002 cross inputs: delta(log(volume), 2) and (close - open) / open
    w.a2_in1 = delta(map1(volume, [](double v) { return std::log(v); }), 2);
    w.a2_in2 = zip2(close, open, [](double c, double o) { return (c - o) / o; });

    // alpha_006 = -corr(open, volume, 10)
    w.alphas[3] = neg(ts_corr(open, volume, 10));

    // alpha_009: ride the 1-day delta while its 5-day extremes agree on sign
    {
        Series d1 = delta(close, 1);
        Series lo5 = ts_min(d1, 5), hi5 = ts_max(d1, 5);
        Series out(close.size());
        for (size_t t = 0; t < close.size(); ++t)
            if (d1[t] && lo5[t] && hi5[t])
                out[t] = (*lo5[t] > 0) ? *d1[t] : ((*hi5[t] < 0) ? *d1[t] : -*d1[t]);
        w.alphas[4] = out;
    }

    // alpha_012 = sign(delta(volume, 1)) * (-delta(close, 1))
    {
        auto sgn = [](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); };
        w.alphas[5] = zip2(delta(volume, 1), delta(close, 1),
                           [&](double dv, double dc) { return sgn(dv) * -dc; });
    }

    // alpha_021: mean/std band test with a volume/adv20 fallback branch
    {
        Series m8 = ts_mean(close, 8), s8 = ts_std(close, 8), m2 = ts_mean(close, 2);
        Series out(close.size());
        for (size_t t = 0; t < close.size(); ++t) {
            if (!(m8[t] && s8[t] && m2[t] && adv20[t] && volume[t])) continue;
            if (*adv20[t] == 0) continue;
            double ratio = *volume[t] / *adv20[t];
            if (*m8[t] + *s8[t] < *m2[t])
                out[t] = -1.0;
            else if (*m2[t] < *m8[t] - *s8[t])
                out[t] = 1.0;
            else
                out[t] = (ratio >= 1.0) ? 1.0 : -1.0;
        }
        w.alphas[6] = out;
    }

    // alpha_023 = (mean(high, 20) < high) ? -delta(high, 2) : 0
    {
        Series m20 = ts_mean(high, 20), d2 = delta(high, 2);
        Series out(close.size());
        for (size_t t = 0; t < close.size(); ++t)
            if (m20[t] && d2[t] && high[t])
                out[t] = (*m20[t] < *high[t]) ? -*d2[t] : 0.0;
        w.alphas[7] = out;
    }

    // alpha_024: slow-trend test switching between 100-day drawdown and -delta3
    {
        Series s100 = ts_mean(close, 100);
        Series dd = delta(s100, 100);
        Series dl = delay(close, 100);
        Series lo100 = ts_min(close, 100);
        Series d3 = delta(close, 3);
        Series out(close.size());
        for (size_t t = 0; t < close.size(); ++t) {
            if (!(dd[t] && dl[t] && lo100[t] && d3[t] && close[t])) continue;
            if (*dl[t] == 0) continue;
            double ratio = *dd[t] / *dl[t];
            out[t] = (ratio <= 0.05) ? -(*close[t] - *lo100[t]) : -*d3[t];
        }
        w.alphas[8] = out;
    }

    // alpha_028 pre-scale: corr(adv20, low, 5) + (high + low)/2 - close
    {
        Series c5 = ts_corr(adv20, low, 5);
        Series mid = zip2(high, low, [](double h, double l) { return (h + l) / 2.0; });
        w.a28_inner = zip2(zip2(c5, mid, [](double a, double b) { return a + b; }), close,
                           [](double a, double c) { return a - c; });
    }

    // alpha_032 pre-scale terms: mean(close, 7) - close and corr(vwap, delay(close, 5), 230)
    w.a32_t1 = zip2(ts_mean(close, 7), close, [](double m, double c) { return m - c; });
    w.a32_t2 = ts_corr(vwap, delay(close, 5), 230);

    // alpha_041 = sqrt(high * low) - vwap
    w.alphas[11] = zip2(zip2(high, low, [](double h, double l) { return std::sqrt(h * l); }), vwap,
                        [](double g, double v) { return g - v; });

    // alpha_046 / 049 / 051: shared long-short slope gap x with different gates
    {
        Series d20 = delay(close, 20), d10 = delay(close, 10), d1 = delta(close, 1);
        Series x(close.size());
        for (size_t t = 0; t < close.size(); ++t)
            if (d20[t] && d10[t] && close[t])
                x[t] = guard(((*d20[t] - *d10[t]) / 10.0) - ((*d10[t] - *close[t]) / 10.0));
        Series a46(close.size()), a49(close.size()), a51(close.size());
        for (size_t t = 0; t < close.size(); ++t) {
            if (!(x[t] && d1[t])) continue;
            a46[t] = (*x[t] > 0.25) ? -1.0 : ((*x[t] < 0) ? 1.0 : -*d1[t]);
            a49[t] = (*x[t] < -0.1) ? 1.0 : -*d1[t];
            a51[t] = (*x[t] < -0.05) ? 1.0 : -*d1[t];
        }
        w.alphas[12] = a46;
        w.alphas[13] = a49;
        w.alphas[14] = a51;
    }

    // alpha_053 = -delta(((close - low) - (high - close)) / (close - low), 9)
    {
        Series inner(close.size());
        for (size_t t = 0; t < close.size(); ++t) {
            double c = *close[t], l = *low[t], h = *high[t];
            if (c - l == 0) continue;
            inner[t] = guard(((c - l) - (h - c)) / (c - l));
        }
        w.alphas[15] = neg(delta(inner, 9));
    }

    // alpha_054 = (-(low - close) * open^5) / ((low - high) * close^5)
    {
        Series out(close.size());
        for (size_t t = 0; t < close.size(); ++t) {
            double o = *open[t], h = *high[t], l = *low[t], c = *close[t];
            double den = (l - h) * std::pow(c, 5.0);
            if (den == 0) continue;
            out[t] = guard((-(l - c) * std::pow(o, 5.0)) / den);
        }
        w.alphas[16] = out;
    }

    // alpha_101 = (close - open) / ((high - low) + 0.001)
    {
        Series out(close.size());
        for (size_t t = 0; t < close.size(); ++t)
            out[t] = guard((*close[t] - *open[t]) / ((*high[t] - *low[t]) + 0.001));
        w.alphas[17] = out;
    }

    return w;
}

}  // namespace

AlphaResult compute_alphas(const BarTable& panel, const IndicatorParams& p, std::ostream* warnings,
                           ExecMode mode) {
    size_t n_stocks = panel.stocks.size();
    std::vector<StockAlphaWork> work(n_stocks);
    for_each_index(n_stocks, mode,
                   [&](size_t s) { work[s] = alpha_stock_pass(panel.stocks[s], p); });

    bool cross_ok = n_stocks >= 2;
    if (!cross_ok && warnings && n_stocks == 1)
        *warnings << "warning: single-stock panel; cross-sectional alphas "
                     "(alpha_002, alpha_028, alpha_032) are null\n";

    if (cross_ok) {
        PanelAlign align = align_panel(panel);
        std::vector<Series> in1(n_stocks), in2(n_stocks), inner(n_stocks), t1(n_stocks),
            t2(n_stocks);
        for (size_t s = 0; s < n_stocks; ++s) {
            in1[s] = std::move(work[s].a2_in1);
            in2[s] = std::move(work[s].a2_in2);
            inner[s] = std::move(work[s].a28_inner);
            t1[s] = std::move(work[s].a32_t1);
            t2[s] = std::move(work[s].a32_t2);
        }
        auto r1 = cross_rank(in1, align);
        auto r2 = cross_rank(in2, align);
        auto a28 = cross_scale(inner, align);
        auto s1 = cross_scale(t1, align);
        auto s2 = cross_scale(t2, align);
        for_each_index(n_stocks, mode, [&](size_t s) {
            work[s].alphas[2] = neg(ts_corr(r1[s], r2[s], 6));
            work[s].alphas[9] = a28[s];
            work[s].alphas[10] =
                zip2(s1[s], s2[s], [](double a, double b) { return a + 20.0 * b; });
        });
    } else {
        for (size_t s = 0; s < n_stocks; ++s) {
            size_t n = panel.stocks[s].size();
            work[s].alphas[2].assign(n, std::nullopt);
            work[s].alphas[9].assign(n, std::nullopt);
            work[s].alphas[10].assign(n, std::nullopt);
        }
    }

    AlphaResult out;
    out.values.resize(n_stocks);
    for (size_t s = 0; s < n_stocks; ++s)
        for (int a = 0; a < kNumAlphas; ++a) out.values[s][a] = std::move(work[s].alphas[a]);
    return out;
}

// ─── Feature table assembly ──────────────────────────────────────────────

const StockFeatures* FeatureTable::find(std::string_view ticker) const {
    auto it = std::lower_bound(
        stocks.begin(), stocks.end(), ticker,
        [](const StockFeatures& s, std::string_view t) { return s.stock < t; });
    if (it == stocks.end() || it->stock != ticker) return nullptr;
    return &*it;
}

Date FeatureTable::first_date() const {
    if (stocks.empty()) throw std::runtime_error("feature table is empty");
    Date d = stocks.front().dates.front();
    for (const auto& s : stocks) d = std::min(d, s.dates.front());
    return d;
}

Date FeatureTable::last_date() const {
    if (stocks.empty()) throw std::runtime_error("feature table is empty");
    Date d = stocks.front().dates.back();
    for (const auto& s : stocks) d = std::max(d, s.dates.back());
    return d;
}

long long FeatureTable::date_index(const StockFeatures& sf, const Date& date) {
    auto it = std::lower_bound(sf.dates.begin(), sf.dates.end(), date);
    if (it == sf.dates.end() || *it != date) return -1;
    return it - sf.dates.begin();
}

FeatureTable build_feature_table(const BarTable& bars, const IndicatorParams& p,
                                 std::ostream* warnings, ExecMode mode) {
    FeatureTable table;
    table.params = p;
    table.stocks.resize(bars.stocks.size());

    AlphaResult alphas = compute_alphas(bars, p, warnings, mode);

    for_each_index(bars.stocks.size(), mode, [&](size_t si) {
        const StockSeries& s = bars.stocks[si];
        StockFeatures& f = table.stocks[si];
        f.stock = s.stock;
        f.dates = s.dates;
        size_t n = s.size();
        for (auto& col : f.cols) col.assign(n, Cell{});

        auto macd = compute_macd(s.adj_close, p);
        auto boll = compute_bollinger(s.adj_close, p);
        auto kdj = compute_kdj(s.high, s.low, s.close, p);

        for (size_t t = 0; t < n; ++t) {
            if (t > 0) {
                double ret = compute_return(s.adj_close[t], s.adj_close[t - 1]);
                f.cols[14][t] = ret;                  // returns (percent, in memory)
                f.cols[0][t] = label_movement(ret);   // movement
            }
            f.cols[1][t] = s.open[t];
            f.cols[2][t] = s.high[t];
            f.cols[3][t] = s.low[t];
            f.cols[4][t] = s.close[t];
            f.cols[5][t] = s.adj_close[t];
            f.cols[6][t] = s.volume[t];
            if (macd.histogram[t]) f.cols[7][t] = *macd.histogram[t];
            if (macd.crossover[t]) f.cols[8][t] = *macd.crossover[t];
            if (boll.signal[t]) f.cols[9][t] = *boll.signal[t];
            if (boll.exceeding_upper[t]) f.cols[10][t] = *boll.exceeding_upper[t];
            if (boll.exceeding_lower[t]) f.cols[11][t] = *boll.exceeding_lower[t];
            if (kdj.condition[t]) f.cols[12][t] = *kdj.condition[t];
            if (kdj.crossover[t]) f.cols[13][t] = *kdj.crossover[t];
            f.cols[15][t] = compute_vwap(s.high[t], s.low[t], s.close[t]);
            for (int a = 0; a < kNumAlphas; ++a)
                if (alphas.values[si][a][t]) f.cols[16 + a][t] = *alphas.values[si][a][t];
        }
    });
    return table;
}

// ─── Datastore emission ──────────────────────────────────────────────────

Cell emitted_cell(int column, const Cell& c) {
    if (column == 14 && std::holds_alternative<double>(c))
        return Cell{std::get<double>(c) / 100.0};  // returns: percent -> fraction on disk
    return c;
}

namespace {

nlohmann::ordered_json cell_to_json(int column, const Cell& raw) {
    Cell c = emitted_cell(column, raw);
    if (is_null(c)) return nullptr;
    if (std::holds_alternative<double>(c)) {
        double v = std::get<double>(c);
        if (kColumns[column].name == "volume") return static_cast<long long>(v);
        return v;
    }
    if (std::holds_alternative<Signal>(c)) return std::string(to_string(std::get<Signal>(c)));
    return std::string(to_string(std::get<Movement>(c)));
}

Cell cell_from_json(int column, const nlohmann::ordered_json& v) {
    if (v.is_null()) return Cell{};
    if (kColumns[column].kind == ColumnKind::movement)
        return Cell{movement_from_string(v.get<std::string>())};
    if (kColumns[column].kind == ColumnKind::signal)
        return Cell{signal_from_string(v.get<std::string>())};
    double d = v.get<double>();
    if (column == 14) d *= 100.0;  // returns: fraction on disk -> percent in memory
    return Cell{d};
}

}  // namespace

void write_datastore(const FeatureTable& table, std::ostream& out) {
    for (const auto& s : table.stocks) {
        for (size_t t = 0; t < s.size(); ++t) {
            nlohmann::ordered_json rec;
            rec["stock_name"] = s.stock;
            rec["query_date"] = format_date(s.dates[t]);
            for (int c = 0; c < kNumColumns; ++c)
                rec[std::string(kColumns[c].name)] = cell_to_json(c, s.cols[c][t]);
            out << rec.dump() << '\n';
        }
    }
}

FeatureTable read_datastore(std::istream& in) {
    std::map<std::string, StockFeatures> by_stock;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::ordered_json rec;
        try {
            rec = nlohmann::ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error("datastore line " + std::to_string(line_no) + ": " + e.what());
        }
        std::string stock = rec.at("stock_name").get<std::string>();
        Date date = parse_date(rec.at("query_date").get<std::string>());
        auto& sf = by_stock[stock];
        if (sf.stock.empty()) {
            sf.stock = stock;
            for (auto& col : sf.cols) col.clear();
        }
        if (!sf.dates.empty() && !(sf.dates.back() < date))
            throw std::runtime_error("datastore line " + std::to_string(line_no) +
                                     ": dates for " + stock + " not ascending");
        sf.dates.push_back(date);
        for (int c = 0; c < kNumColumns; ++c)
            sf.cols[c].push_back(cell_from_json(c, rec.at(std::string(kColumns[c].name))));
    }
    FeatureTable table;
    for (auto& [_, sf] : by_stock) table.stocks.push_back(std::move(sf));
    return table;
}

}  // namespace finsrag
