#pragma once
// The 34-column feature table: movement, core OHLCV, MACD / Bollinger / KDJ
// events, returns, VWAP, and the 18 alpha factors. Nulls are explicit and
// mean "insufficient history" or "no event", never silent zero.
//
// Conventions shared with the test oracles:
//   - EMA(n) uses alpha = 2/(n+1) seeded at the first observation.
//   - All rolling windows are trailing and include the current row.
//   - Any null input makes the output null (strict propagation, including
//     unexercised ternary branches); division by zero yields null.
//   - Cross-sectional rank is the average fractional rank in (0,1] over
//     stocks with non-null input that date; scale(x) is x / sum(|x|).
//     Either needs at least 2 participating stocks, otherwise null.
//   - Bollinger uses population std; alpha_021's stddev is sample (ddof=1).

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "finsrag/exec.hpp"
#include "finsrag/market_data.hpp"

namespace finsrag {

struct IndicatorParams {
    int macd_fast = 12;
    int macd_slow = 26;
    int macd_signal = 9;
    int boll_window = 20;
    double boll_width = 2.0;
    int kdj_window = 9;
    double kdj_seed = 50.0;
    double overbought_k = 80.0, overbought_d = 70.0, overbought_j = 90.0;
    double oversold_k = 20.0, oversold_d = 30.0, oversold_j = 10.0;
    int smr_window = 5;
    int mom_window = 20;
};

double compute_vwap(double high, double low, double close);

struct MacdResult {
    std::vector<std::optional<double>> histogram;  // null through warmup (slow-1 rows)
    std::vector<std::optional<Signal>> crossover;  // event-only; extra signal-EMA warmup
};
MacdResult compute_macd(const std::vector<double>& adj_close, const IndicatorParams& p = {});

struct BollingerResult {
    std::vector<std::optional<Signal>> signal;
    std::vector<std::optional<double>> exceeding_upper;  // overshoot amount when positive
    std::vector<std::optional<double>> exceeding_lower;
};
BollingerResult compute_bollinger(const std::vector<double>& adj_close,
                                  const IndicatorParams& p = {});

struct KdjResult {
    std::vector<std::optional<Signal>> condition;  // overbought / oversold
    std::vector<std::optional<Signal>> crossover;
    // Internal K/D/J from the first full window on (NaN before); exposed so
    // tests can assert J = 3K - 2D.
    std::vector<double> k, d, j;
};
KdjResult compute_kdj(const std::vector<double>& high, const std::vector<double>& low,
                      const std::vector<double>& close, const IndicatorParams& p = {});

inline constexpr int kNumAlphas = 18;

// Names in registry order alpha_smr .. alpha_101; index into AlphaResult.
extern const std::array<std::string_view, kNumAlphas> kAlphaNames;

struct AlphaResult {
    // values[stock][alpha][t]; stock order matches the input panel.
    std::vector<std::array<std::vector<std::optional<double>>, kNumAlphas>> values;
};

// Whole-panel computation: cross-sectional ranks/scales align stocks by date.
// Single-stock panels null the rank/scale alphas (002, 028, 032) and log one
// warning.
AlphaResult compute_alphas(const BarTable& panel, const IndicatorParams& p = {},
                           std::ostream* warnings = nullptr, ExecMode mode = ExecMode::parallel);

// Threshold check on one (K, D, J) triple; exposed for tests.
std::optional<Signal> kdj_condition(double k, double d, double j, const IndicatorParams& p = {});

struct StockFeatures {
    std::string stock;
    std::vector<Date> dates;
    // cols[column][t] in registry order; numeric columns hold doubles,
    // signal columns hold Signal, movement holds Movement.
    std::array<std::vector<Cell>, kNumColumns> cols;
    size_t size() const { return dates.size(); }
};

struct FeatureTable {
    std::vector<StockFeatures> stocks;  // same ticker order as the bar table
    IndicatorParams params;
    const StockFeatures* find(std::string_view ticker) const;
    Date first_date() const;
    Date last_date() const;
    // Index of `date` in the stock's calendar, or -1.
    static long long date_index(const StockFeatures& sf, const Date& date);
};

FeatureTable build_feature_table(const BarTable& bars, const IndicatorParams& p = {},
                                 std::ostream* warnings = nullptr,
                                 ExecMode mode = ExecMode::parallel);

// One JSON record per (stock, date), field order: stock_name, query_date,
// then the 34 registry columns. Returns are emitted as fractions (the
// on-disk convention); in-memory returns stay in percent.
void write_datastore(const FeatureTable& table, std::ostream& out);
FeatureTable read_datastore(std::istream& in);

// The value actually emitted/serialized for a cell of `column` (returns get
// the percent -> fraction conversion); null cells stay null.
Cell emitted_cell(int column, const Cell& c);

}  // namespace finsrag
