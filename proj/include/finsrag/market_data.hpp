#pragma once
// Daily-bar ingestion, percent returns, movement labeling, and stock-wise
// train/valid/test partitioning.

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "finsrag/columns.hpp"
#include "finsrag/dates.hpp"

namespace finsrag {

struct Bar {
    std::string stock;
    Date date;
    double open = 0, high = 0, low = 0, close = 0, adj_close = 0;
    double volume = 0;  // integral and non-negative, validated at ingest
};

struct StockSeries {
    std::string stock;
    std::vector<Date> dates;  // strictly ascending
    std::vector<double> open, high, low, close, adj_close, volume;
    size_t size() const { return dates.size(); }
};

struct BarTable {
    std::vector<StockSeries> stocks;  // ticker-sorted
    const StockSeries* find(std::string_view ticker) const;
    size_t total_bars() const;
    // Earliest and latest trading date across all stocks; throws when empty.
    Date first_date() const;
    Date last_date() const;
};

// CSV schema (header required): stock,date,open,high,low,close,adj_close,volume.
// Malformed rows and duplicate (stock, date) keys throw with the offending
// line number and field; OHLC range anomalies (low/high not bracketing
// open/close) are reported on `warnings` and kept.
BarTable ingest_bars(std::istream& in, std::ostream* warnings = nullptr);
BarTable ingest_bars_file(const std::string& path, std::ostream* warnings = nullptr);

void write_bars_csv(const BarTable& table, std::ostream& out);

// Percent return; previous price must be positive and both inputs finite.
double compute_return(double adj_close_d, double adj_close_prev);

// rise above 0.55, fall below -0.5, freeze on the closed interval between.
Movement label_movement(double return_pct);

struct PartitionSpec {
    // Exactly the splits train/valid/test, pairwise disjoint.
    std::map<std::string, std::vector<std::string>> splits;
};

PartitionSpec load_partition_spec(const std::string& path);

// Every ticker must land in exactly one split.
std::map<std::string, std::string> partition_universe(const std::vector<std::string>& tickers,
                                                      const PartitionSpec& spec);

}  // namespace finsrag
