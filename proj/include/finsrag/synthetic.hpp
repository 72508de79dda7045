#pragma once
// Deterministic synthetic daily-bar universe with a planted volume rule:
// five strictly rising volumes push the next day's return firmly above the
// rise threshold, five strictly falling volumes push it below the fall
// threshold, anything else draws plain noise. End-to-end checks use it
// because the "right" retrieval signal is known by construction.

#include <cstdint>

#include "finsrag/dates.hpp"
#include "finsrag/market_data.hpp"

namespace finsrag {

struct SyntheticMarketSpec {
    int stocks = 10;
    int days = 500;  // trading days per stock, shared weekday calendar
    Date start{2014, 1, 2};
    uint64_t seed = 0;
};

BarTable generate_synthetic_market(const SyntheticMarketSpec& spec);

// Ticker split for a generated universe: roughly 60/20/20 train/valid/test,
// assigned in ticker order so the same universe always splits the same way.
PartitionSpec synthetic_partition(const BarTable& table);

}  // namespace finsrag
