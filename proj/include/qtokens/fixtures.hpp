#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "qtokens/fitting.hpp"

namespace qtokens {

/// The published 30-row quality table and 207-row training-run table,
/// compiled into the binary so fixture runs work offline.
struct FixtureSet {
    std::vector<QualityRow> quality_table;
    std::vector<ResultRow> results_table;
    ScalingConstants constants_published;
    ScalingConstants constants_chinchilla;

    std::vector<ExperimentPoint> points() const;
};

std::string_view embedded_quality_csv();
std::string_view embedded_results_csv();

inline constexpr std::uint64_t kQualityTableChecksum = 0x8ed9cc3315923b94ULL;
inline constexpr std::uint64_t kResultsTableChecksum = 0x6aff9807887ba474ULL;

/// Throws if an embedded table's checksum or row count is off.
void verify_fixture_integrity();

/// Verifies and parses the embedded tables.
const FixtureSet& fixtures();

}  // namespace qtokens
