#include "qtokens/fixtures.hpp"

#include <sstream>

#include "qtokens/error.hpp"
#include "qtokens/hash.hpp"

namespace qtokens {

namespace embedded {
extern const char* const quality_csv;
extern const char* const results_csv;
}  // namespace embedded

std::string_view embedded_quality_csv() { return embedded::quality_csv; }
std::string_view embedded_results_csv() { return embedded::results_csv; }

void verify_fixture_integrity() {
    auto check = [](std::string_view name, std::string_view text, std::uint64_t expected) {
        const auto got = fnv1a64(text);
        if (got != expected) {
            std::ostringstream msg;
            msg << "fixture integrity check failed for " << name << ": checksum 0x" << std::hex << got
                << ", expected 0x" << expected;
            throw Error(msg.str());
        }
    };
    check("quality table", embedded_quality_csv(), kQualityTableChecksum);
    check("results table", embedded_results_csv(), kResultsTableChecksum);
}

std::vector<ExperimentPoint> FixtureSet::points() const { return join_fixture_tables(results_table, quality_table); }

const FixtureSet& fixtures() {
    static const FixtureSet set = [] {
        verify_fixture_integrity();
        FixtureSet f;
        std::istringstream q{std::string(embedded_quality_csv())};
        std::istringstream r{std::string(embedded_results_csv())};
        f.quality_table = parse_quality_csv(q);
        f.results_table = parse_results_csv(r);
        if (f.quality_table.size() != 30)
            throw Error("quality fixture has " + std::to_string(f.quality_table.size()) + " rows, expected 30");
        if (f.results_table.size() != 207)
            throw Error("results fixture has " + std::to_string(f.results_table.size()) + " rows, expected 207");
        f.constants_published = ScalingConstants::published();
        f.constants_chinchilla = ScalingConstants::chinchilla_refit();
        (void)f.points();  // every row must join
        return f;
    }();
    return set;
}

}  // namespace qtokens
