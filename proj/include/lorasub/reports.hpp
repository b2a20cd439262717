#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lorasub/orthogonality.hpp"
#include "lorasub/spectral.hpp"

namespace lorasub {

// Report serialization. JSON and CSV carry the same values; numbers are
// rendered identically in both (shortest round-trip form), and a NaN
// log10_sigma becomes JSON null / an empty CSV field. Schemas are documented
// in docs/reports.md and pinned by golden fixtures.

nlohmann::json spectrum_reports_to_json(const std::vector<SpectrumReport>& reports);
// Columns: layer,index,sigma,log10_sigma (index is 1-based).
std::string spectrum_reports_to_csv(const std::vector<SpectrumReport>& reports);

nlohmann::json overlap_reports_to_json(const std::vector<OverlapReport>& reports);
// Columns: layer,attribute_a,attribute_b,min_lambda,disentangled,lambdas
// (lambdas joined with '|').
std::string overlap_reports_to_csv(const std::vector<OverlapReport>& reports);

nlohmann::json magnitude_to_json(const std::vector<MagnitudeSeries>& series);
// Columns: scope,kind,attribute,index,sigma_max.
std::string magnitude_to_csv(const std::vector<MagnitudeSeries>& series);

struct AllocationReport {
    std::vector<std::string> layers;
    std::vector<double> eff_ranks;
    std::vector<long> allocated;
    AllocationStrategy strategy = AllocationStrategy::uniform;
    long budget = 0;
    std::optional<long> clamp_min;
};

nlohmann::json allocation_to_json(const AllocationReport& report);
// Columns: layer,effective_rank,allocated.
std::string allocation_to_csv(const AllocationReport& report);

}  // namespace lorasub
