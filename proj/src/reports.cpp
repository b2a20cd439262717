#include "lorasub/reports.hpp"

#include <cmath>
#include <sstream>

namespace lorasub {

using nlohmann::json;

namespace {

std::string number(double v) {
    return json(v).dump();  // shortest round-trip; NaN -> "null"
}

std::string csv_number(double v) {
    return std::isnan(v) ? std::string() : number(v);
}

}  // namespace

json spectrum_reports_to_json(const std::vector<SpectrumReport>& reports) {
    json out;
    out["kind"] = "spectrum";
    out["reports"] = json::array();
    for (const auto& r : reports) {
        json entry;
        entry["layer"] = r.layer.str();
        entry["sigma"] = json::array();
        entry["log10_sigma"] = json::array();
        for (Index i = 0; i < r.sigma.size(); ++i) {
            entry["sigma"].push_back(r.sigma(i));
            const double lg = r.log10_sigma[static_cast<std::size_t>(i)];
            if (std::isnan(lg)) {
                entry["log10_sigma"].push_back(nullptr);
            } else {
                entry["log10_sigma"].push_back(lg);
            }
        }
        if (r.gap_index) {
            entry["gap_index"] = *r.gap_index;
        } else {
            entry["gap_index"] = nullptr;
        }
        entry["pattern"] = to_string(r.pattern);
        entry["sigma_max"] = r.sigma_max;
        entry["low_rank_ratio"] = r.low_rank_ratio;
        out["reports"].push_back(entry);
    }
    return out;
}

std::string spectrum_reports_to_csv(const std::vector<SpectrumReport>& reports) {
    std::ostringstream out;
    out << "layer,index,sigma,log10_sigma\n";
    for (const auto& r : reports) {
        for (Index i = 0; i < r.sigma.size(); ++i) {
            out << r.layer.str() << ',' << (i + 1) << ',' << number(r.sigma(i)) << ','
                << csv_number(r.log10_sigma[static_cast<std::size_t>(i)]) << '\n';
        }
    }
    return out.str();
}

json overlap_reports_to_json(const std::vector<OverlapReport>& reports) {
    json out;
    out["kind"] = "overlap";
    out["reports"] = json::array();
    for (const auto& r : reports) {
        json entry;
        entry["layer"] = r.layer_a.site().str();
        entry["attribute_a"] = r.layer_a.attribute.str();
        entry["attribute_b"] = r.layer_b.attribute.str();
        entry["lambdas"] = json::array();
        for (Index i = 0; i < r.lambdas.size(); ++i) entry["lambdas"].push_back(r.lambdas(i));
        entry["min_lambda"] = r.min_lambda;
        entry["disentangled"] = r.disentangled;
        entry["threshold"] = r.threshold;
        entry["delta"] = r.delta;
        out["reports"].push_back(entry);
    }
    return out;
}

std::string overlap_reports_to_csv(const std::vector<OverlapReport>& reports) {
    std::ostringstream out;
    out << "layer,attribute_a,attribute_b,min_lambda,disentangled,lambdas\n";
    for (const auto& r : reports) {
        out << r.layer_a.site().str() << ',' << r.layer_a.attribute.str() << ','
            << r.layer_b.attribute.str() << ',' << number(r.min_lambda) << ','
            << (r.disentangled ? "true" : "false") << ',';
        for (Index i = 0; i < r.lambdas.size(); ++i) {
            if (i) out << '|';
            out << number(r.lambdas(i));
        }
        out << '\n';
    }
    return out.str();
}

json magnitude_to_json(const std::vector<MagnitudeSeries>& series) {
    json out;
    out["kind"] = "magnitudes";
    out["series"] = json::array();
    for (const auto& s : series) {
        json entry;
        entry["scope"] = to_string(s.scope);
        entry["kind"] = to_string(s.kind);
        entry["attribute"] = s.attribute.str();
        entry["points"] = json::array();
        for (const auto& p : s.points) {
            entry["points"].push_back({{"index", p.index}, {"sigma_max", p.sigma_max}});
        }
        out["series"].push_back(entry);
    }
    return out;
}

std::string magnitude_to_csv(const std::vector<MagnitudeSeries>& series) {
    std::ostringstream out;
    out << "scope,kind,attribute,index,sigma_max\n";
    for (const auto& s : series) {
        for (const auto& p : s.points) {
            out << to_string(s.scope) << ',' << to_string(s.kind) << ',' << s.attribute.str()
                << ',' << p.index << ',' << number(p.sigma_max) << '\n';
        }
    }
    return out.str();
}

json allocation_to_json(const AllocationReport& report) {
    json out;
    out["kind"] = "allocation";
    out["strategy"] = report.strategy == AllocationStrategy::uniform ? "uniform" : "importance";
    out["budget"] = report.budget;
    if (report.clamp_min) {
        out["clamp_min"] = *report.clamp_min;
    } else {
        out["clamp_min"] = nullptr;
    }
    out["layers"] = json::array();
    for (std::size_t i = 0; i < report.layers.size(); ++i) {
        out["layers"].push_back({{"layer", report.layers[i]},
                                 {"effective_rank", report.eff_ranks[i]},
                                 {"allocated", report.allocated[i]}});
    }
    return out;
}

std::string allocation_to_csv(const AllocationReport& report) {
    std::ostringstream out;
    out << "layer,effective_rank,allocated\n";
    for (std::size_t i = 0; i < report.layers.size(); ++i) {
        out << report.layers[i] << ',' << number(report.eff_ranks[i]) << ','
            << report.allocated[i] << '\n';
    }
    return out.str();
}

}  // namespace lorasub
