#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "certismooth/attack.hpp"
#include "certismooth/config.hpp"
#include "certismooth/smoothing.hpp"

namespace certismooth::report {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

// Grid keys like "0", "0.25", "1.25"; shared by writers and recompute.
std::string format_eps(double eps);

json certificate_record(int index, int label, const smoothing::Certificate& cert,
                        const smoothing::SmoothingConfig& cfg, std::uint64_t seed);

// {abstain_rate, acr, certified_accuracy_at} from certificate records.
json certify_aggregates(const json& records, const std::vector<double>& eps_grid);

// {abstain_rate, clean_accuracy} from clean-prediction records.
json clean_aggregates(const json& records);

// {robust_accuracy} from per-point attack records at one epsilon.
json attack_aggregates(const json& records);

// Config echo for provenance. runtime.* keys are scheduling-only and are
// excluded so reports from different worker counts stay byte-identical.
json provenance(const config::Config& cfg, std::uint64_t seed, const std::string& command);

void write_json_file(const json& j, const std::string& path);
json load_json_file(const std::string& path);
void write_text_file(const std::string& content, const std::string& path);

// Recomputes every aggregates object in a report from its sibling records;
// returns true when all match the stored values exactly (bit-for-bit after
// re-serialization).
bool recompute_matches(const json& report, std::string* mismatch);

}  // namespace certismooth::report
