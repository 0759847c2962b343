#include "certismooth/report.hpp"

#include <cstdio>
#include <fstream>

namespace certismooth::report {

std::string format_eps(double eps) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", eps);
    return buf;
}

json certificate_record(int index, int label, const smoothing::Certificate& cert,
                        const smoothing::SmoothingConfig& cfg, std::uint64_t seed) {
    json rec;
    rec["index"] = index;
    rec["label"] = label;
    if (cert.abstained) {
        rec["outcome"] = "abstain";
    } else {
        rec["outcome"] = cert.klass;
    }
    rec["pA_lower"] = cert.pa_lower;
    rec["radius"] = cert.radius;
    rec["n0"] = cfg.n0;
    rec["n"] = cfg.n;
    rec["alpha"] = cfg.alpha;
    rec["sigma"] = cfg.sigma;
    rec["seed"] = seed;
    return rec;
}

namespace {

bool record_correct(const json& rec) {
    return rec["outcome"].is_number_integer() &&
           rec["outcome"].get<int>() == rec["label"].get<int>();
}

}  // namespace

json certify_aggregates(const json& records, const std::vector<double>& eps_grid) {
    json agg;
    const double n = static_cast<double>(records.size());
    double abstain = 0.0;
    double acr = 0.0;
    for (const json& rec : records) {
        if (rec["outcome"].is_string()) abstain += 1.0;
        if (record_correct(rec)) acr += rec["radius"].get<double>();
    }
    json acc_at = json::object();
    for (double eps : eps_grid) {
        double hits = 0.0;
        for (const json& rec : records) {
            if (record_correct(rec) && rec["radius"].get<double>() > eps) hits += 1.0;
        }
        acc_at[format_eps(eps)] = n > 0 ? hits / n : 0.0;
    }
    agg["abstain_rate"] = n > 0 ? abstain / n : 0.0;
    agg["acr"] = n > 0 ? acr / n : 0.0;
    agg["certified_accuracy_at"] = acc_at;
    return agg;
}

json clean_aggregates(const json& records) {
    json agg;
    const double n = static_cast<double>(records.size());
    double clean = 0.0;
    double abstain = 0.0;
    for (const json& rec : records) {
        if (rec["clean_correct"].get<bool>()) clean += 1.0;
        if (rec["outcome"].is_string()) abstain += 1.0;
    }
    agg["abstain_rate"] = n > 0 ? abstain / n : 0.0;
    agg["clean_accuracy"] = n > 0 ? clean / n : 0.0;
    return agg;
}

json attack_aggregates(const json& records) {
    json agg;
    const double n = static_cast<double>(records.size());
    double robust = 0.0;
    for (const json& rec : records) {
        if (rec["robust"].get<bool>()) robust += 1.0;
    }
    agg["robust_accuracy"] = n > 0 ? robust / n : 0.0;
    return agg;
}

json provenance(const config::Config& cfg, std::uint64_t seed, const std::string& command) {
    json echo = json::object();
    for (const auto& [key, value] : cfg.entries()) {
        if (key.rfind("runtime.", 0) == 0) continue;
        echo[key] = value;
    }
    json prov;
    prov["command"] = command;
    prov["config"] = echo;
    prov["seed"] = seed;
    prov["version"] = kVersion;
    return prov;
}

void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("write_json_file: cannot open " + path);
    out << j.dump(2) << "\n";
    if (!out) throw DataError("write_json_file: write failed for " + path);
}

json load_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_json_file: cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw DataError("load_json_file: " + path + ": " + e.what());
    }
    return j;
}

void write_text_file(const std::string& content, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("write_text_file: cannot open " + path);
    out << content;
    if (!out) throw DataError("write_text_file: write failed for " + path);
}

namespace {

std::vector<double> grid_from_aggregates(const json& agg) {
    std::vector<double> grid;
    for (auto it = agg["certified_accuracy_at"].begin();
         it != agg["certified_accuracy_at"].end(); ++it) {
        grid.push_back(std::stod(it.key()));
    }
    return grid;
}

bool check_block(const json& records, const json& stored, const json& recomputed,
                 const std::string& where, std::string* mismatch) {
    (void)records;
    if (stored.dump() == recomputed.dump()) return true;
    if (mismatch) {
        *mismatch = where + ": stored " + stored.dump() + " != recomputed " + recomputed.dump();
    }
    return false;
}

}  // namespace

bool recompute_matches(const json& report, std::string* mismatch) {
    bool ok = true;
    if (report.contains("records") && report.contains("aggregates")) {
        const json& agg = report["aggregates"];
        ok = ok && check_block(report["records"], agg,
                               certify_aggregates(report["records"], grid_from_aggregates(agg)),
                               "aggregates", mismatch);
    }
    if (report.contains("certification")) {
        const json& block = report["certification"];
        const json& agg = block["aggregates"];
        ok = ok && check_block(block["records"], agg,
                               certify_aggregates(block["records"], grid_from_aggregates(agg)),
                               "certification", mismatch);
    }
    if (report.contains("clean")) {
        const json& block = report["clean"];
        ok = ok && check_block(block["records"], block["aggregates"],
                               clean_aggregates(block["records"]), "clean", mismatch);
    }
    if (report.contains("attacks")) {
        for (const json& block : report["attacks"]) {
            ok = ok && check_block(block["records"], block["aggregates"],
                                   attack_aggregates(block["records"]),
                                   "attack eps=" + block["epsilon"].dump(), mismatch);
        }
    }
    if (report.contains("rows")) {
        for (const json& row : report["rows"]) {
            if (!row.contains("records")) continue;
            const json& agg = row["aggregates"];
            ok = ok && check_block(row["records"], agg,
                                   certify_aggregates(row["records"], grid_from_aggregates(agg)),
                                   "row " + row.value("name", row.dump().substr(0, 24)),
                                   mismatch);
        }
    }
    return ok;
}

}  // namespace certismooth::report
