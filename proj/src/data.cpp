#include "certismooth/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "certismooth/rng.hpp"

namespace certismooth::data {

namespace {

double dist2(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double diff = a[i] - b[i];
        s += diff * diff;
    }
    return s;
}

}  // namespace

GmmWorld make_gmm_world(int K, int d, double gamma, std::uint64_t seed) {
    if (K < 2 || d < 1 || !(gamma > 0.0)) {
        throw std::domain_error("make_gmm_world: need K >= 2, d >= 1, gamma > 0");
    }
    GmmWorld world;
    world.K = K;
    world.d = d;
    world.gamma = gamma;
    world.priors.assign(static_cast<std::size_t>(K), 1.0 / K);

    const double min_dist = 4.0 * gamma;
    rng::Stream rs = rng::substream(seed, {0x776f726cULL});
    int attempts = 0;
    while (static_cast<int>(world.means.size()) < K) {
        if (++attempts > 1000) {
            throw ConfigError("make_gmm_world: could not place means with 4*gamma "
                              "separation; gamma too large for this K, d");
        }
        Vec mu(static_cast<std::size_t>(d));
        for (double& v : mu) v = 0.2 + 0.6 * rs.next_unit();
        bool ok = true;
        for (const Vec& other : world.means) {
            if (dist2(mu, other) < min_dist * min_dist) {
                ok = false;
                break;
            }
        }
        if (ok) world.means.push_back(std::move(mu));
    }
    return world;
}

Dataset sample_dataset(const GmmWorld& world, int n_per_class, std::uint64_t seed,
                       Split split) {
    if (n_per_class < 1) throw std::domain_error("sample_dataset: n_per_class must be >= 1");
    Dataset out;
    out.split = split;
    out.samples.reserve(static_cast<std::size_t>(world.K) * n_per_class);
    for (int c = 0; c < world.K; ++c) {
        for (int i = 0; i < n_per_class; ++i) {
            rng::Stream rs = rng::substream(
                seed, {static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)});
            Sample s;
            s.label = c;
            s.x.resize(static_cast<std::size_t>(world.d));
            for (int j = 0; j < world.d; ++j) {
                double v = world.means[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)] +
                           world.gamma * rs.next_gaussian();
                s.x[static_cast<std::size_t>(j)] = std::clamp(v, 0.0, 1.0);
            }
            out.samples.push_back(std::move(s));
        }
    }
    return out;
}

Vec normalize(const Vec& x) {
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = 2.0 * x[i] - 1.0;
    return y;
}

Vec denormalize(const Vec& y) {
    Vec x(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) x[i] = 0.5 * (y[i] + 1.0);
    return x;
}

void clamp01(Vec& x) {
    for (double& v : x) v = std::clamp(v, 0.0, 1.0);
}

Dataset load_csv_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_csv_dataset: cannot open " + path);
    Dataset out;
    out.split = Split::Eval;
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        Sample s;
        bool first = true;
        while (std::getline(ss, field, ',')) {
            std::size_t pos = 0;
            double v;
            try {
                v = std::stod(field, &pos);
            } catch (const std::exception&) {
                throw DataError("load_csv_dataset: malformed field at line " +
                                std::to_string(lineno));
            }
            if (pos != field.size()) {
                throw DataError("load_csv_dataset: malformed field at line " +
                                std::to_string(lineno));
            }
            if (first) {
                double rounded = std::nearbyint(v);
                if (rounded != v || v < 0.0) {
                    throw DataError("load_csv_dataset: label must be a nonnegative "
                                    "integer at line " + std::to_string(lineno));
                }
                s.label = static_cast<int>(rounded);
                first = false;
            } else {
                if (!(v >= 0.0 && v <= 1.0)) {
                    throw DataError("load_csv_dataset: feature outside [0,1] at line " +
                                    std::to_string(lineno));
                }
                s.x.push_back(v);
            }
        }
        if (first || s.x.empty()) {
            throw DataError("load_csv_dataset: row with no features at line " +
                            std::to_string(lineno));
        }
        if (width == 0) {
            width = s.x.size();
        } else if (s.x.size() != width) {
            throw DataError("load_csv_dataset: inconsistent column count at line " +
                            std::to_string(lineno));
        }
        out.samples.push_back(std::move(s));
    }
    if (out.samples.empty()) throw DataError("load_csv_dataset: no samples in " + path);
    return out;
}

void save_world(const GmmWorld& world, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("save_world: cannot open " + path);
    out.precision(17);
    out << "K = " << world.K << "\n";
    out << "d = " << world.d << "\n";
    out << "gamma = " << world.gamma << "\n";
    for (int c = 0; c < world.K; ++c) {
        out << "prior." << c << " = " << world.priors[static_cast<std::size_t>(c)] << "\n";
        out << "mean." << c << " =";
        for (double v : world.means[static_cast<std::size_t>(c)]) out << " " << v;
        out << "\n";
    }
}

GmmWorld load_world(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_world: cannot open " + path);
    GmmWorld world;
    std::string line;
    while (std::getline(in, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t") + 1);
        };
        trim(key);
        trim(value);
        if (key == "K") {
            world.K = std::stoi(value);
            world.means.resize(static_cast<std::size_t>(world.K));
            world.priors.resize(static_cast<std::size_t>(world.K));
        } else if (key == "d") {
            world.d = std::stoi(value);
        } else if (key == "gamma") {
            world.gamma = std::stod(value);
        } else if (key.rfind("prior.", 0) == 0) {
            int c = std::stoi(key.substr(6));
            world.priors[static_cast<std::size_t>(c)] = std::stod(value);
        } else if (key.rfind("mean.", 0) == 0) {
            int c = std::stoi(key.substr(5));
            std::stringstream ss(value);
            Vec mu;
            double v;
            while (ss >> v) mu.push_back(v);
            world.means[static_cast<std::size_t>(c)] = std::move(mu);
        }
    }
    if (world.K < 2 || world.d < 1 || world.means.empty()) {
        throw DataError("load_world: incomplete world description in " + path);
    }
    return world;
}

double min_pairwise_mean_distance(const GmmWorld& world) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < world.means.size(); ++i) {
        for (std::size_t j = i + 1; j < world.means.size(); ++j) {
            best = std::min(best, std::sqrt(dist2(world.means[i], world.means[j])));
        }
    }
    return best;
}

}  // namespace certismooth::data
