#include "certismooth/runs.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <memory>
#include <sstream>

#include "certismooth/adapt.hpp"
#include "certismooth/attack.hpp"
#include "certismooth/parallel.hpp"
#include "certismooth/rng.hpp"

namespace certismooth::runs {

namespace {

using report::json;

struct Experiment {
    bool has_world = false;
    data::GmmWorld world;
    std::vector<Vec> eval_x;
    std::vector<int> eval_y;
    schedule::NoiseSchedule sched;
    std::unique_ptr<denoiser::NeuralDenoiser> neural_den;
    std::unique_ptr<denoiser::Denoiser> fixed_den;
    denoiser::Denoiser* den = nullptr;
    std::unique_ptr<classifier::NeuralClassifier> neural_clf;
    std::unique_ptr<classifier::BayesClassifier> bayes_clf;
    classifier::Classifier* clf = nullptr;
    smoothing::Pipeline pipe;
    smoothing::SmoothingConfig smooth;
    std::uint64_t seed = 0;
    int workers = 1;
    std::vector<double> eps_grid;
};

data::GmmWorld world_from_config(const config::Config& cfg) {
    return data::make_gmm_world(cfg.get_int("world.K", 4), cfg.get_int("world.d", 64),
                                cfg.get_double("world.gamma", 0.08),
                                cfg.get_u64("world.seed", 1));
}

std::unique_ptr<classifier::NeuralClassifier> train_classifier_from_config(
    const config::Config& cfg, const data::GmmWorld& world) {
    if (cfg.has("classifier.checkpoint")) {
        return std::make_unique<classifier::NeuralClassifier>(
            nn::load_mlp(cfg.require_string("classifier.checkpoint")));
    }
    data::Dataset train = data::sample_dataset(world,
                                               cfg.get_int("classifier.train_per_class", 100),
                                               cfg.get_u64("classifier.train_seed", 11),
                                               data::Split::Train);
    return std::make_unique<classifier::NeuralClassifier>(classifier::train_softmax_classifier(
        train, world.K, cfg.get_int("classifier.hidden", 64),
        cfg.get_int("classifier.train_steps", 600),
        cfg.get_double("classifier.lr", 0.05), cfg.get_double("classifier.momentum", 0.9),
        cfg.get_int("classifier.batch", 32), cfg.get_u64("classifier.train_seed", 11)));
}

data::GmmWorld jittered_world(const data::GmmWorld& world, double jitter,
                              std::uint64_t seed) {
    data::GmmWorld out = world;
    rng::Stream rs = rng::substream(seed, {0x6a6974ULL});
    for (Vec& mu : out.means) {
        for (double& v : mu) {
            v = std::clamp(v + jitter * (2.0 * rs.next_unit() - 1.0), 0.2, 0.8);
        }
    }
    return out;
}

denoiser::PretrainConfig pretrain_config(const config::Config& cfg, double k,
                                         std::uint64_t seed) {
    denoiser::PretrainConfig pc;
    pc.steps = cfg.get_int("pretrain.steps", 2000);
    pc.batch = cfg.get_int("pretrain.batch", 32);
    pc.hidden = cfg.get_int("pretrain.hidden", 128);
    pc.lr = cfg.get_double("pretrain.lr", 1e-2);
    pc.momentum = cfg.get_double("pretrain.momentum", 0.9);
    pc.k = k;
    pc.seed = cfg.get_u64("pretrain.seed", seed);
    return pc;
}

Experiment build_experiment(const config::Config& cfg, bool need_neural_denoiser = false) {
    Experiment ex;
    ex.seed = cfg.get_u64("run.seed", 0);
    ex.workers = cfg.get_int("runtime.workers", 1);
    if (ex.workers < 1) throw ConfigError("runtime.workers must be >= 1");
    ex.eps_grid = cfg.get_double_list("report.eps_grid", {0.0, 0.25, 0.5, 0.75, 1.0, 1.25});

    ex.sched = schedule::build_schedule(
        schedule::schedule_kind_from_string(cfg.get_string("schedule.kind", "cosine")),
        cfg.get_int("schedule.T", 1000));

    if (cfg.has("data.csv")) {
        data::Dataset ds = data::load_csv_dataset(cfg.require_string("data.csv"));
        for (const auto& s : ds.samples) {
            ex.eval_x.push_back(s.x);
            ex.eval_y.push_back(s.label);
        }
    } else {
        ex.has_world = true;
        ex.world = world_from_config(cfg);
        data::Dataset ds = data::sample_dataset(ex.world,
                                                cfg.get_int("world.eval_per_class", 50),
                                                cfg.get_u64("world.eval_seed", 7),
                                                data::Split::Eval);
        for (const auto& s : ds.samples) {
            ex.eval_x.push_back(s.x);
            ex.eval_y.push_back(s.label);
        }
    }

    const double k = cfg.get_double("pipeline.k", 1.8);
    std::string den_kind = cfg.get_string("denoiser.kind", "analytic");
    if (den_kind == "identity") {
        ex.fixed_den = std::make_unique<denoiser::IdentityDenoiser>();
        ex.den = ex.fixed_den.get();
    } else if (den_kind == "analytic") {
        if (!ex.has_world) {
            throw ConfigError("denoiser.kind=analytic needs a GmmWorld, not a CSV dataset");
        }
        ex.fixed_den = std::make_unique<denoiser::AnalyticGmmDenoiser>(ex.world);
        ex.den = ex.fixed_den.get();
    } else if (den_kind == "neural") {
        if (cfg.has("denoiser.checkpoint")) {
            ex.neural_den = std::make_unique<denoiser::NeuralDenoiser>(
                denoiser::load_denoiser(cfg.require_string("denoiser.checkpoint")));
        } else if (need_neural_denoiser && ex.has_world) {
            data::GmmWorld pre_world =
                jittered_world(ex.world, cfg.get_double("pretrain.world_jitter", 0.0),
                               cfg.get_u64("pretrain.seed", ex.seed));
            ex.neural_den = std::make_unique<denoiser::NeuralDenoiser>(
                denoiser::pretrain_denoiser(pre_world, ex.sched,
                                            pretrain_config(cfg, k, ex.seed), nullptr));
        } else {
            throw ConfigError("denoiser.kind=neural needs denoiser.checkpoint");
        }
        ex.den = ex.neural_den.get();
    } else {
        throw ConfigError("unknown denoiser.kind: " + den_kind);
    }

    std::string clf_kind = cfg.get_string("classifier.kind", "bayes");
    if (clf_kind == "bayes") {
        if (!ex.has_world) {
            throw ConfigError("classifier.kind=bayes needs a GmmWorld, not a CSV dataset");
        }
        ex.bayes_clf = std::make_unique<classifier::BayesClassifier>(ex.world);
        ex.clf = ex.bayes_clf.get();
    } else if (clf_kind == "neural") {
        if (!ex.has_world && !cfg.has("classifier.checkpoint")) {
            throw ConfigError("classifier.kind=neural needs a checkpoint or a GmmWorld");
        }
        ex.neural_clf = train_classifier_from_config(cfg, ex.world);
        ex.clf = ex.neural_clf.get();
    } else {
        throw ConfigError("unknown classifier.kind: " + clf_kind);
    }

    ex.smooth.sigma = cfg.get_double("smoothing.sigma", 0.25);
    ex.smooth.n0 = cfg.get_int("smoothing.n0", 100);
    ex.smooth.n = cfg.get_long("smoothing.n", 10000);
    ex.smooth.alpha = cfg.get_double("smoothing.alpha", 0.001);
    ex.smooth.batch = cfg.get_int("smoothing.batch", 1000);
    ex.smooth.validate();

    ex.pipe.den = ex.den;
    ex.pipe.clf = ex.clf;
    ex.pipe.sched = &ex.sched;
    ex.pipe.k = schedule::CorrectionFactor{k};
    ex.pipe.sigma = ex.smooth.sigma;
    std::string cond = cfg.get_string("pipeline.cond", "empty");
    if (cond == "empty") {
        ex.pipe.cond = denoiser::Conditioning::empty();
    } else if (cond == "adapt") {
        ex.pipe.cond = denoiser::Conditioning::adapt();
    } else {
        throw ConfigError("unknown pipeline.cond: " + cond);
    }
    return ex;
}

json certify_all(const Experiment& ex, const smoothing::Pipeline& pipe) {
    const std::size_t n = ex.eval_x.size();
    std::vector<json> recs(n);
    auto base = pipe.base_fn();
    parallel_for(n, ex.workers, [&](std::size_t i) {
        auto cert = smoothing::certify(base, ex.eval_x[i], ex.smooth, ex.seed, i);
        recs[i] = report::certificate_record(static_cast<int>(i), ex.eval_y[i], cert,
                                             ex.smooth, ex.seed);
    });
    json records = json::array();
    for (auto& r : recs) records.push_back(std::move(r));
    return records;
}

std::string default_out(const config::Config& cfg, const std::string& command) {
    return cfg.get_string("out.path", command + "_report.json");
}

std::string sibling_path(const std::string& report_path, const std::string& suffix) {
    auto dot = report_path.rfind(".json");
    std::string stem = dot == std::string::npos ? report_path : report_path.substr(0, dot);
    return stem + suffix;
}

json certify_block(const Experiment& ex, const smoothing::Pipeline& pipe,
                   const std::vector<double>& eps_grid) {
    json block;
    block["records"] = certify_all(ex, pipe);
    block["aggregates"] = report::certify_aggregates(block["records"], eps_grid);
    return block;
}

std::string csv_from_rows(const json& rows, const std::vector<double>& eps_grid,
                          const std::string& key_column) {
    std::ostringstream csv;
    csv << key_column << ",acr";
    for (double eps : eps_grid) csv << ",acc_at_" << report::format_eps(eps);
    csv << "\n";
    csv.precision(17);
    for (const json& row : rows) {
        csv << row[key_column].dump() << "," << row["aggregates"]["acr"].get<double>();
        for (double eps : eps_grid) {
            csv << ","
                << row["aggregates"]["certified_accuracy_at"][report::format_eps(eps)]
                       .get<double>();
        }
        csv << "\n";
    }
    return csv.str();
}

}  // namespace

json run_certify(const config::Config& cfg) {
    Experiment ex = build_experiment(cfg);
    json rep;
    rep["command"] = "certify";
    rep["provenance"] = report::provenance(cfg, ex.seed, "certify");
    rep["records"] = certify_all(ex, ex.pipe);
    rep["aggregates"] = report::certify_aggregates(rep["records"], ex.eps_grid);
    report::write_json_file(rep, default_out(cfg, "certify"));
    return rep;
}

json run_attack(const config::Config& cfg) {
    Experiment ex = build_experiment(cfg);
    const std::vector<double> epsilons = cfg.get_double_list("attack.epsilons", {0.5, 1.0});
    attack::AttackConfig atk;
    atk.steps = cfg.get_int("attack.steps", 100);
    atk.m_test = cfg.get_int("attack.m_test", 32);
    atk.seed = cfg.get_u64("attack.seed", rng::derive_key(ex.seed, {0x61746bULL}));

    json rep;
    rep["command"] = "attack";
    rep["provenance"] = report::provenance(cfg, ex.seed, "attack");
    rep["certification"] = certify_block(ex, ex.pipe, epsilons);

    const std::size_t n = ex.eval_x.size();
    auto base = ex.pipe.base_fn();

    // clean accuracy with abstain fallback
    std::vector<json> clean_recs(n);
    parallel_for(n, ex.workers, [&](std::size_t i) {
        auto pred = smoothing::predict(base, ex.eval_x[i], ex.smooth, ex.seed, i);
        bool fallback_correct = base(ex.eval_x[i]) == ex.eval_y[i];
        bool predict_correct = !pred.abstained && pred.klass == ex.eval_y[i];
        json rec;
        rec["index"] = static_cast<int>(i);
        rec["label"] = ex.eval_y[i];
        if (pred.abstained) {
            rec["outcome"] = "abstain";
        } else {
            rec["outcome"] = pred.klass;
        }
        rec["p_value"] = pred.p_value;
        rec["fallback_correct"] = fallback_correct;
        rec["clean_correct"] = predict_correct || (pred.abstained && fallback_correct);
        clean_recs[i] = std::move(rec);
    });
    json clean_block;
    clean_block["records"] = json::array();
    for (auto& r : clean_recs) clean_block["records"].push_back(std::move(r));
    clean_block["aggregates"] = report::clean_aggregates(clean_block["records"]);
    rep["clean"] = std::move(clean_block);

    json attacks = json::array();
    std::ostringstream jsonl;
    for (std::size_t ei = 0; ei < epsilons.size(); ++ei) {
        attack::AttackConfig cur = atk;
        cur.epsilon = epsilons[ei];
        std::vector<json> recs(n);
        parallel_for(n, ex.workers, [&](std::size_t i) {
            Vec x_adv = attack::pgd_l2(ex.pipe, ex.eval_x[i], ex.eval_y[i], cur, i);
            double dist2 = 0.0;
            for (std::size_t j = 0; j < x_adv.size(); ++j) {
                double diff = x_adv[j] - ex.eval_x[i][j];
                dist2 += diff * diff;
            }
            double dist = std::sqrt(dist2);
            if (dist > cur.epsilon + 1e-9) {
                throw std::logic_error("attack budget violated");
            }
            auto adv = smoothing::predict(base, x_adv, ex.smooth, ex.seed,
                                          i + ((ei + 1) << 32));
            json rec;
            rec["index"] = static_cast<int>(i);
            rec["label"] = ex.eval_y[i];
            rec["epsilon"] = cur.epsilon;
            if (adv.abstained) {
                rec["adv_outcome"] = "abstain";
            } else {
                rec["adv_outcome"] = adv.klass;
            }
            rec["robust"] = !adv.abstained && adv.klass == ex.eval_y[i];
            rec["adv_distance"] = dist;
            recs[i] = std::move(rec);
        });
        json block;
        block["epsilon"] = cur.epsilon;
        block["records"] = json::array();
        for (auto& r : recs) block["records"].push_back(std::move(r));
        block["aggregates"] = report::attack_aggregates(block["records"]);
        for (const json& r : block["records"]) jsonl << r.dump() << "\n";
        attacks.push_back(std::move(block));
    }
    rep["attacks"] = std::move(attacks);

    json summary;
    summary["summary"] = true;
    summary["clean_accuracy"] = rep["clean"]["aggregates"]["clean_accuracy"];
    for (const json& block : rep["attacks"]) {
        summary["robust_accuracy_at_" +
                report::format_eps(block["epsilon"].get<double>())] =
            block["aggregates"]["robust_accuracy"];
    }
    jsonl << summary.dump() << "\n";

    const std::string out_path = default_out(cfg, "attack");
    report::write_json_file(rep, out_path);
    report::write_text_file(jsonl.str(), sibling_path(out_path, ".jsonl"));
    return rep;
}

json run_ablate_k(const config::Config& cfg) {
    Experiment ex = build_experiment(cfg, /*need_neural_denoiser=*/true);
    const std::vector<double> k_grid = cfg.get_double_list("ablate.k_grid", {0.5, 1.0, 1.8});
    if (k_grid.empty()) throw ConfigError("ablate.k_grid must be nonempty");

    json rows = json::array();
    for (double k : k_grid) {
        smoothing::Pipeline pipe = ex.pipe;
        pipe.k = schedule::CorrectionFactor{k};
        json row;
        row["k"] = k;
        row["records"] = certify_all(ex, pipe);
        row["aggregates"] = report::certify_aggregates(row["records"], ex.eps_grid);
        rows.push_back(std::move(row));
    }

    json rep;
    rep["command"] = "ablate-k";
    rep["provenance"] = report::provenance(cfg, ex.seed, "ablate-k");
    rep["rows"] = std::move(rows);

    const std::string out_path = default_out(cfg, "ablate_k");
    report::write_json_file(rep, out_path);
    report::write_text_file(csv_from_rows(rep["rows"], ex.eps_grid, "k"),
                            sibling_path(out_path, ".csv"));
    return rep;
}

json run_adapt(const config::Config& cfg) {
    config::Config local = cfg;
    local.set("denoiser.kind", "neural");
    local.set("classifier.kind", "neural");
    Experiment ex = build_experiment(local, /*need_neural_denoiser=*/true);
    if (!ex.has_world) throw ConfigError("adapt needs a GmmWorld generator");

    adapt::AdaptConfig acfg;
    acfg.lambda = cfg.get_double("adapt.lambda", 0.01);
    acfg.steps = cfg.get_int("adapt.steps", 500);
    acfg.lr_denoiser = cfg.get_double("adapt.lr_denoiser", 1e-2);
    acfg.lr_classifier = cfg.get_double("adapt.lr_classifier", 1e-3);
    acfg.momentum = cfg.get_double("adapt.momentum", 0.9);
    acfg.batch = cfg.get_int("adapt.batch", 32);
    acfg.mode = adapt::adapt_mode_from_string(cfg.get_string("adapt.mode", "staged"));
    acfg.k = ex.pipe.k;
    acfg.seed = cfg.get_u64("adapt.seed", rng::derive_key(ex.seed, {0x616470ULL}));
    acfg.validate();

    adapt::ReferenceSet refset = adapt::synthesize_reference_set(
        ex.world, cfg.get_int("adapt.shots", 1), acfg.seed);

    json rep;
    rep["command"] = "adapt";
    rep["provenance"] = report::provenance(cfg, ex.seed, "adapt");

    json rows = json::array();
    auto add_row = [&](const std::string& name, bool t2i, bool clf_tuned,
                       const smoothing::Pipeline& pipe) {
        json row;
        row["name"] = name;
        row["adapt_t2i"] = t2i;
        row["adapt_classifier"] = clf_tuned;
        row["records"] = certify_all(ex, pipe);
        row["aggregates"] = report::certify_aggregates(row["records"], ex.eps_grid);
        rows.push_back(std::move(row));
    };

    // pre-adaptation: zero-shot conditioning, original classifier
    smoothing::Pipeline before = ex.pipe;
    before.cond = denoiser::Conditioning::empty();
    add_row("none", false, false, before);

    adapt::TrainLog log_den;
    adapt::TrainLog log_clf;
    const std::string out_path = default_out(cfg, "adapt");
    if (acfg.mode == adapt::AdaptMode::Staged) {
        adapt::personalize(*ex.neural_den, *ex.neural_clf, refset, acfg, ex.sched, &log_den);
        smoothing::Pipeline after_t2i = ex.pipe;
        after_t2i.cond = denoiser::Conditioning::adapt();
        add_row("t2i", true, false, after_t2i);

        adapt::finetune_classifier(*ex.neural_den, *ex.neural_clf, refset, acfg, ex.sched,
                                   &log_clf);
        add_row("both", true, true, after_t2i);
    } else {
        adapt::run_adaptation(*ex.neural_den, *ex.neural_clf, refset, acfg, ex.sched,
                              &log_den, &log_clf);
        smoothing::Pipeline after = ex.pipe;
        after.cond = denoiser::Conditioning::adapt();
        add_row("both", true, true, after);
    }
    rep["rows"] = std::move(rows);

    double acr_before = rep["rows"][0]["aggregates"]["acr"].get<double>();
    double acr_after =
        rep["rows"][rep["rows"].size() - 1]["aggregates"]["acr"].get<double>();
    rep["acr_delta"] = acr_after - acr_before;

    denoiser::save_denoiser(*ex.neural_den, sibling_path(out_path, "_denoiser.bin"),
                            ex.sched.kind, ex.pipe.k.k);
    nn::save_mlp(ex.neural_clf->params(), sibling_path(out_path, "_classifier.bin"));
    adapt::write_training_curve(log_den, sibling_path(out_path, "_curve_denoiser.csv"));
    adapt::write_training_curve(log_clf, sibling_path(out_path, "_curve_classifier.csv"));
    report::write_json_file(rep, out_path);
    return rep;
}

json run_pretrain_denoiser(const config::Config& cfg) {
    config::Config local = cfg;
    local.set("denoiser.kind", "identity");  // experiment pipeline unused here
    Experiment ex = build_experiment(local);
    if (!ex.has_world) throw ConfigError("pretrain-denoiser needs a GmmWorld");

    const double k = cfg.get_double("pipeline.k", 1.8);
    data::GmmWorld pre_world =
        jittered_world(ex.world, cfg.get_double("pretrain.world_jitter", 0.0),
                       cfg.get_u64("pretrain.seed", ex.seed));
    std::vector<double> curve;
    denoiser::NeuralDenoiser den =
        denoiser::pretrain_denoiser(pre_world, ex.sched, pretrain_config(cfg, k, ex.seed),
                                    &curve);

    const std::string out_path = cfg.get_string("out.path", "denoiser.bin");
    denoiser::save_denoiser(den, out_path, ex.sched.kind, k);

    json rep;
    rep["command"] = "pretrain-denoiser";
    rep["provenance"] = report::provenance(cfg, ex.seed, "pretrain-denoiser");
    rep["checkpoint"] = out_path;

    denoiser::IdentityDenoiser identity;
    denoiser::AnalyticGmmDenoiser analytic(ex.world);
    const schedule::CorrectionFactor kf{k};
    json mse = json::object();
    for (double sigma : {0.25, 0.5}) {
        json at;
        at["identity"] = denoiser::denoiser_mse(identity, ex.world, ex.sched, kf,
                                                denoiser::Conditioning::empty(), sigma, 500,
                                                ex.seed);
        at["neural"] = denoiser::denoiser_mse(den, ex.world, ex.sched, kf,
                                              denoiser::Conditioning::empty(), sigma, 500,
                                              ex.seed);
        at["analytic"] = denoiser::denoiser_mse(analytic, ex.world, ex.sched, kf,
                                                denoiser::Conditioning::empty(), sigma, 500,
                                                ex.seed);
        mse[report::format_eps(sigma)] = std::move(at);
    }
    rep["mse"] = std::move(mse);

    std::ostringstream curve_csv;
    curve_csv << "step,loss\n";
    curve_csv.precision(17);
    for (std::size_t i = 0; i < curve.size(); ++i) curve_csv << i << "," << curve[i] << "\n";
    report::write_text_file(curve_csv.str(), sibling_path(out_path, "_curve.csv"));
    report::write_json_file(rep, sibling_path(out_path, "_report.json"));
    return rep;
}

int run_recompute(const config::Config& cfg) {
    json rep = report::load_json_file(cfg.require_string("report.path"));
    std::string mismatch;
    if (report::recompute_matches(rep, &mismatch)) {
        std::cout << "recompute: aggregates match\n";
        return 0;
    }
    std::cerr << "recompute: " << mismatch << "\n";
    return 3;
}

int run_command(const config::CliInvocation& inv) {
    if (inv.command == "certify") {
        run_certify(inv.cfg);
    } else if (inv.command == "attack") {
        run_attack(inv.cfg);
    } else if (inv.command == "adapt") {
        run_adapt(inv.cfg);
    } else if (inv.command == "ablate-k") {
        run_ablate_k(inv.cfg);
    } else if (inv.command == "pretrain-denoiser") {
        run_pretrain_denoiser(inv.cfg);
    } else if (inv.command == "recompute") {
        return run_recompute(inv.cfg);
    } else {
        throw ConfigError("unknown command: " + inv.command);
    }
    return 0;
}

}  // namespace certismooth::runs
