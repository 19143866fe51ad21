#include "symrec/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "symrec/errors.hpp"
#include "symrec/io.hpp"
#include "symrec/parallel.hpp"
#include "symrec/rng.hpp"

namespace symrec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

// Reads an optional field, turning type errors into ConfigError.
template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + ": field '" + key + "' has the wrong type");
    }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) == known.end()) {
            throw ConfigError(where + ": unknown field '" + key + "'");
        }
    }
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) { return percentile(std::move(v), 0.5); }

double metric_value(const MetricsReport& r, const std::string& m) {
    if (m == "dsc") return r.dsc;
    if (m == "sdsc") return r.sdsc;
    if (m == "hd95") return r.hd95;
    return r.msd;
}

const char* const kMetrics[] = {"dsc", "sdsc", "hd95", "msd"};

std::string volume_hash(const Volume& v) {
    const auto d = v.data();
    return io::sha256_hex(d.data(), d.size_bytes());
}

}  // namespace

// ---- corpus -----------------------------------------------------------------

void CorpusSpec::validate() const {
    if (count < 1) throw ConfigError("corpus: count must be >= 1");
    if (edge < 32 || edge % 16 != 0) throw ConfigError("corpus: edge must be a multiple of 16 and >= 32");
    if (!(asymmetry_ratio >= 0.0 && asymmetry_ratio <= 0.1)) throw ConfigError("corpus: asymmetry_ratio must lie in [0, 0.1]");
    if (mix_cap < 0 || mix_box < 0 || mix_frontal < 0 || mix_cap + mix_box + mix_frontal <= 0) {
        throw ConfigError("corpus: defect mix weights must be >= 0 and not all zero");
    }
    if (!(size_min > 0.0 && size_max >= size_min)) throw ConfigError("corpus: need 0 < size_min <= size_max");
}

CorpusSpec CorpusSpec::from_json(const json& j) {
    reject_unknown(j, {"count", "edge", "seed", "asymmetry_ratio", "mix", "size_min", "size_max"}, "corpus");
    CorpusSpec s;
    read(j, "count", s.count, "corpus");
    read(j, "edge", s.edge, "corpus");
    read(j, "seed", s.seed, "corpus");
    read(j, "asymmetry_ratio", s.asymmetry_ratio, "corpus");
    read(j, "size_min", s.size_min, "corpus");
    read(j, "size_max", s.size_max, "corpus");
    if (j.contains("mix")) {
        const auto& m = j.at("mix");
        reject_unknown(m, {"spherical-cap", "box", "symmetry-breaking-frontal"}, "corpus.mix");
        s.mix_cap = s.mix_box = s.mix_frontal = 0.0;
        read(m, "spherical-cap", s.mix_cap, "corpus.mix");
        read(m, "box", s.mix_box, "corpus.mix");
        read(m, "symmetry-breaking-frontal", s.mix_frontal, "corpus.mix");
    }
    s.validate();
    return s;
}

json CorpusSpec::to_json() const {
    return {{"count", count},
            {"edge", edge},
            {"seed", seed},
            {"asymmetry_ratio", asymmetry_ratio},
            {"mix", {{"spherical-cap", mix_cap}, {"box", mix_box}, {"symmetry-breaking-frontal", mix_frontal}}},
            {"size_min", size_min},
            {"size_max", size_max}};
}

CorpusCase make_case(const CorpusSpec& spec, int index) {
    spec.validate();
    const std::uint64_t seed = derive_seed(spec.seed, "case", static_cast<std::uint64_t>(index));
    const Dims dims{spec.edge, spec.edge, spec.edge};
    const Skull skull = generate_skull(random_phantom_spec(dims, seed, spec.asymmetry_ratio));

    Rng rng(derive_seed(seed, "defect-kind"));
    const double total = spec.mix_cap + spec.mix_box + spec.mix_frontal;
    const double pick = rng.uniform(0.0, total);
    const DefectKind kind = pick < spec.mix_cap ? DefectKind::spherical_cap
                            : pick < spec.mix_cap + spec.mix_box ? DefectKind::box
                                                                 : DefectKind::frontal;
    const double k = spec.edge / 64.0;
    DefectSpec d;
    d.kind = kind;
    if (kind == DefectKind::box) {
        d.size = {rng.uniform(spec.size_min, spec.size_max) * k, rng.uniform(spec.size_min, spec.size_max) * k,
                  rng.uniform(spec.size_min, spec.size_max) * k};
    } else {
        const double r = rng.uniform(spec.size_min, spec.size_max) * k;
        d.size = {r, r, r};
    }
    for (int attempt = 0; attempt < 32; ++attempt) {
        d.seed = derive_seed(seed, "defect", static_cast<std::uint64_t>(attempt));
        try {
            auto res = insert_defect(skull.volume, d, skull.plane);
            char id[32];
            std::snprintf(id, sizeof id, "case_%04d", index);
            return {id, skull.volume, std::move(res.defective), std::move(res.implant), skull.plane, kind};
        } catch (const std::invalid_argument&) {
            // Redraw the center.
        }
    }
    throw DataError("corpus: could not place a " + to_string(kind) + " defect for case " + std::to_string(index));
}

std::vector<CorpusCase> make_corpus(const CorpusSpec& spec, int workers) {
    spec.validate();
    std::vector<std::optional<CorpusCase>> slots(spec.count);
    parallel_for(slots.size(), workers, [&](std::size_t i) { slots[i] = make_case(spec, static_cast<int>(i)); });
    std::vector<CorpusCase> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

void save_corpus(const fs::path& dir, const std::vector<CorpusCase>& cases, const json& spec) {
    fs::create_directories(dir);
    json list = json::array();
    for (const auto& c : cases) {
        io::save_volume(dir / (c.id + "_skull.svox"), c.skull);
        io::save_volume(dir / (c.id + "_defective.svox"), c.defective);
        io::save_volume(dir / (c.id + "_implant.svox"), c.implant);
        json entry = {{"id", c.id},
                      {"kind", to_string(c.kind)},
                      {"plane", io::plane_to_json(c.plane)},
                      {"skull", c.id + "_skull.svox"},
                      {"defective", c.id + "_defective.svox"},
                      {"implant", c.id + "_implant.svox"}};
        io::write_text(dir / (c.id + "_plane.json"), io::plane_to_json(c.plane).dump(2) + "\n");
        list.push_back(entry);
    }
    io::write_text(dir / "manifest.json", json{{"spec", spec}, {"cases", list}}.dump(2) + "\n");
}

std::vector<CorpusCase> load_corpus(const fs::path& dir) {
    const fs::path manifest = dir / "manifest.json";
    const json m = io::read_json(manifest);
    if (!m.contains("cases") || !m["cases"].is_array()) throw DataError(manifest.string() + ": field 'cases' missing");
    std::vector<CorpusCase> out;
    for (const auto& e : m["cases"]) {
        try {
            out.push_back({e.at("id").get<std::string>(), io::load_volume(dir / e.at("skull").get<std::string>()),
                           io::load_volume(dir / e.at("defective").get<std::string>()),
                           io::load_volume(dir / e.at("implant").get<std::string>()), io::plane_from_json(e.at("plane")),
                           defect_kind_from_string(e.at("kind").get<std::string>())});
        } catch (const json::exception& ex) {
            throw DataError(manifest.string() + ": malformed case entry: " + ex.what());
        }
    }
    return out;
}

// ---- config -----------------------------------------------------------------

std::string to_string(Condition c) {
    switch (c) {
        case Condition::baseline: return "baseline";
        case Condition::seg_sn: return "seg-sn";
        case Condition::reg_sn: return "reg-sn";
        case Condition::seg_reg: return "seg+reg";
    }
    return "?";
}

Condition condition_from_string(const std::string& s) {
    if (s == "baseline") return Condition::baseline;
    if (s == "seg-sn") return Condition::seg_sn;
    if (s == "reg-sn") return Condition::reg_sn;
    if (s == "seg+reg") return Condition::seg_reg;
    throw ConfigError("unknown condition '" + s + "' (expected baseline, seg-sn, reg-sn or seg+reg)");
}

void ExperimentConfig::validate() const {
    train_corpus.validate();
    test_corpus.validate();
    sn_corpus.validate();
    if (!(train_fraction > 0.5 && train_fraction < 0.95)) throw ConfigError("experiment: split must lie in (0.5, 0.95)");
    if (!(alpha >= 0.0)) throw ConfigError("experiment: alpha must be >= 0");
    if (!(refine.lambda > 0.0)) throw ConfigError("experiment: lambda must be > 0");
    if (conditions.empty()) throw ConfigError("experiment: condition list is empty");
    if (workers < 1) throw ConfigError("experiment: workers must be >= 1");
    if (train_corpus.edge != test_corpus.edge) throw ConfigError("experiment: train and test corpora need the same edge");
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    reject_unknown(j, {"output_dir", "corpus", "alpha", "split", "sn", "rn", "refine", "conditions", "workers"}, "experiment");
    ExperimentConfig c;
    c.train_corpus.seed = 101;
    c.test_corpus = c.train_corpus;
    c.test_corpus.seed = 202;
    c.test_corpus.count = 30;
    c.sn_corpus = c.train_corpus;
    c.sn_corpus.seed = 303;
    c.sn_corpus.count = 40;
    std::string out = c.output_dir.string();
    read(j, "output_dir", out, "experiment");
    c.output_dir = out;
    if (j.contains("corpus")) {
        const auto& cj = j.at("corpus");
        reject_unknown(cj, {"train", "test", "sn"}, "experiment.corpus");
        const auto merge = [&](const char* key, CorpusSpec& spec) {
            if (!cj.contains(key)) return;
            json merged = spec.to_json();
            merged.merge_patch(cj.at(key));
            spec = CorpusSpec::from_json(merged);
        };
        merge("train", c.train_corpus);
        merge("test", c.test_corpus);
        merge("sn", c.sn_corpus);
    }
    read(j, "alpha", c.alpha, "experiment");
    read(j, "split", c.train_fraction, "experiment");
    c.rn.train_fraction = c.train_fraction;
    c.rn.alpha = c.alpha;
    if (j.contains("sn")) {
        const auto& s = j.at("sn");
        reject_unknown(s, {"epochs", "batch", "lr", "weight_decay", "val_fraction", "augment", "working_edge", "plateau_patience", "seed"}, "experiment.sn");
        read(s, "epochs", c.sn.epochs, "experiment.sn");
        read(s, "batch", c.sn.batch, "experiment.sn");
        read(s, "lr", c.sn.lr, "experiment.sn");
        read(s, "weight_decay", c.sn.weight_decay, "experiment.sn");
        read(s, "val_fraction", c.sn.val_fraction, "experiment.sn");
        read(s, "augment", c.sn.augment, "experiment.sn");
        read(s, "working_edge", c.sn.working_edge, "experiment.sn");
        read(s, "plateau_patience", c.sn.plateau_patience, "experiment.sn");
        read(s, "seed", c.sn.seed, "experiment.sn");
    }
    if (j.contains("rn")) {
        const auto& r = j.at("rn");
        reject_unknown(r, {"max_epochs", "patience", "batch", "lr", "weight_decay", "detach_plane", "alpha_delay_epochs", "alpha_warmup_epochs", "seed"},
                       "experiment.rn");
        read(r, "max_epochs", c.rn.max_epochs, "experiment.rn");
        read(r, "patience", c.rn.patience, "experiment.rn");
        read(r, "batch", c.rn.batch, "experiment.rn");
        read(r, "lr", c.rn.lr, "experiment.rn");
        read(r, "weight_decay", c.rn.weight_decay, "experiment.rn");
        read(r, "detach_plane", c.rn.detach_plane, "experiment.rn");
        read(r, "alpha_delay_epochs", c.rn.alpha_delay_epochs, "experiment.rn");
        read(r, "alpha_warmup_epochs", c.rn.alpha_warmup_epochs, "experiment.rn");
        read(r, "seed", c.rn.seed, "experiment.rn");
    }
    if (j.contains("refine")) {
        const auto& r = j.at("refine");
        reject_unknown(r, {"lambda", "lambda_nominal", "lr", "iterations", "replan_every", "early_stop_tol", "early_stop_window"}, "experiment.refine");
        read(r, "lambda", c.refine.lambda, "experiment.refine");
        read(r, "lambda_nominal", c.refine.lambda_nominal, "experiment.refine");
        read(r, "lr", c.refine.lr, "experiment.refine");
        read(r, "iterations", c.refine.iterations, "experiment.refine");
        read(r, "replan_every", c.refine.replan_every, "experiment.refine");
        read(r, "early_stop_tol", c.refine.early_stop_tol, "experiment.refine");
        read(r, "early_stop_window", c.refine.early_stop_window, "experiment.refine");
    }
    if (j.contains("conditions")) {
        std::vector<std::string> names;
        read(j, "conditions", names, "experiment");
        c.conditions.clear();
        for (const auto& n : names) c.conditions.push_back(condition_from_string(n));
    }
    read(j, "workers", c.workers, "experiment");
    c.source = j;
    c.validate();
    return c;
}

// ---- harness ----------------------------------------------------------------

Volume implant_mask(const Volume& rec, const Volume& defective) {
    return subtract_mask(binarize(rec, 0.5), binarize(defective, 0.5));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentResult result;
    // Worker count and output location do not change results, so they are
    // kept out of the hash.
    json hashed = cfg.source;
    if (hashed.is_object()) {
        hashed.erase("workers");
        hashed.erase("output_dir");
    }
    result.config_hash = io::config_hash(hashed);
    fs::create_directories(cfg.output_dir);

    const auto say = [&](const std::string& msg) {
        if (cfg.progress) cfg.progress(msg);
    };
    char buf[160];

    say("generating corpora");
    auto t0 = Clock::now();
    const auto train = make_corpus(cfg.train_corpus, cfg.workers);
    const auto test = make_corpus(cfg.test_corpus, cfg.workers);
    const auto healthy = make_corpus(cfg.sn_corpus, cfg.workers);
    result.stage_seconds["corpus"] = seconds_since(t0);

    t0 = Clock::now();
    std::vector<Volume> skulls;
    for (const auto& c : healthy) skulls.push_back(c.skull);
    SnTrainConfig sn_cfg = cfg.sn;
    sn_cfg.workers = cfg.workers;
    sn_cfg.on_epoch = [&](const SnTrainLogRow& r) {
        std::snprintf(buf, sizeof buf, "sn epoch %d: train SL %.4f, val SL %.4f", r.epoch, r.train_sl, r.val_sl);
        say(buf);
    };
    result.sn = train_sn(skulls, sn_cfg);
    result.stage_seconds["sn_train"] = seconds_since(t0);
    const SnParams& sn = result.sn.params;

    std::vector<RnPair> pairs;
    for (const auto& c : train) pairs.push_back({c.defective, c.implant});
    const auto uses = [&](Condition a, Condition b) {
        return std::find(cfg.conditions.begin(), cfg.conditions.end(), a) != cfg.conditions.end() ||
               std::find(cfg.conditions.begin(), cfg.conditions.end(), b) != cfg.conditions.end();
    };
    RnTrainConfig rn_cfg = cfg.rn;
    rn_cfg.workers = cfg.workers;
    rn_cfg.train_fraction = cfg.train_fraction;
    rn_cfg.on_epoch = [&](const RnTrainLogRow& r) {
        std::snprintf(buf, sizeof buf, "rn (alpha %g) epoch %d: train %.4f, val %.4f", rn_cfg.alpha, r.epoch, r.train_loss, r.val_loss);
        say(buf);
    };
    if (uses(Condition::baseline, Condition::reg_sn)) {
        t0 = Clock::now();
        rn_cfg.alpha = 0.0;
        result.rn_baseline = train_rn(pairs, sn, rn_cfg);
        result.stage_seconds["rn_train_alpha0"] = seconds_since(t0);
    }
    if (uses(Condition::seg_sn, Condition::seg_reg)) {
        t0 = Clock::now();
        rn_cfg.alpha = cfg.alpha;
        result.rn_symmetric = train_rn(pairs, sn, rn_cfg);
        result.stage_seconds["rn_train_alpha"] = seconds_since(t0);
    }

    say("evaluating " + std::to_string(test.size()) + " test cases");
    t0 = Clock::now();
    const std::size_t nc = cfg.conditions.size();
    result.cases.resize(test.size() * nc);
    parallel_for(test.size(), cfg.workers, [&](std::size_t i) {
        const CorpusCase& c = test[i];
        const std::string before = volume_hash(c.defective);
        std::optional<Volume> seg[2];
        double seg_seconds[2] = {0.0, 0.0};
        const auto segment = [&](int which) -> const Volume& {
            if (!seg[which]) {
                const auto s0 = Clock::now();
                const RnParams& rn = which == 0 ? result.rn_baseline->params : result.rn_symmetric->params;
                seg[which] = implant_mask(infer_rn(rn, c.defective).rec, c.defective);
                seg_seconds[which] = seconds_since(s0);
            }
            return *seg[which];
        };
        for (std::size_t k = 0; k < nc; ++k) {
            const Condition cond = cfg.conditions[k];
            const int which = cond == Condition::baseline || cond == Condition::reg_sn ? 0 : 1;
            CaseResult& out = result.cases[i * nc + k];
            const Volume& pred_seg = segment(which);
            Volume pred = pred_seg;
            out.seconds = seg_seconds[which];
            if (cond == Condition::reg_sn || cond == Condition::seg_reg) {
                const auto s0 = Clock::now();
                try {
                    auto refined = refine_reconstruction(c.defective, pred_seg, &sn, cfg.refine);
                    pred = implant_mask(refined.rec, c.defective);
                    out.refine = std::move(refined.report);
                } catch (const RefineDiverged& e) {
                    out.refine = e.report;
                }
                out.seconds += seconds_since(s0);
            }
            out.metrics = evaluate(pred, c.implant, c.id, to_string(cond));
            out.defect_preserved = volume_hash(c.defective) == before;
        }
    });
    result.stage_seconds["evaluation"] = seconds_since(t0);

    // cases.csv
    std::ostringstream cases;
    cases << "config_hash,case_id,condition,dsc,sdsc,hd95,msd\n";
    for (const auto& r : result.cases) {
        const auto& m = r.metrics;
        cases << result.config_hash << ',' << m.case_id << ',' << m.condition << ',' << fmt(m.dsc) << ',' << fmt(m.sdsc)
              << ',' << fmt(m.hd95) << ',' << fmt(m.msd) << '\n';
    }
    io::write_text(cfg.output_dir / "cases.csv", cases.str());

    const auto column = [&](std::size_t k, const std::string& metric) {
        std::vector<double> v;
        for (std::size_t i = 0; i < test.size(); ++i) v.push_back(metric_value(result.cases[i * nc + k].metrics, metric));
        return v;
    };
    std::ostringstream summary;
    summary << "config_hash,condition,metric,n,mean,std,median\n";
    for (std::size_t k = 0; k < nc; ++k)
        for (const char* m : kMetrics) {
            const auto v = column(k, m);
            summary << result.config_hash << ',' << to_string(cfg.conditions[k]) << ',' << m << ',' << v.size() << ','
                    << fmt(mean_of(v)) << ',' << fmt(std_of(v)) << ',' << fmt(median_of(v)) << '\n';
        }
    io::write_text(cfg.output_dir / "summary.csv", summary.str());

    std::ostringstream wil;
    wil << "config_hash,metric,condition_a,condition_b,n,mean_difference,p_value,note\n";
    for (std::size_t a = 0; a < nc; ++a)
        for (std::size_t b = a + 1; b < nc; ++b)
            for (const char* m : kMetrics) {
                const auto x = column(b, m), y = column(a, m);
                std::vector<double> d(x.size());
                bool finite = true;
                for (std::size_t i = 0; i < d.size(); ++i) {
                    d[i] = x[i] - y[i];
                    finite = finite && std::isfinite(d[i]);
                }
                std::string p = "NA", note;
                if (!finite) {
                    note = "non-finite values";
                } else {
                    try {
                        p = fmt(wilcoxon_signed_rank(d));
                    } catch (const std::invalid_argument&) {
                        note = "too few nonzero differences";
                    }
                }
                wil << result.config_hash << ',' << m << ',' << to_string(cfg.conditions[a]) << ','
                    << to_string(cfg.conditions[b]) << ',' << d.size() << ',' << (finite ? fmt(mean_of(d)) : "NA") << ','
                    << p << ',' << note << '\n';
            }
    io::write_text(cfg.output_dir / "wilcoxon.csv", wil.str());

    std::ostringstream sn_log;
    sn_log << "config_hash,epoch,train_sl,val_sl,lr\n";
    for (const auto& r : result.sn.log)
        sn_log << result.config_hash << ',' << r.epoch << ',' << fmt(r.train_sl) << ',' << fmt(r.val_sl) << ',' << fmt(r.lr) << '\n';
    io::write_text(cfg.output_dir / "sn_train_log.csv", sn_log.str());
    for (const auto* rn : {&result.rn_baseline, &result.rn_symmetric}) {
        if (!*rn) continue;
        std::ostringstream log;
        log << "config_hash,epoch,train_loss,val_loss,lr\n";
        for (const auto& r : (*rn)->log)
            log << result.config_hash << ',' << r.epoch << ',' << fmt(r.train_loss) << ',' << fmt(r.val_loss) << ',' << fmt(r.lr) << '\n';
        io::write_text(cfg.output_dir / (rn == &result.rn_baseline ? "rn_alpha0_log.csv" : "rn_alpha_log.csv"), log.str());
    }

    json timings = {{"config_hash", result.config_hash}, {"stages", result.stage_seconds}};
    json per_condition = json::object();
    for (std::size_t k = 0; k < nc; ++k) {
        std::vector<double> s;
        for (std::size_t i = 0; i < test.size(); ++i) s.push_back(result.cases[i * nc + k].seconds);
        per_condition[to_string(cfg.conditions[k])] = {{"mean_case_seconds", mean_of(s)}, {"max_case_seconds", *std::max_element(s.begin(), s.end())}};
    }
    timings["conditions"] = per_condition;
    io::write_text(cfg.output_dir / "timings.json", timings.dump(2) + "\n");
    return result;
}

}  // namespace symrec
