#pragma once

// Corpus generation and the four-condition comparison harness
// (baseline / seg-sn / reg-sn / seg+reg).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "symrec/metrics.hpp"
#include "symrec/phantom.hpp"
#include "symrec/recon.hpp"
#include "symrec/refine.hpp"
#include "symrec/sn.hpp"

namespace symrec {

struct CorpusSpec {
    int count = 60;
    int edge = 64;
    std::uint64_t seed = 1;
    double asymmetry_ratio = 0.02;
    // Relative weights of spherical-cap, box and frontal defects.
    double mix_cap = 1.0;
    double mix_box = 1.0;
    double mix_frontal = 1.0;
    // Ball radius / box half-extent range at 64^3, scaled with edge.
    double size_min = 5.0;
    double size_max = 8.0;

    void validate() const;
    static CorpusSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct CorpusCase {
    std::string id;
    Volume skull;
    Volume defective;
    Volume implant;
    Plane plane;
    DefectKind kind = DefectKind::spherical_cap;
};

// Deterministic in spec; case i uses seeds derived from (spec.seed, i).
CorpusCase make_case(const CorpusSpec& spec, int index);
std::vector<CorpusCase> make_corpus(const CorpusSpec& spec, int workers = 1);

// <dir>/manifest.json plus per-case SVOX1 volumes and plane JSON.
void save_corpus(const std::filesystem::path& dir, const std::vector<CorpusCase>& cases, const nlohmann::json& spec);
std::vector<CorpusCase> load_corpus(const std::filesystem::path& dir);

enum class Condition { baseline, seg_sn, reg_sn, seg_reg };
std::string to_string(Condition c);
Condition condition_from_string(const std::string& s);

struct ExperimentConfig {
    std::filesystem::path output_dir = "experiment_out";
    CorpusSpec train_corpus;           // RN training pairs
    CorpusSpec test_corpus;            // held-out evaluation pairs
    CorpusSpec sn_corpus;              // healthy skulls for SN training
    double alpha = 1.0;
    double train_fraction = 0.9;
    SnTrainConfig sn;
    RnTrainConfig rn;
    RefineConfig refine;
    std::vector<Condition> conditions{Condition::baseline, Condition::seg_sn, Condition::reg_sn, Condition::seg_reg};
    int workers = 1;
    nlohmann::json source;  // config as read, hashed into every CSV row
    // Optional progress sink (stage and epoch messages); not part of the hash.
    std::function<void(const std::string&)> progress;

    void validate() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
};

struct CaseResult {
    MetricsReport metrics;
    double seconds = 0.0;          // wall clock of this condition's pipeline
    bool defect_preserved = true;  // defective input bitwise unchanged
    std::optional<RefineReport> refine;
};

struct ExperimentResult {
    std::string config_hash;
    std::vector<CaseResult> cases;  // ordered by case, then condition
    std::map<std::string, double> stage_seconds;
    SnTrainResult sn;
    std::optional<RnTrainResult> rn_baseline;
    std::optional<RnTrainResult> rn_symmetric;
};

// Runs every stage and writes cases.csv, summary.csv, wilcoxon.csv,
// timings.json and training logs into output_dir. CSV contents depend only
// on the config, never on timing or worker count.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Post-processing shared by all conditions: binarize at 0.5 and drop voxels
// already present in the defective skull.
Volume implant_mask(const Volume& rec, const Volume& defective);

}  // namespace symrec
