// Command line front end. Exit codes: 0 success, 2 configuration error,
// 3 data error, 4 numerical failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "symrec/errors.hpp"
#include "symrec/experiment.hpp"
#include "symrec/io.hpp"
#include "symrec/metrics.hpp"
#include "symrec/recon.hpp"
#include "symrec/refine.hpp"
#include "symrec/sn.hpp"
#include "symrec/symmetry.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace symrec;

namespace {

SnParams load_sn(const std::string& path) {
    SnParams sn = SnParams::init(0);
    io::load_params(path, sn.params, "sn");
    return sn;
}

RnParams load_rn(const std::string& path) {
    RnParams rn = RnParams::init(0);
    io::load_params(path, rn.params, "rn");
    return rn;
}

std::string csv_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

void emit(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-") std::cout << text;
    else io::write_text(out, text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Symmetry-enforced defect reconstruction on skull phantoms"};
    app.require_subcommand(1);

    // phantom gen
    auto* phantom = app.add_subcommand("phantom", "Phantom corpora");
    phantom->require_subcommand(1);
    auto* gen = phantom->add_subcommand("gen", "Generate skulls, defects, implants and planes");
    std::string gen_config, gen_out;
    int gen_workers = 1;
    gen->add_option("--config", gen_config, "Corpus JSON (count, edge, seed, asymmetry_ratio, mix, size_min, size_max)")->required();
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--workers", gen_workers, "Worker threads")->check(CLI::PositiveNumber);

    // symmetry fit / train
    auto* symmetry = app.add_subcommand("symmetry", "Symmetry plane estimation");
    symmetry->require_subcommand(1);
    auto* fit = symmetry->add_subcommand("fit", "Estimate the symmetry plane of a volume");
    std::string fit_in, fit_method = "direct", fit_sn, fit_out;
    fit->add_option("--in", fit_in, "Input volume (.svox)")->required();
    fit->add_option("--method", fit_method, "direct or amortized")->check(CLI::IsMember({"direct", "amortized"}));
    fit->add_option("--sn", fit_sn, "SN parameters (amortized method)");
    fit->add_option("--out", fit_out, "Plane JSON output (default stdout)");

    auto* strain = symmetry->add_subcommand("train", "Train the amortized plane regressor");
    std::string st_corpus, st_out;
    SnTrainConfig st_cfg;
    strain->add_option("--corpus", st_corpus, "Corpus directory (skull volumes are used)")->required();
    strain->add_option("--out", st_out, "Output parameter file")->required();
    strain->add_option("--epochs", st_cfg.epochs, "Epochs")->check(CLI::PositiveNumber);
    strain->add_option("--lr", st_cfg.lr, "Initial learning rate");
    strain->add_option("--seed", st_cfg.seed, "Seed");
    strain->add_option("--workers", st_cfg.workers, "Worker threads")->check(CLI::PositiveNumber);

    // recon train / infer
    auto* recon = app.add_subcommand("recon", "Implant reconstruction network");
    recon->require_subcommand(1);
    auto* rtrain = recon->add_subcommand("train", "Train the reconstruction network");
    std::string rt_corpus, rt_sn, rt_out;
    RnTrainConfig rt_cfg;
    rtrain->add_option("--corpus", rt_corpus, "Corpus directory")->required();
    rtrain->add_option("--sn", rt_sn, "SN parameters")->required();
    rtrain->add_option("--alpha", rt_cfg.alpha, "Weight of the symmetry term");
    rtrain->add_option("--out", rt_out, "Output parameter file")->required();
    rtrain->add_option("--max-epochs", rt_cfg.max_epochs, "Epoch limit");
    rtrain->add_option("--patience", rt_cfg.patience, "Early-stopping patience (epochs)");
    rtrain->add_option("--seed", rt_cfg.seed, "Seed");
    rtrain->add_option("--alpha-delay", rt_cfg.alpha_delay_epochs, "Epochs trained with the symmetry weight at 0");
    rtrain->add_option("--alpha-warmup", rt_cfg.alpha_warmup_epochs, "Epochs over which the symmetry weight ramps up to alpha");
    rtrain->add_flag("--detach-plane", rt_cfg.detach_plane, "Do not backpropagate through the SN");
    rtrain->add_option("--workers", rt_cfg.workers, "Worker threads")->check(CLI::PositiveNumber);

    auto* rinfer = recon->add_subcommand("infer", "Reconstruct the implant of a defective skull");
    std::string ri_rn, ri_in, ri_out;
    bool ri_binary = false;
    rinfer->add_option("--rn", ri_rn, "RN parameters")->required();
    rinfer->add_option("--in", ri_in, "Defective skull (.svox)")->required();
    rinfer->add_option("--out", ri_out, "Reconstruction output (.svox)")->required();
    rinfer->add_flag("--binarize", ri_binary, "Write the post-processed binary implant mask");

    // refine
    auto* refine = app.add_subcommand("refine", "Registration-based refinement of a reconstruction");
    std::string rf_in, rf_rec, rf_sn, rf_out, rf_report;
    RefineConfig rf_cfg;
    refine->add_option("--in", rf_in, "Defective skull (.svox)")->required();
    refine->add_option("--rec", rf_rec, "Reconstruction (.svox)")->required();
    refine->add_option("--sn", rf_sn, "SN parameters (default: direct plane fit)");
    refine->add_option("--lambda", rf_cfg.lambda, "Regularization weight (mean-normalized Reg)");
    refine->add_option("--iterations", rf_cfg.iterations, "Iteration limit");
    refine->add_option("--out", rf_out, "Refined reconstruction (.svox)")->required();
    refine->add_option("--report", rf_report, "Report JSON");

    // metrics
    auto* metrics = app.add_subcommand("metrics", "Compare a predicted implant with the ground truth");
    std::string m_pred, m_gt, m_out, m_case = "case", m_condition = "-";
    double m_tau = 1.0;
    metrics->add_option("--pred", m_pred, "Predicted implant (.svox)")->required();
    metrics->add_option("--gt", m_gt, "Ground-truth implant (.svox)")->required();
    metrics->add_option("--out", m_out, "CSV output (default stdout)");
    metrics->add_option("--case-id", m_case, "Case id column");
    metrics->add_option("--condition", m_condition, "Condition column");
    metrics->add_option("--tau", m_tau, "Surface tolerance in mm");

    // experiment run
    auto* experiment = app.add_subcommand("experiment", "Condition comparison harness");
    experiment->require_subcommand(1);
    auto* run = experiment->add_subcommand("run", "Run all stages of an experiment config");
    std::string ex_config;
    std::optional<int> ex_workers;
    run->add_option("--config", ex_config, "Experiment JSON")->required();
    run->add_option("--workers", ex_workers, "Override the worker count")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) {
            const json spec = io::read_json(gen_config);
            const auto corpus = make_corpus(CorpusSpec::from_json(spec), gen_workers);
            save_corpus(gen_out, corpus, spec);
            std::cout << "wrote " << corpus.size() << " cases to " << gen_out << "\n";
        } else if (fit->parsed()) {
            const Volume v = io::load_volume(fit_in);
            json out;
            if (fit_method == "amortized") {
                if (fit_sn.empty()) throw ConfigError("symmetry fit: --method amortized needs --sn");
                const Plane p = infer_sn(load_sn(fit_sn), v);
                out = io::plane_to_json(p);
                out["sl"] = symmetry_loss(v, p);
            } else {
                const auto r = fit_plane_direct(v);
                out = io::plane_to_json(r.plane);
                out["sl"] = r.sl;
            }
            emit(fit_out, out.dump(2) + "\n");
        } else if (strain->parsed()) {
            std::vector<Volume> skulls;
            for (auto& c : load_corpus(st_corpus)) skulls.push_back(std::move(c.skull));
            const auto r = train_sn(skulls, st_cfg);
            const json hashed = {{"epochs", st_cfg.epochs}, {"lr", st_cfg.lr}, {"seed", st_cfg.seed}, {"corpus", fs::path(st_corpus).filename().string()}};
            io::save_params(st_out, r.params.params, "sn", io::config_hash(hashed));
            std::string log = "epoch,train_sl,val_sl,lr\n";
            for (const auto& row : r.log)
                log += std::to_string(row.epoch) + "," + csv_number(row.train_sl) + "," + csv_number(row.val_sl) + "," + csv_number(row.lr) + "\n";
            io::write_text(st_out + ".log.csv", log);
            std::cout << "validation SL " << r.val_sl << " (epoch " << r.best_epoch << ")\n";
        } else if (rtrain->parsed()) {
            std::vector<RnPair> pairs;
            for (auto& c : load_corpus(rt_corpus)) pairs.push_back({std::move(c.defective), std::move(c.implant)});
            const auto r = train_rn(pairs, load_sn(rt_sn), rt_cfg);
            const json hashed = {{"alpha", rt_cfg.alpha}, {"max_epochs", rt_cfg.max_epochs}, {"patience", rt_cfg.patience}, {"seed", rt_cfg.seed}, {"detach_plane", rt_cfg.detach_plane}};
            io::save_params(rt_out, r.params.params, "rn", io::config_hash(hashed));
            std::string log = "epoch,train_loss,val_loss,lr\n";
            for (const auto& row : r.log)
                log += std::to_string(row.epoch) + "," + csv_number(row.train_loss) + "," + csv_number(row.val_loss) + "," + csv_number(row.lr) + "\n";
            io::write_text(rt_out + ".log.csv", log);
            std::cout << "validation loss " << r.val_loss << " (epoch " << r.best_epoch << ")\n";
        } else if (rinfer->parsed()) {
            const Volume v = io::load_volume(ri_in);
            const auto out = infer_rn(load_rn(ri_rn), v);
            io::save_volume(ri_out, ri_binary ? implant_mask(out.rec, v) : out.rec);
        } else if (refine->parsed()) {
            const Volume v = io::load_volume(rf_in);
            const Volume rec = io::load_volume(rf_rec);
            std::optional<SnParams> sn;
            if (!rf_sn.empty()) sn = load_sn(rf_sn);
            try {
                const auto r = refine_reconstruction(v, rec, sn ? &*sn : nullptr, rf_cfg);
                io::save_volume(rf_out, r.rec);
                if (!rf_report.empty()) io::write_text(rf_report, r.report.to_json().dump(2) + "\n");
            } catch (const RefineDiverged& e) {
                if (!rf_report.empty()) io::write_text(rf_report, e.report.to_json().dump(2) + "\n");
                throw;
            }
        } else if (metrics->parsed()) {
            const auto r = evaluate(io::load_volume(m_pred), io::load_volume(m_gt), m_case, m_condition, m_tau);
            emit(m_out, "case_id,condition,dsc,sdsc,hd95,msd\n" + r.case_id + "," + r.condition + "," + csv_number(r.dsc) + "," +
                            csv_number(r.sdsc) + "," + csv_number(r.hd95) + "," + csv_number(r.msd) + "\n");
        } else if (run->parsed()) {
            auto cfg = ExperimentConfig::from_json(io::read_json(ex_config));
            if (ex_workers) cfg.workers = *ex_workers;
            cfg.progress = [](const std::string& msg) { std::cerr << msg << std::endl; };
            const auto r = run_experiment(cfg);
            std::cout << "config " << r.config_hash << ": " << r.cases.size() << " case rows written to " << cfg.output_dir.string() << "\n";
            for (const auto& c : r.cases)
                if (!c.defect_preserved) throw NumericalError("experiment: a refinement modified its defective input");
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
