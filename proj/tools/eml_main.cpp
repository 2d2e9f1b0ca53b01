// eml: engagement-from-sensors pipeline CLI.
//
// Subcommands: synth, ingest, label, featurize, train, eval, ablate, stream,
// sweep. Shared pipeline options live on the top-level app and fall through
// from subcommands; precedence is flags > environment (EML_*) > config file
// > defaults. Exit codes: 0 success, 1 validation/data error, 2 usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"

#include "eml/csv.hpp"
#include "eml/eval.hpp"
#include "eml/features.hpp"
#include "eml/ingest.hpp"
#include "eml/labeling.hpp"
#include "eml/pipeline.hpp"
#include "eml/synth.hpp"

namespace {

struct SharedOpts {
    double window = 30.0;
    double step = 15.0;
    int folds = 5;
    uint64_t seed = 7;
    int jobs = 0;
    bool no_discomfort_stage = false;
    bool per_user_split = false;
    bool artifact_strict = false;
};

eml::PipelineConfig to_config(const SharedOpts& o) {
    eml::PipelineConfig cfg;
    cfg.window_size_s = o.window;
    cfg.step_size_s = o.step;
    cfg.k_folds = o.folds;
    cfg.rng_seed = o.seed;
    cfg.use_discomfort_stage = !o.no_discomfort_stage;
    cfg.per_user_eml_split = o.per_user_split;
    cfg.artifact_strict = o.artifact_strict;
    cfg.validate();
    return cfg;
}

eml::RawDataset load_raw(const std::string& dir) {
    eml::RawDataset raw;
    raw.sensors = eml::parse_sensor_file(dir + "/sensors.csv");
    raw.questionnaire = eml::parse_questionnaire_file(dir + "/questionnaire.csv");
    return raw;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    if (path.empty()) return;
    eml::csv::write_file(path, j.dump(2) + "\n");
}

int cmd_synth(const SharedOpts& shared, const std::string& out_dir, int users, int trials,
              double duration, double vol, double gyr_var, double hf_shift, double disc_rate) {
    eml::SynthConfig cfg;
    cfg.seed = shared.seed;
    cfg.n_users = users;
    cfg.n_trials_per_user = trials;
    cfg.trial_duration_s = duration;
    cfg.eml_motion_volatility = vol;
    cfg.discomfort_gyr_variance = gyr_var;
    cfg.hrv_hf_shift = hf_shift;
    cfg.discomfort_rate = disc_rate;
    const eml::SynthDataset ds = eml::generate(cfg);
    eml::write_dataset(ds, out_dir);
    size_t rows = 0;
    for (const auto& [_, streams] : ds.sensors.trials)
        for (const auto& [__, s] : streams) rows += s.size();
    std::printf("wrote %s: %d users, %zu sessions, %zu sensor rows, %zu questionnaire rows\n",
                out_dir.c_str(), cfg.n_users, ds.sensors.trials.size(), rows,
                ds.questionnaire.size());
    return 0;
}

int cmd_ingest(const std::string& dir, const std::string& json_path) {
    const eml::RawDataset raw = load_raw(dir);
    const eml::ValidationReport report = eml::validate_dataset(raw.sensors, raw.questionnaire);
    std::printf("sensors: %zu sessions; questionnaire: %zu rows\n", raw.sensors.trials.size(),
                raw.questionnaire.size());
    for (const auto& issue : report.issues)
        std::printf("issue: %s: %s\n", issue.key.str().c_str(), issue.what.c_str());
    std::printf("dataset %s\n", report.ok ? "OK" : "NOT USABLE");

    nlohmann::json j;
    j["schema_version"] = 1;
    j["kind"] = "ingest";
    j["ok"] = report.ok;
    j["issues"] = nlohmann::json::array();
    for (const auto& issue : report.issues)
        j["issues"].push_back({{"user_id", issue.key.user_id},
                               {"trial_index", issue.key.trial_index},
                               {"what", issue.what}});
    write_json(json_path, j);
    return report.ok ? 0 : 1;
}

int cmd_label(const SharedOpts& shared, const std::string& dir, const std::string& out_path,
              const std::string& json_path) {
    const eml::PipelineConfig cfg = to_config(shared);
    eml::RawDataset raw = load_raw(dir);
    auto qnr = raw.questionnaire;

    // Reliability and factor structure of the three reflective items.
    eml::Matrix items(qnr.size(), 3);
    for (size_t i = 0; i < qnr.size(); ++i) {
        items(i, 0) = qnr[i].feel_calm;
        items(i, 1) = qnr[i].feel_at_ease;
        items(i, 2) = 11 - qnr[i].feel_nervous;
    }
    const double alpha = eml::cronbach_alpha(items);
    const eml::FactorResult fr = eml::extract_factor(items);
    std::printf("Cronbach's alpha: %.3f\n", alpha);
    std::printf("factor eigenvalues:");
    for (double v : fr.eigenvalues) std::printf(" %.3f", v);
    std::printf("  (retained %d)\n", fr.retained);
    std::printf("loadings (calm, at_ease, inv_nervous):");
    for (size_t i = 0; i < 3; ++i) std::printf(" %.3f", fr.loadings(i, 0));
    std::printf("\n");

    const auto labels = eml::label_trials(qnr, cfg.per_user_eml_split);

    // ANCOVA of the factor score on the two manipulated perceptions with
    // discomfort as covariate. Raw 1..10 ratings leave factorial cells
    // empty at this sample size, so the report bins them into terciles.
    const auto tercile = [](int rating) {
        return rating <= 4 ? std::string("low") : rating <= 7 ? std::string("mid")
                                                              : std::string("high");
    };
    std::vector<double> y, cov;
    std::vector<std::string> fa, fb;
    for (const auto& rec : qnr) {
        y.push_back(*rec.eml_score);
        fa.push_back(tercile(rec.tech_diff));
        fb.push_back(tercile(rec.emo_expr));
        cov.push_back(rec.feel_uncomfortable);
    }
    nlohmann::json janova;
    try {
        const eml::AnovaTable tbl =
            eml::ancova(y, fa, fb, cov, {"tech_diff", "emo_expr", "feel_uncomfortable"});
        std::printf("%-22s %12s %6s %12s %8s %8s\n", "source", "type3_ss", "df", "mean_sq", "F",
                    "p");
        for (const auto& row : tbl.rows) {
            std::printf("%-22s %12.3f %6.0f %12.3f %8.3f %8.4f\n", row.source.c_str(),
                        row.type3_ss, row.df, row.mean_square, row.f, row.p);
            janova[row.source] = {{"ss", row.type3_ss}, {"df", row.df}, {"f", row.f}, {"p", row.p}};
        }
        std::printf("model R^2: %.3f\n", tbl.r_squared);
    } catch (const std::exception& e) {
        std::printf("ancova not estimable on this dataset: %s\n", e.what());
        janova = std::string(e.what());
    }

    std::ostringstream os;
    os << "user_id,trial_index,eml_score,eml_class,discomfort_class\n";
    for (const auto& rec : qnr) {
        const auto& l = labels.at(rec.key);
        os << rec.key.user_id << ',' << rec.key.trial_index << ','
           << eml::csv::format_double(l.eml_score) << ',' << eml::to_string(l.eml) << ','
           << eml::to_string(l.discomfort) << '\n';
    }
    eml::csv::write_file(out_path, os.str());
    std::printf("wrote %s (%zu trials)\n", out_path.c_str(), labels.size());

    nlohmann::json j;
    j["schema_version"] = 1;
    j["kind"] = "label";
    j["cronbach_alpha"] = alpha;
    j["eigenvalues"] = fr.eigenvalues;
    j["retained"] = fr.retained;
    j["ancova"] = janova;
    write_json(json_path, j);
    return 0;
}

int cmd_featurize(const SharedOpts& shared, const std::string& dir, const std::string& out_path,
                  const std::string& registry_path, const std::string& rr_path) {
    const eml::PipelineConfig cfg = to_config(shared);
    const eml::RawDataset raw = load_raw(dir);
    std::map<eml::TrialKey, eml::RRSeries> rr;
    if (!rr_path.empty()) rr = eml::parse_rr_file(rr_path);
    const eml::FeaturizeResult res =
        eml::featurize_all(raw.sensors, cfg, eml::Exec::parallel, rr.empty() ? nullptr : &rr);

    if (!registry_path.empty()) {
        eml::csv::write_file(registry_path, eml::registry_csv());
        std::printf("wrote %s (%zu features)\n", registry_path.c_str(), eml::feature_count());
    }

    std::ostringstream os;
    os << "user_id,trial_index,window_index,start_s,end_s";
    for (const auto& name : eml::feature_names()) os << ',' << name;
    os << '\n';
    for (const auto& fv : res.windows) {
        os << fv.window.key.user_id << ',' << fv.window.key.trial_index << ','
           << fv.window.window_index << ',' << eml::csv::format_double(fv.window.start_s) << ','
           << eml::csv::format_double(fv.window.end_s);
        for (double v : fv.values) {
            os << ',';
            if (!std::isnan(v)) os << eml::csv::format_double(v);
        }
        os << '\n';
    }
    eml::csv::write_file(out_path, os.str());
    std::printf("wrote %s (%zu windows x %zu features)\n", out_path.c_str(), res.windows.size(),
                eml::feature_count());
    for (const auto& a : res.artifacts)
        if (a.contaminated)
            std::printf("artifact: %s %s r=%.3f p=%.4f\n", a.key.str().c_str(),
                        eml::to_string(a.site).c_str(), a.pearson_r, a.p_value);
    return 0;
}

int cmd_train(const SharedOpts& shared, const std::string& dir, const std::string& model_path) {
    const eml::PipelineConfig cfg = to_config(shared);
    const eml::RawDataset raw = load_raw(dir);
    const eml::BuiltDataset ds = eml::build_dataset(raw, cfg);
    eml::PipelineModel model = eml::train_two_stage(ds.windows, cfg, cfg.rng_seed);
    model.baseline = ds.baseline;
    eml::csv::write_file(model_path, model.serialize());
    std::printf("trained on %zu windows; wrote %s\n", ds.windows.size(), model_path.c_str());
    return 0;
}

int cmd_eval(const SharedOpts& shared, const std::string& dir, const std::string& json_path) {
    const eml::PipelineConfig cfg = to_config(shared);
    const eml::RawDataset raw = load_raw(dir);
    const eml::BuiltDataset ds = eml::build_dataset(raw, cfg);
    const eml::CvReport report = eml::cross_validate(ds.windows, cfg, cfg.rng_seed);

    std::printf("%-6s %8s %8s %8s   confusion [tp fn fp tn]\n", "fold", "f1", "acc", "s1_acc");
    for (const auto& f : report.folds) {
        if (f.skipped) {
            std::printf("%-6d skipped: %s\n", f.fold, f.note.c_str());
            continue;
        }
        std::printf("%-6d %8.3f %8.3f %8.3f   [%ld %ld %ld %ld]\n", f.fold, f.f1, f.accuracy,
                    f.stage1_accuracy, f.confusion.tp, f.confusion.fn, f.confusion.fp,
                    f.confusion.tn);
    }
    std::printf("mean    %8.3f %8.3f %8.3f   (f1 sd %.3f, acc sd %.3f)\n", report.f1_mean,
                report.accuracy_mean, report.stage1_accuracy_mean, report.f1_sd,
                report.accuracy_sd);

    nlohmann::json j;
    j["schema_version"] = 1;
    j["kind"] = "eval";
    j["f1_mean"] = report.f1_mean;
    j["f1_sd"] = report.f1_sd;
    j["accuracy_mean"] = report.accuracy_mean;
    j["accuracy_sd"] = report.accuracy_sd;
    j["stage1_accuracy_mean"] = report.stage1_accuracy_mean;
    j["skipped_folds"] = report.skipped_folds;
    j["folds"] = nlohmann::json::array();
    for (const auto& f : report.folds) {
        j["folds"].push_back({{"fold", f.fold},
                              {"skipped", f.skipped},
                              {"f1", f.f1},
                              {"accuracy", f.accuracy},
                              {"stage1_accuracy", f.stage1_accuracy},
                              {"confusion", {f.confusion.tp, f.confusion.fn, f.confusion.fp,
                                             f.confusion.tn}}});
    }
    write_json(json_path, j);
    return 0;
}

int cmd_ablate(const SharedOpts& shared, const std::string& dir, const std::string& json_path,
               const std::vector<std::string>& algo_names) {
    const eml::PipelineConfig cfg = to_config(shared);
    const eml::RawDataset raw = load_raw(dir);
    const eml::BuiltDataset ds = eml::build_dataset(raw, cfg);

    std::vector<eml::ModelSpec> algos;
    for (const auto& name : algo_names) algos.push_back(eml::ModelSpec::make(name));
    const auto subsets = eml::default_ablation_subsets();
    const auto cells = eml::ablation(ds.windows, subsets, algos, cfg, cfg.rng_seed);

    std::printf("%-20s", "algorithm");
    for (const auto& s : subsets) std::printf(" %9s", eml::subset_name(s).c_str());
    std::printf("\n");
    for (const auto& algo : algos) {
        std::printf("%-20s", eml::to_string(algo.kind).c_str());
        for (const auto& s : subsets) {
            for (const auto& c : cells)
                if (c.algorithm == eml::to_string(algo.kind) && c.subset == eml::subset_name(s))
                    std::printf(" %9.3f", c.f1_mean);
        }
        std::printf("\n");
    }

    // One-sided bootstrap: does the first algorithm beat the others?
    std::vector<eml::SignificanceResult> sig;
    if (algos.size() >= 2) {
        sig = eml::compare_algorithms(ds.windows, algos, cfg, cfg.rng_seed);
        for (const auto& s : sig) std::printf("%s: p = %.4f\n", s.pair.c_str(), s.p_value);
    }

    nlohmann::json j;
    j["schema_version"] = 1;
    j["kind"] = "ablate";
    j["cells"] = nlohmann::json::array();
    for (const auto& c : cells)
        j["cells"].push_back({{"algorithm", c.algorithm},
                              {"subset", c.subset},
                              {"f1_mean", c.f1_mean},
                              {"accuracy_mean", c.accuracy_mean}});
    j["significance"] = nlohmann::json::array();
    for (const auto& s : sig)
        j["significance"].push_back({{"pair", s.pair}, {"p_value", s.p_value}});
    write_json(json_path, j);
    return 0;
}

int cmd_sweep(const SharedOpts& shared, const std::string& dir, const std::string& steps_arg,
              const std::string& json_path) {
    const eml::PipelineConfig cfg = to_config(shared);
    const eml::RawDataset raw = load_raw(dir);
    std::vector<double> steps;
    for (const auto& tok : eml::csv::split(steps_arg)) {
        const auto v = eml::csv::parse_double(tok);
        if (!v) throw std::invalid_argument("bad step value '" + tok + "'");
        steps.push_back(*v);
    }
    const auto rows = eml::sweep_step_size(raw, steps, cfg);
    std::printf("%8s %8s %8s\n", "step_s", "f1", "acc");
    for (const auto& r : rows) std::printf("%8.1f %8.3f %8.3f\n", r.step_s, r.f1_mean, r.accuracy_mean);

    nlohmann::json j;
    j["schema_version"] = 1;
    j["kind"] = "sweep";
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rows)
        j["rows"].push_back(
            {{"step_s", r.step_s}, {"f1_mean", r.f1_mean}, {"accuracy_mean", r.accuracy_mean}});
    write_json(json_path, j);
    return 0;
}

int cmd_stream(const std::string& model_path) {
    std::ifstream model_file(model_path);
    if (!model_file) throw std::runtime_error("cannot open model file: " + model_path);
    std::stringstream buf;
    buf << model_file.rdbuf();
    const eml::PipelineModel model = eml::PipelineModel::deserialize(buf.str());

    eml::StreamSession session(model);
    const auto print_emission = [](const eml::StreamEmission& e) {
        nlohmann::json j;
        j["t_s"] = e.t_s;
        if (e.gap) {
            j["event"] = "gap";
        } else {
            j["eml"] = eml::to_string(e.prediction.eml);
            j["p_eml"] = e.prediction.p_eml;
        }
        std::printf("%s\n", j.dump().c_str());
        std::fflush(stdout);
    };

    std::string line;
    size_t line_no = 0;
    while (std::getline(std::cin, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line.starts_with("user_id,")) continue;  // header
        for (const auto& e : session.push(eml::parse_sensor_row(line, line_no)))
            print_emission(e);
    }
    for (const auto& e : session.finish()) print_emission(e);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Near-real-time engagement classification from body-worn sensor streams"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "flat key=value config file; flags and EML_* env override it");
    app.allow_config_extras(CLI::config_extras_mode::error);

    SharedOpts shared;
    app.add_option("--window", shared.window, "window size in seconds")
        ->envname("EML_WINDOW")
        ->capture_default_str();
    app.add_option("--step", shared.step, "step size in seconds")
        ->envname("EML_STEP")
        ->capture_default_str();
    app.add_option("--folds", shared.folds, "cross-validation folds")
        ->envname("EML_FOLDS")
        ->capture_default_str();
    app.add_option("--seed", shared.seed, "seed for all randomness")
        ->envname("EML_SEED")
        ->capture_default_str();
    app.add_option("--jobs", shared.jobs, "worker threads (0 = library default)")
        ->envname("EML_JOBS")
        ->capture_default_str();
    app.add_flag("--no-discomfort-stage", shared.no_discomfort_stage,
                 "train the engagement stage without the predicted discomfort feature");
    app.add_flag("--per-user-split", shared.per_user_split,
                 "binarize engagement per user instead of globally");
    app.add_flag("--artifact-strict", shared.artifact_strict,
                 "drop GSR features of movement-contaminated trials");

    // synth
    auto* s_synth = app.add_subcommand("synth", "generate a synthetic dataset with ground truth");
    std::string synth_out;
    int synth_users = 9, synth_trials = 29;
    double synth_duration = 90.0, synth_vol = 1.5, synth_gyr = 3.0, synth_hf = 1.0,
           synth_disc = 0.12;
    s_synth->add_option("--out", synth_out, "output directory")->required();
    s_synth->add_option("--users", synth_users, "number of users")->capture_default_str();
    s_synth->add_option("--trials", synth_trials, "excerpt trials per user (1..29)")
        ->capture_default_str();
    s_synth->add_option("--duration", synth_duration, "trial duration in seconds")
        ->capture_default_str();
    s_synth->add_option("--eml-volatility", synth_vol, "motion volatility effect strength")
        ->capture_default_str();
    s_synth->add_option("--gyr-variance", synth_gyr, "discomfort gyroscope variance strength")
        ->capture_default_str();
    s_synth->add_option("--hf-shift", synth_hf, "HF heart-rate modulation strength")
        ->capture_default_str();
    s_synth->add_option("--discomfort-rate", synth_disc, "fraction of high-discomfort trials")
        ->capture_default_str();

    // ingest
    auto* s_ingest = app.add_subcommand("ingest", "parse and validate a dataset directory");
    std::string ingest_dir, ingest_json;
    s_ingest->add_option("--data", ingest_dir, "directory with sensors.csv + questionnaire.csv")
        ->required();
    s_ingest->add_option("--json", ingest_json, "write a JSON report here");

    // label
    auto* s_label = app.add_subcommand("label", "derive EML and discomfort labels per trial");
    std::string label_dir, label_out = "labels.csv", label_json;
    s_label->add_option("--data", label_dir, "dataset directory")->required();
    s_label->add_option("--out", label_out, "labels CSV path")->capture_default_str();
    s_label->add_option("--json", label_json, "write a JSON report here");

    // featurize
    auto* s_feat = app.add_subcommand("featurize", "extract per-window features");
    std::string feat_dir, feat_out = "features.csv", feat_registry, feat_rr;
    s_feat->add_option("--data", feat_dir, "dataset directory")->required();
    s_feat->add_option("--out", feat_out, "features CSV path")->capture_default_str();
    s_feat->add_option("--registry", feat_registry, "write the feature registry CSV here");
    s_feat->add_option("--rr", feat_rr, "pre-computed beat times CSV (user_id,trial_index,t_beat_ms)");

    // train
    auto* s_train = app.add_subcommand("train", "train the two-stage model on all data");
    std::string train_dir, train_model = "model.json";
    s_train->add_option("--data", train_dir, "dataset directory")->required();
    s_train->add_option("--model", train_model, "model output path")->capture_default_str();

    // eval
    auto* s_eval = app.add_subcommand("eval", "grouped k-fold cross-validation");
    std::string eval_dir, eval_json;
    s_eval->add_option("--data", eval_dir, "dataset directory")->required();
    s_eval->add_option("--json", eval_json, "write a JSON report here");

    // ablate
    auto* s_ablate = app.add_subcommand("ablate", "sensor-subset ablation across algorithms");
    std::string ablate_dir, ablate_json;
    std::vector<std::string> ablate_algos = {"gbt", "decision_tree", "logistic_regression",
                                             "max_margin"};
    s_ablate->add_option("--data", ablate_dir, "dataset directory")->required();
    s_ablate->add_option("--json", ablate_json, "write a JSON report here");
    s_ablate->add_option("--algorithms", ablate_algos, "stage-2 algorithms to compare")
        ->capture_default_str();

    // sweep
    auto* s_sweep = app.add_subcommand("sweep", "re-run the evaluation per step size");
    std::string sweep_dir, sweep_steps = "5,10,15,20,25,30", sweep_json;
    s_sweep->add_option("--data", sweep_dir, "dataset directory")->required();
    s_sweep->add_option("--steps", sweep_steps, "comma-separated step sizes in seconds")
        ->capture_default_str();
    s_sweep->add_option("--json", sweep_json, "write a JSON report here");

    // stream
    auto* s_stream = app.add_subcommand(
        "stream", "read sensors.csv rows from stdin, emit JSON predictions on stdout");
    std::string stream_model;
    s_stream->add_option("--model", stream_model, "trained pipeline model file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

#ifdef _OPENMP
    if (shared.jobs > 0) omp_set_num_threads(shared.jobs);
#endif

    try {
        if (s_synth->parsed())
            return cmd_synth(shared, synth_out, synth_users, synth_trials, synth_duration,
                             synth_vol, synth_gyr, synth_hf, synth_disc);
        if (s_ingest->parsed()) return cmd_ingest(ingest_dir, ingest_json);
        if (s_label->parsed()) return cmd_label(shared, label_dir, label_out, label_json);
        if (s_feat->parsed()) return cmd_featurize(shared, feat_dir, feat_out, feat_registry, feat_rr);
        if (s_train->parsed()) return cmd_train(shared, train_dir, train_model);
        if (s_eval->parsed()) return cmd_eval(shared, eval_dir, eval_json);
        if (s_ablate->parsed()) return cmd_ablate(shared, ablate_dir, ablate_json, ablate_algos);
        if (s_sweep->parsed()) return cmd_sweep(shared, sweep_dir, sweep_steps, sweep_json);
        if (s_stream->parsed()) return cmd_stream(stream_model);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
