// clh: command-line front end for the coding engine.
//
// Subcommands: ingest, index build, index query, run, eval,
// experiment {candidate-scaling, context-ablation, decoding}, report.
// Configuration precedence: command-line flags > config file > defaults;
// environment variables carry credentials only.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "clh/config.hpp"
#include "clh/engine.hpp"
#include "clh/error.hpp"
#include "clh/experiments.hpp"
#include "clh/manifest.hpp"
#include "clh/metrics.hpp"
#include "clh/run_io.hpp"
#include "clh/version.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string tabular, alpha_index, guidelines, notes, prompts_dir;
    std::string backend_kind, scripted_path, base_url, model;
    std::string decoding, context, retrieval_mode;
    std::size_t k = 0;
    std::size_t ef_search = 0;
    std::size_t passes = 0;
    std::size_t max_in_flight = 0;
    std::size_t notes_in_flight = 0;
    bool use_gold_evidence = false;
    std::vector<std::size_t> k_values;

    CLI::Option* config_opt = nullptr;
    CLI::Option* tabular_opt = nullptr;
    CLI::Option* alpha_opt = nullptr;
    CLI::Option* guidelines_opt = nullptr;
    CLI::Option* notes_opt = nullptr;
    CLI::Option* prompts_opt = nullptr;
    CLI::Option* backend_opt = nullptr;
    CLI::Option* scripted_opt = nullptr;
    CLI::Option* base_url_opt = nullptr;
    CLI::Option* model_opt = nullptr;
    CLI::Option* decoding_opt = nullptr;
    CLI::Option* context_opt = nullptr;
    CLI::Option* retrieval_mode_opt = nullptr;
    CLI::Option* k_opt = nullptr;
    CLI::Option* ef_opt = nullptr;
    CLI::Option* passes_opt = nullptr;
    CLI::Option* max_in_flight_opt = nullptr;
    CLI::Option* notes_in_flight_opt = nullptr;
    CLI::Option* gold_evidence_opt = nullptr;
    CLI::Option* k_values_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    opts.config_opt = cmd->add_option("--config", opts.config_path, "JSON config file");
    opts.tabular_opt = cmd->add_option("--tabular", opts.tabular, "tabular hierarchy JSONL");
    opts.alpha_opt = cmd->add_option("--alpha-index", opts.alpha_index, "alphabetical index JSONL");
    opts.guidelines_opt = cmd->add_option("--guidelines", opts.guidelines, "chapter guidelines JSONL");
    opts.notes_opt = cmd->add_option("--notes", opts.notes, "clinical notes JSONL");
    opts.prompts_opt = cmd->add_option("--prompts-dir", opts.prompts_dir, "prompt template overrides");
    opts.backend_opt =
        cmd->add_option("--backend", opts.backend_kind, "backend kind: scripted, oracle, http");
    opts.scripted_opt = cmd->add_option("--scripted", opts.scripted_path, "scripted replies JSON");
    opts.base_url_opt = cmd->add_option("--base-url", opts.base_url, "http backend base url");
    opts.model_opt = cmd->add_option("--model", opts.model, "http backend model name");
    opts.decoding_opt = cmd->add_option("--decoding", opts.decoding, "thinking or constrained");
    opts.context_opt = cmd->add_option("--context", opts.context, "candidate context level");
    opts.retrieval_mode_opt =
        cmd->add_option("--retrieval-mode", opts.retrieval_mode, "hybrid, bm25, or dense");
    opts.k_opt = cmd->add_option("--k", opts.k, "terms per snippet handed to the navigator");
    opts.ef_opt = cmd->add_option("--ef-search", opts.ef_search, "dense search budget");
    opts.passes_opt = cmd->add_option("--passes", opts.passes, "pipeline pass count");
    opts.max_in_flight_opt =
        cmd->add_option("--max-in-flight", opts.max_in_flight, "fan-out cap within a stage");
    opts.notes_in_flight_opt =
        cmd->add_option("--notes-in-flight", opts.notes_in_flight, "notes processed concurrently");
    opts.gold_evidence_opt = cmd->add_flag("--use-gold-evidence", opts.use_gold_evidence,
                                           "use annotated evidence spans as stage-1 output");
    opts.k_values_opt = cmd->add_option("--K", opts.k_values, "negatives-per-positive sweep values");
}

clh::EngineConfig resolve_config(const CommonOpts& opts) {
    clh::EngineConfig config;
    if (opts.config_opt->count()) config = clh::load_config_file(opts.config_path, std::move(config));
    auto set = [](CLI::Option* opt, auto& target, const auto& value) {
        if (opt && opt->count()) target = value;
    };
    set(opts.tabular_opt, config.data.tabular, opts.tabular);
    set(opts.alpha_opt, config.data.alpha_index, opts.alpha_index);
    set(opts.guidelines_opt, config.data.guidelines, opts.guidelines);
    set(opts.notes_opt, config.data.notes, opts.notes);
    set(opts.prompts_opt, config.data.prompts_dir, opts.prompts_dir);
    set(opts.backend_opt, config.backend.kind, opts.backend_kind);
    set(opts.scripted_opt, config.backend.scripted_path, opts.scripted_path);
    set(opts.base_url_opt, config.backend.base_url, opts.base_url);
    set(opts.model_opt, config.backend.model, opts.model);
    set(opts.decoding_opt, config.pipeline.decoding, opts.decoding);
    set(opts.context_opt, config.pipeline.context, opts.context);
    set(opts.retrieval_mode_opt, config.retrieval.mode, opts.retrieval_mode);
    set(opts.k_opt, config.retrieval.k, opts.k);
    set(opts.ef_opt, config.retrieval.ef_search, opts.ef_search);
    set(opts.passes_opt, config.pipeline.pass_count, opts.passes);
    set(opts.max_in_flight_opt, config.pipeline.max_in_flight, opts.max_in_flight);
    set(opts.notes_in_flight_opt, config.pipeline.notes_in_flight, opts.notes_in_flight);
    if (opts.gold_evidence_opt && opts.gold_evidence_opt->count()) {
        config.pipeline.use_gold_evidence = true;
    }
    set(opts.k_values_opt, config.experiment.k_values, opts.k_values);
    // re-validate after overrides
    return clh::apply_config_json(std::move(config), clh::json::object());
}

void write_text_file(const std::string& path, const std::string& content) {
    clh::write_file(path, content);
}

void write_manifest_beside(const std::string& artifact_path, const clh::RunManifest& manifest) {
    write_text_file(artifact_path + ".manifest.json", manifest.to_json().dump(2) + "\n");
}

int cmd_ingest(const CommonOpts& opts) {
    clh::EngineConfig config = resolve_config(opts);
    bool failed = false;
    auto try_parse = [&](const std::string& label, const std::string& path, auto parse) {
        if (path.empty()) {
            std::cout << label << ": not configured\n";
            return;
        }
        if (!std::filesystem::exists(path)) {
            if (label == "guidelines") {
                std::cout << label << ": warning: file missing (optional)\n";
            } else {
                std::cout << label << ": error: file missing: " << path << "\n";
                failed = true;
            }
            return;
        }
        try {
            std::ifstream in(path, std::ios::binary);
            std::size_t count = parse(in, path);
            std::cout << label << ": " << count << " records\n";
        } catch (const clh::Error& err) {
            std::cout << label << ": error: " << err.what() << "\n";
            failed = true;
        }
    };
    try_parse("tabular", config.data.tabular, [](std::istream& in, const std::string& src) {
        auto taxonomy = clh::Taxonomy::load_tabular(in, src);
        std::size_t leaves = 0;
        for (const auto& node : taxonomy.nodes()) {
            if (!node.is_block && node.is_leaf()) ++leaves;
        }
        std::cout << "tabular: " << leaves << " leaf codes\n";
        return taxonomy.size();
    });
    try_parse("alpha_index", config.data.alpha_index, [](std::istream& in, const std::string& src) {
        return clh::load_alpha_index(in, src).size();
    });
    try_parse("guidelines", config.data.guidelines, [](std::istream& in, const std::string& src) {
        return clh::GuidelineSet::load(in, src).size();
    });
    try_parse("notes", config.data.notes, [](std::istream& in, const std::string& src) {
        return clh::load_notes(in, src).size();
    });
    return failed ? 1 : 0;
}

int cmd_index_build(const CommonOpts& opts, const std::string& out_path) {
    clh::EngineConfig config = resolve_config(opts);
    clh::EngineAssets assets = clh::load_assets(config);
    std::ostringstream buf;
    assets.retriever->save(buf);
    write_text_file(out_path, buf.str());
    write_manifest_beside(out_path, clh::make_manifest(config));
    std::cout << "indexed " << assets.retriever->size() << " terms -> " << out_path << "\n";
    return 0;
}

int cmd_index_query(const CommonOpts& opts, const std::string& index_path, const std::string& query,
                    std::size_t top_k) {
    clh::EngineConfig config = resolve_config(opts);
    std::unique_ptr<clh::Embedder> embedder = std::make_unique<clh::HashEmbedder>(
        config.retrieval.embedder_dim, config.retrieval.embedder_seed);
    std::unique_ptr<clh::TermRetriever> retriever;
    if (!index_path.empty()) {
        std::ifstream in(index_path, std::ios::binary);
        if (!in) throw clh::Error(clh::ErrorCode::IoError, "cannot open " + index_path);
        retriever = std::make_unique<clh::TermRetriever>(clh::TermRetriever::load(in, *embedder));
    } else {
        clh::EngineAssets assets = clh::load_assets(config);
        embedder = std::move(assets.embedder);
        retriever = std::move(assets.retriever);
    }
    auto hits = retriever->retrieve(query, top_k);
    for (std::size_t i = 0; i < hits.size(); ++i) {
        std::cout << (i + 1) << ". " << clh::ojson(hits[i].score).dump() << "  " << hits[i].code.text
                  << "  " << hits[i].display << "\n";
    }
    if (hits.empty()) std::cout << "(no hits)\n";
    return 0;
}

int cmd_run(const CommonOpts& opts, const std::string& out_path, bool include_timings) {
    clh::EngineConfig config = resolve_config(opts);
    clh::EngineAssets assets = clh::load_assets(config);
    if (assets.notes.empty()) {
        throw clh::Error(clh::ErrorCode::EmptyInput, "run needs notes; set data.notes");
    }
    auto backend = clh::make_backend(config, assets.notes);
    clh::Pipeline pipeline(assets.context(*backend), config.pipeline_config());
    auto runs = pipeline.run_batch(assets.notes, config.pipeline.notes_in_flight);

    clh::RunManifest manifest = clh::make_manifest(config);
    std::ostringstream buf;
    clh::write_runs(buf, runs, include_timings, manifest.hash());
    write_text_file(out_path, buf.str());
    write_manifest_beside(out_path, manifest);

    std::size_t errors = 0;
    std::uint64_t calls = 0;
    for (const auto& run : runs) {
        errors += run.stage_errors.size();
        for (const auto& [_, n] : run.backend_calls) calls += n;
    }
    std::cout << "ran " << runs.size() << " notes, " << calls << " backend calls, " << errors
              << " stage errors -> " << out_path << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& runs_path, const std::string& report_path,
             const std::string& labels_path, std::size_t chapter_k, bool recondition_gold) {
    clh::EngineConfig config = resolve_config(opts);
    clh::EngineAssets assets = clh::load_assets(config);
    std::ifstream in(runs_path, std::ios::binary);
    if (!in) throw clh::Error(clh::ErrorCode::IoError, "cannot open " + runs_path);
    auto runs = clh::read_runs(in, runs_path);
    if (runs.empty()) throw clh::Error(clh::ErrorCode::EmptyInput, runs_path + " holds no runs");

    std::unordered_map<std::string, const clh::ClinicalNote*> by_id;
    for (const auto& note : assets.notes) by_id[note.id] = &note;
    std::vector<clh::NotePrediction> preds;
    for (const auto& run : runs) {
        auto it = by_id.find(run.note_id);
        if (it == by_id.end()) {
            throw clh::Error(clh::ErrorCode::EmptyGold, "no note for run '" + run.note_id + "'");
        }
        preds.push_back({run.note_id,
                         {it->second->gold_codes.begin(), it->second->gold_codes.end()},
                         {run.final_codes.begin(), run.final_codes.end()}});
    }
    clh::EvalReport overall = clh::micro_macro(preds);
    auto stages = clh::stage_eval(runs, assets.notes, recondition_gold);
    auto chapters = clh::chapter_recall(runs, assets.notes, *assets.retriever, chapter_k);

    clh::RunManifest manifest = clh::make_manifest(config);
    clh::ojson report = clh::ojson::object();
    report["schema"] = "clh.report/1";
    report["manifest_hash"] = manifest.hash();
    report["overall"] = clh::report_to_json(overall);
    clh::ojson stage_obj = clh::ojson::object();
    for (std::size_t s = 0; s < stages.size(); ++s) {
        stage_obj[clh::kStageEvalNames[s]] = clh::report_to_json(stages[s], false);
    }
    report["stages"] = std::move(stage_obj);
    clh::ojson chapter_obj = clh::ojson::object();
    chapter_obj["k"] = chapter_k;
    chapter_obj["skipped_no_evidence"] = chapters.skipped_no_evidence;
    clh::ojson rows = clh::ojson::array();
    for (const auto& row : chapters.rows) {
        clh::ojson item = clh::ojson::object();
        item["chapter"] = row.chapter;
        item["agent_recall"] = row.agent_recall;
        item["evidence_recall"] = row.evidence_recall;
        item["n_gold"] = row.n_gold;
        rows.push_back(std::move(item));
    }
    chapter_obj["rows"] = std::move(rows);
    report["chapter_recall"] = std::move(chapter_obj);
    write_text_file(report_path, report.dump(2) + "\n");
    write_manifest_beside(report_path, manifest);

    std::ostringstream csv;
    clh::write_per_label_csv(csv, overall);
    write_text_file(labels_path, csv.str());

    std::cout << "micro_f1=" << overall.micro_f1 << " macro_f1=" << overall.macro_f1
              << " emr=" << overall.emr << " over " << overall.n_notes << " notes -> " << report_path
              << "\n";
    return 0;
}

int run_experiment(const CommonOpts& opts, const std::string& which, const std::string& curves_path,
                   const std::string& arms_path) {
    clh::EngineConfig config = resolve_config(opts);
    clh::EngineAssets assets = clh::load_assets(config);
    if (assets.notes.empty()) {
        throw clh::Error(clh::ErrorCode::EmptyInput, "experiments need notes; set data.notes");
    }
    auto backend = clh::make_backend(config, assets.notes);
    clh::EngineContext context = assets.context(*backend);
    clh::CandidateMiner miner = clh::CandidateMiner::build(assets.taxonomy, *assets.embedder);

    clh::ExperimentResult result;
    if (which == "candidate-scaling") {
        result = clh::candidate_scaling_run(context, miner, assets.notes, config.experiment.k_values,
                                            config.pipeline_config());
    } else if (which == "context-ablation") {
        std::vector<clh::ContextLevel> levels;
        for (const auto& name : config.experiment.contexts) levels.push_back(clh::parse_context_level(name));
        result = clh::context_ablation_run(context, miner, assets.notes, levels,
                                           config.experiment.k_values, config.pipeline_config());
    } else {
        result = clh::decoding_mode_run(context, miner, assets.notes, config.experiment.k_values,
                                        config.pipeline_config());
    }

    clh::RunManifest manifest = clh::make_manifest(config);
    std::ostringstream csv;
    csv << "# manifest_hash=" << manifest.hash() << "\n";
    clh::write_curves(csv, result.rows);
    write_text_file(curves_path, csv.str());
    result.arms["manifest_hash"] = manifest.hash();
    write_text_file(arms_path, result.arms.dump(2) + "\n");
    write_manifest_beside(curves_path, manifest);

    std::cout << which << ": " << result.rows.size() << " curve rows -> " << curves_path << "\n";
    return 0;
}

int cmd_report(const CommonOpts& opts, const std::string& runs_path) {
    clh::EngineConfig config = resolve_config(opts);
    std::ifstream notes_in(config.data.notes, std::ios::binary);
    if (!notes_in) throw clh::Error(clh::ErrorCode::IoError, "cannot open " + config.data.notes);
    auto notes = clh::load_notes(notes_in, config.data.notes);
    std::ifstream in(runs_path, std::ios::binary);
    if (!in) throw clh::Error(clh::ErrorCode::IoError, "cannot open " + runs_path);
    auto runs = clh::read_runs(in, runs_path);
    if (runs.empty()) throw clh::Error(clh::ErrorCode::EmptyInput, runs_path + " holds no runs");

    auto stages = clh::stage_eval(runs, notes);
    std::cout << "stage        recall  precision  micro_f1\n";
    for (std::size_t s = 0; s < stages.size(); ++s) {
        std::cout << clh::kStageEvalNames[s];
        for (std::size_t pad = std::string(clh::kStageEvalNames[s]).size(); pad < 13; ++pad)
            std::cout << ' ';
        std::cout << clh::ojson(stages[s].recall).dump() << "  " << clh::ojson(stages[s].precision).dump()
                  << "  " << clh::ojson(stages[s].micro_f1).dump() << "\n";
    }
    std::size_t errors = 0, warnings = 0;
    for (const auto& run : runs) {
        errors += run.stage_errors.size();
        warnings += run.warnings.size();
    }
    std::cout << runs.size() << " runs, " << errors << " stage errors, " << warnings << " warnings\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"agentic medical-coding engine"};
    app.set_version_flag("--version", clh::kEngineVersion);
    app.require_subcommand(1);

    CommonOpts ingest_opts;
    CLI::App* ingest = app.add_subcommand("ingest", "validate the data fixtures");
    add_common(ingest, ingest_opts);

    CLI::App* index = app.add_subcommand("index", "build or query the term index");
    index->require_subcommand(1);
    CommonOpts index_build_opts;
    std::string index_out = "index.json";
    CLI::App* index_build = index->add_subcommand("build", "build and save the term index");
    add_common(index_build, index_build_opts);
    index_build->add_option("--out", index_out, "snapshot output path");
    CommonOpts index_query_opts;
    std::string index_path, query_text;
    std::size_t query_k = 10;
    CLI::App* index_query = index->add_subcommand("query", "query the term index");
    add_common(index_query, index_query_opts);
    index_query->add_option("--index", index_path, "snapshot to load (else built from config)");
    index_query->add_option("--q", query_text, "query text")->required();
    index_query->add_option("--top", query_k, "hits to print");

    CommonOpts run_opts;
    std::string runs_out = "runs.jsonl";
    bool include_timings = false;
    CLI::App* run = app.add_subcommand("run", "run the four-stage pipeline over notes");
    add_common(run, run_opts);
    run->add_option("--out", runs_out, "runs output path");
    run->add_flag("--include-timings", include_timings, "serialize wall-clock stage timings");

    CommonOpts eval_opts;
    std::string eval_runs = "runs.jsonl", report_out = "report.json", labels_out = "per_label.csv";
    std::size_t chapter_k = 25;
    bool recondition = false;
    CLI::App* eval = app.add_subcommand("eval", "score runs against gold");
    add_common(eval, eval_opts);
    eval->add_option("--runs", eval_runs, "runs.jsonl to score");
    eval->add_option("--report", report_out, "report output path");
    eval->add_option("--labels-out", labels_out, "per-label CSV output path");
    eval->add_option("--chapter-k", chapter_k, "retrieval depth for chapter recall");
    eval->add_flag("--recondition-gold", recondition,
                   "score each stage only on gold the previous stage kept");

    CLI::App* experiment = app.add_subcommand("experiment", "controlled studies");
    experiment->require_subcommand(1);
    std::string curves_out = "curves.csv", arms_out = "arms.json";
    std::vector<std::pair<CLI::App*, CommonOpts>> experiment_subs;
    experiment_subs.reserve(3);
    for (const char* name : {"candidate-scaling", "context-ablation", "decoding"}) {
        CLI::App* sub = experiment->add_subcommand(name);
        experiment_subs.emplace_back(sub, CommonOpts{});
        add_common(sub, experiment_subs.back().second);
        sub->add_option("--curves-out", curves_out, "curves CSV output path");
        sub->add_option("--arms-out", arms_out, "arms manifest output path");
    }

    CommonOpts report_opts;
    std::string report_runs = "runs.jsonl";
    CLI::App* report = app.add_subcommand("report", "print a stage summary for a runs file");
    add_common(report, report_opts);
    report->add_option("--runs", report_runs, "runs.jsonl to summarize");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) return cmd_ingest(ingest_opts);
        if (*index_build) return cmd_index_build(index_build_opts, index_out);
        if (*index_query) return cmd_index_query(index_query_opts, index_path, query_text, query_k);
        if (*run) return cmd_run(run_opts, runs_out, include_timings);
        if (*eval) return cmd_eval(eval_opts, eval_runs, report_out, labels_out, chapter_k, recondition);
        for (auto& [sub, sub_opts] : experiment_subs) {
            if (*sub) return run_experiment(sub_opts, sub->get_name(), curves_out, arms_out);
        }
        if (*report) return cmd_report(report_opts, report_runs);
    } catch (const clh::Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
