#pragma once

// Shared test scaffolding: deterministic synthetic corpora shaped like the
// real inputs, plus independent reference implementations (oracles) that the
// engine's answers are checked against. Everything here is seeded and
// self-contained; nothing touches the network.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "clh/backend.hpp"
#include "clh/embedder.hpp"
#include "clh/jsonl.hpp"
#include "clh/metrics.hpp"
#include "clh/note.hpp"
#include "clh/ranking.hpp"
#include "clh/retriever.hpp"
#include "clh/taxonomy.hpp"
#include "clh/tokenize.hpp"

namespace fixtures {

// ---------------------------------------------------------------------------
// Deterministic sampling. Hand-rolled so fixture bytes do not depend on the
// standard library's distribution implementations.
// ---------------------------------------------------------------------------

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) {
    return n == 0 ? 0 : static_cast<std::size_t>(rng() % n);
}

inline std::size_t pick_between(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    if (hi <= lo) return lo;
    return lo + pick(rng, hi - lo + 1);
}

template <typename T>
inline void shuffle_vec(std::vector<T>& values, std::mt19937_64& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        std::swap(values[i - 1], values[pick(rng, i)]);
    }
}

// ---------------------------------------------------------------------------
// Word banks for synthetic descriptions and note text.
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& condition_words() {
    static const std::vector<std::string> words = {
        "fracture",   "sepsis",     "anemia",     "dermatitis", "nephritis",  "embolism",
        "stenosis",   "neuropathy", "cellulitis", "effusion",   "fibrosis",   "gastritis",
        "hematoma",   "ischemia",   "laceration", "myopathy",   "necrosis",   "occlusion",
        "pancreatitis", "pneumonia", "psoriasis",  "rupture",    "sprain",     "thrombosis",
        "ulcer",      "vasculitis", "arthritis",  "bronchitis", "colitis",    "cyst",
        "dislocation", "edema",     "abscess",    "hernia",     "insufficiency", "jaundice",
        "keratitis",  "lesion",     "migraine",   "obstruction"};
    return words;
}

inline const std::vector<std::string>& site_words() {
    static const std::vector<std::string> words = {
        "forearm", "femur",   "lung",     "kidney",  "liver",  "spleen",  "ankle",   "wrist",
        "shoulder", "pelvis", "sternum",  "clavicle", "retina", "cornea",  "tympanum", "aorta",
        "ventricle", "trachea", "esophagus", "duodenum", "colon", "bladder", "ureter", "scalp",
        "mandible", "tibia",  "humerus",  "patella", "spine",  "thorax"};
    return words;
}

inline const std::vector<std::string>& qualifier_words() {
    static const std::vector<std::string> words = {"acute",     "chronic",  "recurrent", "traumatic",
                                                   "bilateral", "subacute", "displaced", "localized"};
    return words;
}

// ---------------------------------------------------------------------------
// Synthetic world: a miniature taxonomy, alphabetical index, guideline set,
// and annotated note collection that hang together the way the real inputs
// do. Every note's gold codes sit in distinct chapters and every gold code
// carries an evidence span.
// ---------------------------------------------------------------------------

struct WorldSpec {
    std::size_t chapters = 6;               // chapter blocks to populate (>= 2)
    std::size_t categories_per_chapter = 7; // 3-character codes under each block
    std::size_t leaves_per_category = 6;    // dotted codes under each category
    std::size_t notes = 20;
    std::size_t min_gold = 1;
    std::size_t max_gold = 3; // capped at the chapter count
    std::uint64_t seed = 7;
    bool skip_one_guideline = false; // leave one populated chapter without a document
};

struct World {
    std::string tabular_jsonl;
    std::string alpha_jsonl;
    std::string guidelines_jsonl;
    std::string notes_jsonl;

    clh::Taxonomy taxonomy;
    std::vector<clh::IndexEntry> entries;
    clh::GuidelineSet guidelines;
    std::vector<clh::ClinicalNote> notes;

    std::vector<std::string> chapter_labels;                  // populated chapters
    std::map<std::string, std::vector<std::string>> leaf_pool; // chapter -> leaf codes
    std::map<std::string, std::string> descriptions;           // code -> description
};

namespace detail {

inline std::string jsonl_line(const clh::ojson& record) { return record.dump() + "\n"; }

inline std::string tabular_record(const std::string& code, const std::string& description,
                                  const std::string& parent,
                                  const clh::ojson& notes = clh::ojson::object()) {
    clh::ojson record = clh::ojson::object();
    record["code"] = code;
    record["description"] = description;
    record["parent"] = parent;
    if (!notes.empty()) record["notes"] = notes;
    return jsonl_line(record);
}

inline std::string alpha_record(const std::vector<std::string>& term_path, const std::string& code) {
    clh::ojson record = clh::ojson::object();
    record["term_path"] = term_path;
    record["code"] = code;
    return jsonl_line(record);
}

inline std::string guideline_record(const std::string& chapter, const std::string& text) {
    clh::ojson record = clh::ojson::object();
    record["chapter"] = chapter;
    record["text"] = text;
    return jsonl_line(record);
}

} // namespace detail

inline World make_world(WorldSpec spec = {}) {
    // Chapters 1 and 19 host the fixed reference subtrees, so they always
    // come first; the rest fill in by variety.
    static const std::size_t kChapterOrder[] = {0, 18, 8, 9,  10, 13, 3,  5,  11, 12, 1,
                                                2, 4,  6, 7,  14, 15, 16, 17, 19, 20, 21};
    const auto& table = clh::chapter_table();
    std::size_t n_chapters = std::clamp<std::size_t>(spec.chapters, 2, 22);

    World world;
    std::mt19937_64 rng(spec.seed);

    const auto& conditions = condition_words();
    const auto& sites = site_words();
    const auto& qualifiers = qualifier_words();

    std::string skipped_guideline_chapter;
    std::size_t leaf_counter = 0;
    for (std::size_t c = 0; c < n_chapters; ++c) {
        const clh::Chapter& chapter = table[kChapterOrder[c]];
        std::string label(chapter.label);
        world.chapter_labels.push_back(label);
        world.tabular_jsonl += detail::tabular_record(label, std::string(chapter.title), "");
        if (spec.skip_one_guideline && c == 1) {
            skipped_guideline_chapter = label;
        } else {
            world.guidelines_jsonl += detail::guideline_record(
                label, "Guidance for " + label + ": assign only the most specific documented code.");
        }

        char letter = chapter.start[0];
        int start_num = (chapter.start[1] - '0') * 10 + (chapter.start[2] - '0');
        for (std::size_t i = 0; i < spec.categories_per_chapter; ++i) {
            int num = start_num + static_cast<int>(i);
            char buf[4];
            std::snprintf(buf, sizeof(buf), "%02d", num);
            std::string category = std::string(1, letter) + buf;
            std::string cat_desc = "disorders of the " + sites[(c * 7 + i) % sites.size()];
            world.tabular_jsonl += detail::tabular_record(category, cat_desc, label);
            world.descriptions[category] = cat_desc;

            for (std::size_t j = 0; j < spec.leaves_per_category; ++j) {
                std::string leaf = category + "." + std::to_string(j + 1);
                const std::string& condition = conditions[leaf_counter % conditions.size()];
                const std::string& site = sites[(leaf_counter / conditions.size()) % sites.size()];
                const std::string& qualifier = qualifiers[leaf_counter % qualifiers.size()];
                std::string desc = qualifier + " " + condition + " of the " + site;
                world.tabular_jsonl += detail::tabular_record(leaf, desc, category);
                world.alpha_jsonl += detail::alpha_record({condition, qualifier + " " + site}, leaf);
                world.descriptions[leaf] = desc;
                world.leaf_pool[label].push_back(leaf);
                ++leaf_counter;
            }
        }
    }

    // Fixed reference subtrees: a sub-block with a category and two leaves in
    // the first chapter, and a three-deep code chain in the injury chapter.
    {
        clh::ojson includes = clh::ojson::object();
        includes["includes"] = std::vector<std::string>{"infection due to bacillus anthracis"};
        clh::ojson excludes = clh::ojson::object();
        excludes["excludes1"] = std::vector<std::string>{"sepsis due to other organisms"};
        clh::ojson use_additional = clh::ojson::object();
        use_additional["use_additional"] = std::vector<std::string>{"code to identify the complication"};
        clh::ojson code_first = clh::ojson::object();
        code_first["code_first"] = std::vector<std::string>{"the underlying infection"};

        const std::string infectious(table[0].label); // A00–B99
        const std::string injury(table[18].label);    // S00–T88
        std::string sub_block = std::string("A20") + "–" + "A28";
        world.tabular_jsonl += detail::tabular_record(sub_block, "certain zoonotic bacterial diseases",
                                                      infectious);
        world.tabular_jsonl += detail::tabular_record("A22", "anthrax", sub_block, includes);
        world.tabular_jsonl += detail::tabular_record("A22.0", "cutaneous anthrax", "A22");
        world.tabular_jsonl += detail::tabular_record("A22.7", "anthrax sepsis", "A22", excludes);
        world.tabular_jsonl += detail::tabular_record("T81", "complications of procedures", injury,
                                                      use_additional);
        world.tabular_jsonl += detail::tabular_record("T81.4", "infection following a procedure", "T81");
        world.tabular_jsonl += detail::tabular_record("T81.44", "sepsis following a procedure", "T81.4",
                                                      code_first);
        world.alpha_jsonl += detail::alpha_record({"anthrax", "cutaneous"}, "A22.0");
        world.alpha_jsonl += detail::alpha_record({"anthrax", "sepsis"}, "A22.7");
        world.alpha_jsonl += detail::alpha_record({"anthrax"}, "A22"); // deliberately non-leaf
        world.alpha_jsonl += detail::alpha_record({"sepsis", "postprocedural"}, "T81.44");
        world.alpha_jsonl += detail::alpha_record({"infection", "following a procedure"}, "T81.4");
        world.descriptions["A22"] = "anthrax";
        world.descriptions["A22.0"] = "cutaneous anthrax";
        world.descriptions["A22.7"] = "anthrax sepsis";
        world.descriptions["T81"] = "complications of procedures";
        world.descriptions["T81.4"] = "infection following a procedure";
        world.descriptions["T81.44"] = "sepsis following a procedure";
        world.leaf_pool[infectious].push_back("A22.0");
        world.leaf_pool[infectious].push_back("A22.7");
        world.leaf_pool[injury].push_back("T81.44");
    }

    // Notes: each gold code lives in its own chapter and is evidenced by the
    // sentence span that repeats its description.
    std::vector<clh::ClinicalNote> notes;
    for (std::size_t n = 0; n < spec.notes; ++n) {
        clh::ClinicalNote note;
        note.id = "note-" + std::to_string(n + 1);
        note.doc_type = n % 2 == 0 ? "discharge_summary" : "progress_note";
        std::size_t max_gold = std::min(spec.max_gold, world.chapter_labels.size());
        std::size_t gold_count = pick_between(rng, std::min(spec.min_gold, max_gold), max_gold);

        std::vector<std::string> chapters = world.chapter_labels;
        shuffle_vec(chapters, rng);
        note.text = "Encounter record " + note.id + ".";
        for (std::size_t g = 0; g < gold_count; ++g) {
            const auto& pool = world.leaf_pool[chapters[g]];
            const std::string& code = pool[pick(rng, pool.size())];
            const std::string& desc = world.descriptions.at(code);
            std::string prefix = " Patient presents with ";
            std::size_t begin = note.text.size() + prefix.size();
            note.text += prefix + desc + ".";
            note.gold_codes.push_back(code);
            note.gold_evidence.push_back({code, begin, begin + desc.size(), desc});
        }
        notes.push_back(std::move(note));
    }
    {
        std::ostringstream buf;
        clh::write_notes(buf, notes);
        world.notes_jsonl = buf.str();
    }

    // Parse everything back through the real loaders so the fixture also
    // exercises them and the in-memory objects match the serialized bytes.
    {
        std::istringstream in(world.tabular_jsonl);
        world.taxonomy = clh::Taxonomy::load_tabular(in, "world.tabular");
    }
    {
        std::istringstream in(world.alpha_jsonl);
        world.entries = clh::load_alpha_index(in, "world.alpha");
    }
    {
        std::istringstream in(world.guidelines_jsonl);
        world.guidelines = clh::GuidelineSet::load(in, "world.guidelines");
    }
    {
        std::istringstream in(world.notes_jsonl);
        world.notes = clh::load_notes(in, "world.notes");
    }
    return world;
}

/// Writes the world's four input files into a directory and returns their paths.
struct WorldFiles {
    std::string tabular;
    std::string alpha_index;
    std::string guidelines;
    std::string notes;
};

inline WorldFiles write_world_files(const World& world, const std::filesystem::path& dir) {
    WorldFiles files;
    files.tabular = (dir / "tabular.jsonl").string();
    files.alpha_index = (dir / "alpha_index.jsonl").string();
    files.guidelines = (dir / "guidelines.jsonl").string();
    files.notes = (dir / "notes.jsonl").string();
    clh::write_file(files.tabular, world.tabular_jsonl);
    clh::write_file(files.alpha_index, world.alpha_jsonl);
    clh::write_file(files.guidelines, world.guidelines_jsonl);
    clh::write_file(files.notes, world.notes_jsonl);
    return files;
}

// ---------------------------------------------------------------------------
// Independent oracles. These recompute the same quantities as the engine
// through different code paths and data layouts.
// ---------------------------------------------------------------------------

/// Naive BM25: term statistics recomputed by scanning the corpus per query
/// term, no inverted index. Duplicated query tokens count once per occurrence.
inline std::vector<clh::ScoredHit> oracle_bm25_top_k(const std::vector<std::string>& docs,
                                                     const std::string& query, std::size_t k,
                                                     clh::Bm25Params params = {}) {
    std::vector<std::vector<std::string>> tokens;
    tokens.reserve(docs.size());
    double total_len = 0.0;
    for (const auto& doc : docs) {
        tokens.push_back(clh::tokenize(doc));
        total_len += static_cast<double>(tokens.back().size());
    }
    double avg_len = docs.empty() ? 0.0 : total_len / static_cast<double>(docs.size());

    std::vector<double> scores(docs.size(), 0.0);
    for (const auto& term : clh::tokenize(query)) {
        double df = 0.0;
        for (const auto& doc_tokens : tokens) {
            if (std::find(doc_tokens.begin(), doc_tokens.end(), term) != doc_tokens.end()) df += 1.0;
        }
        if (df == 0.0) continue;
        double idf = std::log(1.0 + (static_cast<double>(docs.size()) - df + 0.5) / (df + 0.5));
        for (std::size_t d = 0; d < docs.size(); ++d) {
            double tf = static_cast<double>(std::count(tokens[d].begin(), tokens[d].end(), term));
            if (tf == 0.0) continue;
            double norm = 1.0 - params.b + params.b * static_cast<double>(tokens[d].size()) / avg_len;
            scores[d] += idf * ((tf * (params.k1 + 1.0)) / (tf + params.k1 * norm));
        }
    }
    std::vector<clh::ScoredHit> hits;
    for (std::uint32_t d = 0; d < docs.size(); ++d) {
        if (scores[d] > 0.0) hits.push_back({d, scores[d]});
    }
    clh::sort_ranking(hits);
    clh::truncate_ranking(hits, k);
    return hits;
}

/// Exhaustive cosine ranking mirroring the dense index's arithmetic exactly:
/// stored vectors are scaled in double then rounded to float, queries are
/// scaled by a float reciprocal, and dot products accumulate in double.
inline std::vector<clh::ScoredHit> oracle_cosine_top_k(const std::vector<std::vector<float>>& corpus,
                                                       const std::vector<float>& query, std::size_t k) {
    std::vector<float> qn(query);
    double qnorm2 = 0.0;
    for (float x : qn) qnorm2 += static_cast<double>(x) * static_cast<double>(x);
    if (qnorm2 > 0.0) {
        float inv = static_cast<float>(1.0 / std::sqrt(qnorm2));
        for (float& x : qn) x *= inv;
    }
    std::vector<clh::ScoredHit> hits;
    for (std::uint32_t id = 0; id < corpus.size(); ++id) {
        const auto& v = corpus[id];
        double norm2 = 0.0;
        for (float x : v) norm2 += static_cast<double>(x) * static_cast<double>(x);
        double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
        double dot = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            float stored = static_cast<float>(v[i] * inv);
            dot += static_cast<double>(qn[i]) * static_cast<double>(stored);
        }
        hits.push_back({id, dot});
    }
    clh::sort_ranking(hits);
    clh::truncate_ranking(hits, k);
    return hits;
}

/// Direct reciprocal-rank fusion over explicit (id, rank) walks.
inline std::vector<clh::ScoredHit> oracle_rrf(const std::vector<std::vector<clh::ScoredHit>>& rankings,
                                              double k_const, std::size_t depth) {
    std::map<std::uint32_t, double> scores;
    for (const auto& ranking : rankings) {
        for (std::size_t pos = 0; pos < ranking.size() && pos < depth; ++pos) {
            scores[ranking[pos].id] += 1.0 / (k_const + static_cast<double>(pos) + 1.0);
        }
    }
    std::vector<clh::ScoredHit> fused;
    for (const auto& [id, score] : scores) fused.push_back({id, score});
    clh::sort_ranking(fused);
    return fused;
}

/// Independent re-derivation of hard-negative mining: exhaustive
/// description-similarity rankings (mirroring the dense index's storage
/// arithmetic) fed through the same round-robin fill, all recomputed from
/// scratch without the engine's index structures.
inline std::vector<std::string> oracle_hard_negatives(const std::vector<std::string>& codes,
                                                      const std::vector<std::string>& descriptions,
                                                      const clh::Embedder& embedder,
                                                      const std::set<std::string>& gold, std::size_t k) {
    std::vector<std::vector<float>> stored;
    for (const auto& description : descriptions) {
        auto raw = embedder.embed(description);
        double norm2 = 0.0;
        for (float x : raw) norm2 += static_cast<double>(x) * static_cast<double>(x);
        double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
        std::vector<float> unit;
        unit.reserve(raw.size());
        for (float x : raw) unit.push_back(static_cast<float>(x * inv));
        stored.push_back(std::move(unit));
    }
    std::map<std::string, std::uint32_t> position;
    for (std::uint32_t id = 0; id < codes.size(); ++id) position[codes[id]] = id;
    std::set<std::uint32_t> gold_ids;
    for (const auto& code : gold) gold_ids.insert(position.at(code));

    std::vector<std::vector<std::uint32_t>> neighbours;
    for (std::uint32_t gid : gold_ids) {
        std::vector<float> qn = stored[gid];
        double norm2 = 0.0;
        for (float x : qn) norm2 += static_cast<double>(x) * static_cast<double>(x);
        if (norm2 > 0.0) {
            float inv = static_cast<float>(1.0 / std::sqrt(norm2));
            for (float& x : qn) x *= inv;
        }
        std::vector<clh::ScoredHit> hits;
        for (std::uint32_t id = 0; id < stored.size(); ++id) {
            double dot = 0.0;
            for (std::size_t i = 0; i < qn.size(); ++i) {
                dot += static_cast<double>(qn[i]) * static_cast<double>(stored[id][i]);
            }
            hits.push_back({id, dot});
        }
        clh::sort_ranking(hits);
        std::vector<std::uint32_t> list;
        for (const auto& hit : hits) {
            if (!gold_ids.count(hit.id)) list.push_back(hit.id);
        }
        neighbours.push_back(std::move(list));
    }

    std::size_t target = k * gold.size();
    std::set<std::string> pool;
    std::size_t max_rank = codes.size() > gold_ids.size() ? codes.size() - gold_ids.size() : 0;
    for (std::size_t rank = 0; rank < max_rank && pool.size() < target; ++rank) {
        for (const auto& list : neighbours) {
            if (rank >= list.size()) continue;
            pool.insert(codes[list[rank]]);
            if (pool.size() >= target) break;
        }
    }
    return {pool.begin(), pool.end()};
}

struct OracleScores {
    double precision = 0.0;
    double recall = 0.0;
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double emr = 0.0;
    std::size_t n_labels = 0;
};

/// Confusion-matrix scoring built note-by-note with set algebra, then
/// label-by-label with separate tallies. Shares no code with the engine's
/// per-label accumulation.
inline OracleScores oracle_scores(const std::vector<clh::NotePrediction>& preds) {
    OracleScores out;
    double tp = 0.0, fp = 0.0, fn = 0.0;
    std::size_t exact = 0;
    std::set<std::string> labels;
    for (const auto& p : preds) {
        if (p.gold == p.predicted) ++exact;
        for (const auto& code : p.predicted) {
            labels.insert(code);
            if (p.gold.count(code)) tp += 1.0;
            else fp += 1.0;
        }
        for (const auto& code : p.gold) {
            labels.insert(code);
            if (!p.predicted.count(code)) fn += 1.0;
        }
    }
    out.emr = static_cast<double>(exact) / static_cast<double>(preds.size());
    out.n_labels = labels.size();
    if (tp + fp + fn == 0.0) {
        out.precision = out.recall = out.micro_f1 = out.macro_f1 = 1.0;
        return out;
    }
    out.precision = tp + fp == 0.0 ? 0.0 : tp / (tp + fp);
    out.recall = tp + fn == 0.0 ? 0.0 : tp / (tp + fn);
    out.micro_f1 = (2.0 * tp + fp + fn) == 0.0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);

    double f1_sum = 0.0;
    for (const auto& label : labels) {
        double ltp = 0.0, lfp = 0.0, lfn = 0.0;
        for (const auto& p : preds) {
            bool in_gold = p.gold.count(label) > 0;
            bool in_pred = p.predicted.count(label) > 0;
            if (in_gold && in_pred) ltp += 1.0;
            if (!in_gold && in_pred) lfp += 1.0;
            if (in_gold && !in_pred) lfn += 1.0;
        }
        double denom = 2.0 * ltp + lfp + lfn;
        f1_sum += denom == 0.0 ? 0.0 : 2.0 * ltp / denom;
    }
    out.macro_f1 = f1_sum / static_cast<double>(labels.size());
    return out;
}

// ---------------------------------------------------------------------------
// Backends for tests.
// ---------------------------------------------------------------------------

/// Forwards to an inner backend while writing every (stage, prompt, reply)
/// into a scripted table, so a live run can later be replayed verbatim.
class RecordingBackend final : public clh::Backend {
public:
    RecordingBackend(clh::Backend& inner, clh::ScriptedBackend& table) : inner_(inner), table_(table) {}

    clh::BackendResponse complete(const clh::BackendRequest& request) override {
        auto reply = inner_.complete(request);
        std::lock_guard<std::mutex> lock(mutex_);
        table_.add_reply(request.stage, request.prompt, reply.text);
        return reply;
    }

    std::string name() const override { return "recording"; }

private:
    clh::Backend& inner_;
    clh::ScriptedBackend& table_;
    std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Process helpers for driving the installed CLI binary.
// ---------------------------------------------------------------------------

inline std::string cli_path() {
    const char* path = std::getenv("CLH_CLI");
    return path ? path : "./clh";
}

inline std::string data_dir() {
    const char* path = std::getenv("CLH_DATA");
    return path ? path : "data";
}

struct CliResult {
    int exit_code = -1;
    std::string output;
};

inline CliResult run_cli(const std::string& args) {
    CliResult result;
    std::string command = cli_path() + " " + args + " 2>&1";
    FILE* pipe = popen(command.c_str(), "r");
    if (!pipe) return result;
    char buffer[4096];
    while (std::size_t n = std::fread(buffer, 1, sizeof(buffer), pipe)) {
        result.output.append(buffer, n);
        if (n < sizeof(buffer)) {
            if (std::feof(pipe)) break;
        }
    }
    int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

inline std::filesystem::path make_temp_dir(const std::string& tag) {
    std::string templ = (std::filesystem::temp_directory_path() / ("clh_" + tag + "_XXXXXX")).string();
    if (!mkdtemp(templ.data())) throw std::runtime_error("mkdtemp failed for " + templ);
    return std::filesystem::path(templ);
}

} // namespace fixtures
