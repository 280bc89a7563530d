#pragma once

#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "clh/embedder.hpp"
#include "clh/error.hpp"
#include "clh/hnsw.hpp"
#include "clh/jsonl.hpp"
#include "clh/metrics.hpp"
#include "clh/note.hpp"
#include "clh/pipeline.hpp"
#include "clh/taxonomy.hpp"

namespace clh {

/// Gold positives plus mined hard negatives. The target negative count is
/// K per positive; shortfall records that the corpus ran out first.
struct CandidateSet {
    std::vector<std::string> positives; // ascending
    std::vector<std::string> negatives; // ascending
    std::size_t k = 0;
    bool shortfall = false;

    std::vector<std::string> combined() const {
        std::vector<std::string> all;
        all.reserve(positives.size() + negatives.size());
        std::merge(positives.begin(), positives.end(), negatives.begin(), negatives.end(),
                   std::back_inserter(all));
        return all;
    }
};

/// Nearest-neighbour mining over the code-description corpus: every
/// assignable code, ascending, embedded by its description. Neighbour
/// ranks tie-break by ascending code text because ids follow code order.
class CandidateMiner {
public:
    static CandidateMiner build(const Taxonomy& taxonomy, const Embedder& embedder) {
        CandidateMiner miner;
        miner.codes_ = taxonomy.assignable_codes();
        if (miner.codes_.empty()) throw Error(ErrorCode::EmptyIndex, "no assignable codes to mine");
        std::vector<std::string> descriptions;
        descriptions.reserve(miner.codes_.size());
        for (std::uint32_t id = 0; id < miner.codes_.size(); ++id) {
            miner.position_[miner.codes_[id]] = id;
            descriptions.push_back(taxonomy.description_of(miner.codes_[id]));
        }
        miner.index_ = DenseIndex::build(embedder.embed_all(descriptions));
        return miner;
    }

    const std::vector<std::string>& codes() const { return codes_; }
    const DenseIndex& index() const { return index_; }

    /// For each positive, its K nearest non-gold codes by description
    /// similarity; collisions across positives are topped up from the next
    /// nearest ranks, round-robin in ascending positive order, until the
    /// pool holds K negatives per positive or the corpus is exhausted.
    CandidateSet build_candidate_set(const std::set<std::string>& gold, std::size_t k) const {
        if (gold.empty()) throw Error(ErrorCode::EmptyGold, "candidate mining needs gold codes");
        std::set<std::uint32_t> gold_ids;
        for (const auto& code : gold) {
            auto it = position_.find(code);
            if (it == position_.end()) {
                throw Error(ErrorCode::UnknownCode, "gold code '" + code + "' not in the mining corpus");
            }
            gold_ids.insert(it->second);
        }

        CandidateSet result;
        result.k = k;
        result.positives.assign(gold.begin(), gold.end());

        std::vector<std::vector<std::uint32_t>> neighbours; // per positive, non-gold ids by rank
        for (std::uint32_t gid : gold_ids) {
            std::vector<float> query(index_.vector(gid), index_.vector(gid) + index_.dim());
            std::vector<std::uint32_t> list;
            for (const auto& hit : index_.exact_top_k(query, codes_.size())) {
                if (!gold_ids.count(hit.id)) list.push_back(hit.id);
            }
            neighbours.push_back(std::move(list));
        }

        std::size_t target = k * result.positives.size();
        std::set<std::string> pool;
        std::size_t max_rank = codes_.size() > gold_ids.size() ? codes_.size() - gold_ids.size() : 0;
        for (std::size_t rank = 0; rank < max_rank && pool.size() < target; ++rank) {
            for (const auto& list : neighbours) {
                if (rank >= list.size()) continue;
                pool.insert(codes_[list[rank]]);
                if (pool.size() >= target) break;
            }
        }
        result.shortfall = pool.size() < target;
        result.negatives.assign(pool.begin(), pool.end());
        return result;
    }

private:
    std::vector<std::string> codes_;
    std::unordered_map<std::string, std::uint32_t> position_;
    DenseIndex index_;
};

struct CurveRow {
    std::string arm;
    std::size_t k = 0;
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    std::size_t n_notes = 0;
};

inline void write_curves(std::ostream& out, const std::vector<CurveRow>& rows) {
    out << "arm,K,micro_f1,macro_f1,n_notes\n";
    for (const auto& row : rows) {
        out << row.arm << ',' << row.k << ',' << ojson(row.micro_f1).dump() << ','
            << ojson(row.macro_f1).dump() << ',' << row.n_notes << '\n';
    }
}

struct ExperimentResult {
    std::vector<CurveRow> rows;
    ojson arms; // manifest fragment for arms.json
};

namespace detail {

struct CellScores {
    std::optional<EvalReport> validator;
    std::optional<EvalReport> reconciler;
    std::size_t n_notes = 0;
    std::size_t failures = 0;
    std::size_t missing_guidelines = 0;
    std::size_t unparseable = 0;
};

/// One (arm, K) cell: stage 3 gets per-chapter slices of the candidate set
/// and stage 4 gets the whole set; both are scored against full gold.
inline CellScores run_experiment_cell(const Pipeline& pipeline, const CandidateMiner& miner,
                                      const std::vector<ClinicalNote>& notes, std::size_t k,
                                      bool want_validator, bool want_reconciler) {
    CellScores cell;
    std::vector<NotePrediction> preds3, preds4;
    auto tally = [&](const std::vector<std::string>& warnings, const std::vector<std::string>& errors) {
        if (!errors.empty()) ++cell.failures;
        for (const auto& warning : warnings) {
            if (warning.find("no guideline document") != std::string::npos) ++cell.missing_guidelines;
        }
        for (const auto& error : errors) {
            if (error.find(error_code_name(ErrorCode::UnparseableResponse)) != std::string::npos) {
                ++cell.unparseable;
            }
        }
    };

    for (const auto& note : notes) {
        std::set<std::string> gold(note.gold_codes.begin(), note.gold_codes.end());
        std::vector<std::string> combined;
        try {
            combined = miner.build_candidate_set(gold, k).combined();
        } catch (const Error&) {
            ++cell.failures;
            continue;
        }
        if (want_validator) {
            std::set<std::string> tentative;
            for (const auto& [chapter, codes] :
                 group_by_chapter({combined.begin(), combined.end()})) {
                auto outcome = pipeline.validate_group(note, codes);
                tally(outcome.warnings, outcome.errors);
                if (outcome.value) tentative.insert(*outcome.value);
            }
            preds3.push_back({note.id, gold, std::move(tentative)});
        }
        if (want_reconciler) {
            auto outcome = pipeline.reconcile_candidates(note, combined);
            tally(outcome.warnings, outcome.errors);
            preds4.push_back(
                {note.id, gold, std::set<std::string>(outcome.value.begin(), outcome.value.end())});
        }
    }
    cell.n_notes = want_validator ? preds3.size() : preds4.size();
    if (want_validator && !preds3.empty()) cell.validator = micro_macro(preds3);
    if (want_reconciler && !preds4.empty()) cell.reconciler = micro_macro(preds4);
    return cell;
}

inline CurveRow curve_row(const std::string& arm, std::size_t k, const std::optional<EvalReport>& report,
                          std::size_t n_notes) {
    CurveRow row;
    row.arm = arm;
    row.k = k;
    row.n_notes = n_notes;
    if (report) {
        row.micro_f1 = report->micro_f1;
        row.macro_f1 = report->macro_f1;
    }
    return row;
}

inline ojson arm_descriptor(const PipelineConfig& config) {
    ojson arm = ojson::object();
    arm["context"] = context_level_name(config.context);
    arm["decoding"] = decoding_mode_name(config.mode);
    return arm;
}

} // namespace detail

/// Candidate-set scaling: how validator and reconciler hold up as the
/// candidate pool around the gold codes grows.
inline ExperimentResult candidate_scaling_run(const EngineContext& context, const CandidateMiner& miner,
                                              const std::vector<ClinicalNote>& notes,
                                              const std::vector<std::size_t>& k_values,
                                              PipelineConfig config = {}) {
    ExperimentResult result;
    Pipeline pipeline(context, config);
    std::size_t failures = 0;
    for (std::size_t k : k_values) {
        auto cell = detail::run_experiment_cell(pipeline, miner, notes, k, true, true);
        failures += cell.failures;
        result.rows.push_back(detail::curve_row("stage3", k, cell.validator, cell.n_notes));
        result.rows.push_back(detail::curve_row("stage4", k, cell.reconciler, cell.n_notes));
    }
    result.arms = ojson::object();
    result.arms["experiment"] = "candidate-scaling";
    result.arms["k_values"] = k_values;
    ojson arms = ojson::array();
    arms.push_back(detail::arm_descriptor(config));
    result.arms["arms"] = std::move(arms);
    result.arms["failures"] = failures;
    return result;
}

/// Context enrichment: the validator prompt at each context level, swept
/// over K. Missing guideline documents are tallied, not fatal.
inline ExperimentResult context_ablation_run(const EngineContext& context, const CandidateMiner& miner,
                                             const std::vector<ClinicalNote>& notes,
                                             const std::vector<ContextLevel>& levels,
                                             const std::vector<std::size_t>& k_values,
                                             PipelineConfig config = {}) {
    ExperimentResult result;
    std::size_t failures = 0;
    std::size_t missing_guidelines = 0;
    ojson arms = ojson::array();
    for (ContextLevel level : levels) {
        PipelineConfig arm_config = config;
        arm_config.context = level;
        Pipeline pipeline(context, arm_config);
        arms.push_back(detail::arm_descriptor(arm_config));
        for (std::size_t k : k_values) {
            auto cell = detail::run_experiment_cell(pipeline, miner, notes, k, true, false);
            failures += cell.failures;
            missing_guidelines += cell.missing_guidelines;
            result.rows.push_back(
                detail::curve_row(context_level_name(level), k, cell.validator, cell.n_notes));
        }
    }
    result.arms = ojson::object();
    result.arms["experiment"] = "context-ablation";
    result.arms["k_values"] = k_values;
    result.arms["arms"] = std::move(arms);
    result.arms["failures"] = failures;
    result.arms["missing_guidelines"] = missing_guidelines;
    return result;
}

/// Decoding comparison: the reconciler task under thinking versus
/// constrained replies, paired over the same K sweep.
inline ExperimentResult decoding_mode_run(const EngineContext& context, const CandidateMiner& miner,
                                          const std::vector<ClinicalNote>& notes,
                                          const std::vector<std::size_t>& k_values,
                                          PipelineConfig config = {}) {
    ExperimentResult result;
    std::size_t failures = 0;
    ojson arms = ojson::array();
    ojson unparseable = ojson::object();
    for (DecodingMode mode : {DecodingMode::Thinking, DecodingMode::Constrained}) {
        PipelineConfig arm_config = config;
        arm_config.mode = mode;
        Pipeline pipeline(context, arm_config);
        arms.push_back(detail::arm_descriptor(arm_config));
        std::size_t arm_unparseable = 0;
        for (std::size_t k : k_values) {
            auto cell = detail::run_experiment_cell(pipeline, miner, notes, k, false, true);
            failures += cell.failures;
            arm_unparseable += cell.unparseable;
            result.rows.push_back(
                detail::curve_row(decoding_mode_name(mode), k, cell.reconciler, cell.n_notes));
        }
        unparseable[decoding_mode_name(mode)] = arm_unparseable;
    }
    result.arms = ojson::object();
    result.arms["experiment"] = "decoding";
    result.arms["k_values"] = k_values;
    result.arms["arms"] = std::move(arms);
    result.arms["failures"] = failures;
    result.arms["unparseable"] = std::move(unparseable);
    return result;
}

} // namespace clh
