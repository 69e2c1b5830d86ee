#pragma once

// End-to-end plumbing shared by the command line tool and the evaluation
// harness: per-contract analysis (dispatcher, entry prediction, boundary
// identification, graphs) and corpus-level evaluation with per-contract
// timing and failure accounting.

#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "febi/boundary.hpp"
#include "febi/corpus.hpp"
#include "febi/dispatcher.hpp"
#include "febi/evm.hpp"
#include "febi/fsi_model.hpp"
#include "febi/graphs.hpp"
#include "febi/metrics.hpp"

namespace febi::pipeline {

struct RunConfig {
    std::string model_path;
    std::string corpus_dir;
    std::string out_dir = ".";
    double rho0 = 0.5;
    double delta = 0.1;
    double rho_min = 0.1;
    std::size_t state_budget = 100000;
    double traversal_seconds = 60.0;
    std::size_t path_cap = 10000;
    double contract_timeout = 120.0;  // per-contract wall clock cutoff
    std::uint64_t seed = 1;
    double split_fraction = 0.5;
    int jobs = 1;
    metrics::Aggregation aggregation = metrics::Aggregation::Micro;

    boundary::BoundaryConfig boundary_config() const {
        boundary::BoundaryConfig b;
        b.rho0 = rho0;
        b.delta = delta;
        b.rho_min = rho_min;
        b.traversal.max_states = state_budget;
        b.traversal.max_seconds = traversal_seconds;
        return b;
    }
};

struct ContractAnalysis {
    dispatch::PublicFunctions publics;
    std::set<std::size_t> public_bodies;     // body entries (interface when inlined)
    std::set<std::size_t> interface_entries;
    boundary::BoundaryResult boundaries;
    std::set<std::size_t> entries;           // entries of the final records
    double seconds = 0;
};

inline ContractAnalysis analyze_contract(
    const evm::Program& p, const fsi::FsiModelParams* model,
    const std::set<std::size_t>* oracle_entries, const RunConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    ContractAnalysis out;
    std::vector<seg::BasicBlock> blocks = seg::basic_blocks(p);
    out.publics = dispatch::public_entries(p, blocks);
    for (const auto& f : out.publics.functions) {
        out.interface_entries.insert(f.interface_entry);
        auto body = dispatch::body_entry(p, blocks, f.interface_entry);
        out.public_bodies.insert(body.value_or(f.interface_entry));
    }

    boundary::CandidateFn candidates;
    if (oracle_entries) {
        std::set<std::size_t> fixed = *oracle_entries;
        candidates = [fixed](double) { return fixed; };
    } else if (model) {
        fsi::PredictOptions opt;
        opt.excluded = out.interface_entries;
        auto self = &out;
        candidates = [model, &p, opt, self](double rho) {
            fsi::PredictOptions o = opt;
            o.threshold = rho;
            std::set<std::size_t> c;
            for (const auto& pr : fsi::predict(*model, p, o))
                c.insert(pr.offset);
            for (std::size_t b : self->public_bodies) c.erase(b);
            return c;
        };
    } else {
        candidates = [](double) { return std::set<std::size_t>{}; };
    }

    out.boundaries =
        boundary::identify_boundaries(p, out.public_bodies, candidates,
                                      cfg.boundary_config());
    for (const auto& r : out.boundaries.records) out.entries.insert(r.entry);
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                t0)
                      .count();
    return out;
}

inline std::map<std::size_t, std::set<std::size_t>> record_map(
    const boundary::BoundaryResult& b) {
    std::map<std::size_t, std::set<std::size_t>> m;
    for (const auto& r : b.records) m[r.entry] = r.bytes;
    return m;
}

inline std::map<std::size_t, std::set<std::size_t>> truth_map(
    const corpus::GroundTruthContract& gt) {
    std::map<std::size_t, std::set<std::size_t>> m;
    for (const auto& f : gt.functions)
        m[f.entry] = std::set<std::size_t>(f.bytes.begin(), f.bytes.end());
    return m;
}

inline fsi::LabeledSequence labeled_sequence(
    const corpus::GroundTruthContract& gt) {
    evm::Program p = evm::decode(gt.bytecode);
    fsi::LabeledSequence seq;
    seq.id = gt.id;
    seq.blocks = fsi::preprocess(p);
    std::set<std::size_t> entries = corpus::entry_set(gt);
    for (const auto& b : seq.blocks)
        seq.labels.push_back(entries.count(b.entry_offset) ? 1 : 0);
    return seq;
}

// ---------------------------------------------------------------------------
// Corpus evaluation

struct EvalResult {
    std::size_t total = 0;
    std::size_t analyzed = 0;
    std::size_t timeouts = 0;
    std::size_t fatal = 0;
    std::vector<metrics::Score> entry_scores;
    std::vector<metrics::Score> boundary_scores;
    std::vector<std::pair<std::string, double>> timings;  // id, seconds
    std::vector<std::string> errors;
};

inline EvalResult evaluate(const std::vector<corpus::GroundTruthContract>& test,
                           const fsi::FsiModelParams* model,
                           const RunConfig& cfg, bool oracle_entries = false) {
    EvalResult res;
    res.total = test.size();
    for (const auto& gt : test) {
        metrics::Score entry_s, boundary_s;
        double seconds = 0;
        try {
            evm::Program p = evm::decode(gt.bytecode);
            std::set<std::size_t> truth_entries = corpus::entry_set(gt);
            std::set<std::size_t> internals = corpus::internal_entries(gt);
            ContractAnalysis a = analyze_contract(
                p, model, oracle_entries ? &internals : nullptr, cfg);
            seconds = a.seconds;
            if (a.seconds > cfg.contract_timeout) {
                ++res.timeouts;  // zero score retained
            } else {
                ++res.analyzed;
                entry_s = metrics::entry_score(a.entries, truth_entries);
                boundary_s =
                    metrics::boundary_score(record_map(a.boundaries),
                                            truth_map(gt));
            }
        } catch (const std::exception& e) {
            ++res.fatal;
            res.errors.push_back(gt.id + ": " + e.what());
        }
        res.entry_scores.push_back(entry_s);
        res.boundary_scores.push_back(boundary_s);
        res.timings.push_back({gt.id, seconds});
    }
    return res;
}

inline nlohmann::json report_json(const EvalResult& r,
                                  metrics::Aggregation mode) {
    nlohmann::json j;
    j["total"] = r.total;
    j["analyzed"] = r.analyzed;
    j["timeouts"] = r.timeouts;
    j["fatal"] = r.fatal;
    j["entries"] = metrics::to_json(metrics::aggregate(r.entry_scores, mode), mode);
    j["boundaries"] =
        metrics::to_json(metrics::aggregate(r.boundary_scores, mode), mode);
    j["errors"] = r.errors;
    return j;
}

inline void write_timings_csv(const std::filesystem::path& path,
                              const EvalResult& r) {
    std::ofstream os(path);
    os << "contract,seconds\n";
    for (const auto& [id, s] : r.timings) os << id << ',' << s << '\n';
}

inline std::string hex_offset(std::size_t off) {
    std::ostringstream os;
    os << "0x" << std::hex << off;
    return os.str();
}

inline nlohmann::json boundaries_json(const boundary::BoundaryResult& b) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : b.records) {
        nlohmann::json rec;
        rec["entry"] = hex_offset(r.entry);
        rec["kind"] =
            r.kind == boundary::FunctionKind::PublicBody ? "public-body"
                                                         : "internal";
        rec["bytes"] = nlohmann::json::array();
        for (std::size_t off : r.bytes) rec["bytes"].push_back(hex_offset(off));
        rec["callers"] = nlohmann::json::array();
        for (std::size_t c : r.callers) rec["callers"].push_back(hex_offset(c));
        j.push_back(std::move(rec));
    }
    return j;
}

inline nlohmann::json entries_json(const ContractAnalysis& a) {
    nlohmann::json j;
    j["public_bodies"] = nlohmann::json::array();
    for (std::size_t e : a.public_bodies)
        j["public_bodies"].push_back(hex_offset(e));
    j["entries"] = nlohmann::json::array();
    for (std::size_t e : a.entries) j["entries"].push_back(hex_offset(e));
    j["final_rho"] = a.boundaries.final_rho;
    return j;
}

}  // namespace febi::pipeline
