// Batch command line surface over the analysis library: disassembly and
// segmentation inspection, entry/boundary identification, graph export,
// corpus generation, training and evaluation.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "febi/corpus.hpp"
#include "febi/evm.hpp"
#include "febi/fsi_model.hpp"
#include "febi/graphs.hpp"
#include "febi/metrics.hpp"
#include "febi/pipeline.hpp"
#include "febi/segment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

febi::evm::Program load_program(const std::string& path) {
    return febi::evm::decode(read_text(path));
}

void write_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << text;
}

void write_json(const fs::path& path, const json& j) {
    write_file(path, j.dump(2) + "\n");
}

std::size_t parse_offset(const std::string& s) {
    std::size_t pos = 0;
    unsigned long long v = std::stoull(s, &pos, 0);
    if (pos != s.size()) throw std::runtime_error("bad offset: " + s);
    return std::size_t(v);
}

std::set<std::size_t> parse_offsets(const std::vector<std::string>& items) {
    std::set<std::size_t> out;
    for (const auto& item : items) {
        std::stringstream ss(item);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) out.insert(parse_offset(tok));
    }
    return out;
}

struct AnalyzeArgs {
    std::string input;
    std::string out = ".";
    std::string model_path;
    std::vector<std::string> oracle_entries;
    double threshold = 0.5;
    double rho0 = 0.5, delta = 0.1, rho_min = 0.1;
    std::size_t state_budget = 100000;
    double timeout_secs = 60.0;
    bool register_missing = false;
};

void add_analyze_flags(CLI::App* cmd, AnalyzeArgs& a) {
    cmd->add_option("input", a.input, "hex bytecode file")->required();
    cmd->add_option("--out", a.out, "output directory");
    cmd->add_option("--model", a.model_path, "trained model file");
    cmd->add_option("--oracle-entries", a.oracle_entries,
                    "comma separated function entry offsets");
    cmd->add_option("--threshold", a.threshold, "initial entry threshold");
    cmd->add_option("--rho0", a.rho0, "initial refinement threshold");
    cmd->add_option("--delta", a.delta, "threshold lowering step");
    cmd->add_option("--rho-min", a.rho_min, "threshold floor");
    cmd->add_option("--state-budget", a.state_budget, "traversal state budget");
    cmd->add_option("--timeout-secs", a.timeout_secs, "traversal time budget");
    cmd->add_flag("--register-missing", a.register_missing,
                  "register suggested entries on missing-call signals");
}

febi::pipeline::ContractAnalysis run_analysis(const AnalyzeArgs& a,
                                              const febi::evm::Program& p) {
    febi::pipeline::RunConfig cfg;
    cfg.rho0 = a.oracle_entries.empty() ? a.rho0 : 1.0;
    cfg.delta = a.delta;
    cfg.rho_min = a.rho_min;
    cfg.state_budget = a.state_budget;
    cfg.traversal_seconds = a.timeout_secs;

    std::optional<febi::fsi::FsiModelParams> model;
    std::optional<std::set<std::size_t>> oracle;
    if (!a.oracle_entries.empty())
        oracle = parse_offsets(a.oracle_entries);
    else if (!a.model_path.empty())
        model = febi::fsi::load_file(a.model_path);
    else
        throw std::runtime_error("need --model or --oracle-entries");

    febi::pipeline::RunConfig run = cfg;
    run.rho0 = oracle ? 1.0 : a.threshold;
    auto analysis = febi::pipeline::analyze_contract(
        p, model ? &*model : nullptr, oracle ? &*oracle : nullptr, run);
    return analysis;
}

json segment_json(const febi::evm::Program& p) {
    json j;
    j["basic_blocks"] = json::array();
    for (const auto& b : febi::seg::basic_blocks(p)) {
        json bj;
        bj["entry"] = febi::pipeline::hex_offset(b.entry_offset);
        bj["first"] = b.first;
        bj["last"] = b.last;
        switch (b.terminator) {
            case febi::seg::Terminator::Jump: bj["terminator"] = "jump"; break;
            case febi::seg::Terminator::CondJump:
                bj["terminator"] = "cond-jump";
                break;
            case febi::seg::Terminator::Halt: bj["terminator"] = "halt"; break;
            case febi::seg::Terminator::FallThrough:
                bj["terminator"] = "fall-through";
                break;
        }
        j["basic_blocks"].push_back(std::move(bj));
    }
    j["reachable_blocks"] = json::array();
    for (const auto& r : febi::seg::reachable_blocks(p)) {
        json rj;
        rj["entry"] = febi::pipeline::hex_offset(r.entry_offset);
        rj["first"] = r.first;
        rj["last"] = r.last;
        if (r.halt_at) rj["halt_at"] = *r.halt_at;
        j["reachable_blocks"].push_back(std::move(rj));
    }
    return j;
}

struct CorpusArgs {
    std::string corpus_dir;
    std::string out = ".";
    double split_fraction = 0.5;
    std::uint64_t seed = 1;
};

void add_corpus_flags(CLI::App* cmd, CorpusArgs& a) {
    cmd->add_option("--corpus", a.corpus_dir, "corpus directory")->required();
    cmd->add_option("--out", a.out, "output directory");
    cmd->add_option("--split", a.split_fraction, "train fraction of the split");
    cmd->add_option("--seed", a.seed, "split seed");
}

int run(int argc, char** argv) {
    CLI::App app{"function entry and boundary identification for EVM bytecode"};
    app.require_subcommand(1);
    app.set_config("--config");

    // disasm ---------------------------------------------------------------
    auto* disasm = app.add_subcommand("disasm", "disassemble hex bytecode");
    std::string disasm_input, disasm_out = ".";
    disasm->add_option("input", disasm_input, "hex bytecode file")->required();
    disasm->add_option("--out", disasm_out, "output directory");

    // segment --------------------------------------------------------------
    auto* segment = app.add_subcommand("segment", "basic and reachable blocks");
    std::string seg_input, seg_out = ".";
    segment->add_option("input", seg_input, "hex bytecode file")->required();
    segment->add_option("--out", seg_out, "output directory");

    // entries / boundaries / cfg / callgraph --------------------------------
    AnalyzeArgs entries_args, bounds_args, cfg_args, cg_args;
    auto* entries = app.add_subcommand("entries", "identify function entries");
    add_analyze_flags(entries, entries_args);
    auto* bounds = app.add_subcommand("boundaries", "identify function boundaries");
    add_analyze_flags(bounds, bounds_args);
    auto* cfg_cmd = app.add_subcommand("cfg", "per-function control flow graphs");
    add_analyze_flags(cfg_cmd, cfg_args);
    std::size_t cfg_path_cap = 10000;
    cfg_cmd->add_option("--path-cap", cfg_path_cap, "acyclic path cap");
    auto* cg_cmd = app.add_subcommand("callgraph", "whole contract call graph");
    add_analyze_flags(cg_cmd, cg_args);

    // gen-corpus -----------------------------------------------------------
    auto* gen = app.add_subcommand("gen-corpus", "generate a labeled corpus");
    std::uint64_t gen_seed = 1;
    std::size_t gen_count = 100;
    std::string gen_out = "corpus", gen_style = "plain";
    double gen_share = -1, gen_noncontig = -1;
    gen->add_option("--seed", gen_seed, "master seed");
    gen->add_option("--count", gen_count, "number of contracts");
    gen->add_option("--out", gen_out, "corpus directory");
    gen->add_option("--style", gen_style, "plain | dedup");
    gen->add_option("--share-probability", gen_share, "override share probability");
    gen->add_option("--noncontiguous-probability", gen_noncontig,
                    "override noncontiguous probability");

    // train ----------------------------------------------------------------
    auto* train = app.add_subcommand("train", "train the entry model");
    CorpusArgs train_corpus;
    add_corpus_flags(train, train_corpus);
    std::string train_model = "model.fsi";
    int train_epochs = 40, train_emb = 16, train_h1 = 24, train_h2 = 24;
    double train_lr = 0.1;
    train->add_option("--model", train_model, "output model path");
    train->add_option("--epochs", train_epochs, "training epochs");
    train->add_option("--lr", train_lr, "learning rate");
    train->add_option("--emb", train_emb, "embedding width");
    train->add_option("--h1", train_h1, "instruction LSTM width");
    train->add_option("--h2", train_h2, "block LSTM width");

    // eval -----------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "evaluate on the test split");
    CorpusArgs eval_corpus;
    add_corpus_flags(eval, eval_corpus);
    std::string eval_model;
    bool eval_oracle = false;
    double eval_timeout = 120.0;
    int eval_jobs = 1;
    std::string eval_agg = "micro";
    eval->add_option("--model", eval_model, "trained model file");
    eval->add_flag("--oracle-entries", eval_oracle, "use ground truth entries");
    eval->add_option("--timeout-secs", eval_timeout, "per-contract cutoff");
    eval->add_option("--jobs", eval_jobs, "parallel work items");
    eval->add_option("--aggregation", eval_agg, "micro | macro");

    // baseline -------------------------------------------------------------
    auto* base = app.add_subcommand("baseline", "call-site heuristic entries");
    CorpusArgs base_corpus;
    add_corpus_flags(base, base_corpus);

    CLI11_PARSE(app, argc, argv);

    if (disasm->parsed()) {
        febi::evm::Program p = load_program(disasm_input);
        std::string listing = febi::evm::disassembly(p);
        write_file(fs::path(disasm_out) / "disasm.txt", listing);
        std::cout << listing;
        return 0;
    }

    if (segment->parsed()) {
        febi::evm::Program p = load_program(seg_input);
        json j = segment_json(p);
        write_json(fs::path(seg_out) / "segment.json", j);
        std::cout << j.dump(2) << "\n";
        return 0;
    }

    if (entries->parsed()) {
        febi::evm::Program p = load_program(entries_args.input);
        auto a = run_analysis(entries_args, p);
        json j = febi::pipeline::entries_json(a);
        write_json(fs::path(entries_args.out) / "entries.json", j);
        std::cout << j.dump(2) << "\n";
        return 0;
    }

    if (bounds->parsed()) {
        febi::evm::Program p = load_program(bounds_args.input);
        auto a = run_analysis(bounds_args, p);
        json j = febi::pipeline::boundaries_json(a.boundaries);
        write_json(fs::path(bounds_args.out) / "boundaries.json", j);
        std::cout << j.dump(2) << "\n";
        return 0;
    }

    if (cfg_cmd->parsed()) {
        febi::evm::Program p = load_program(cfg_args.input);
        auto a = run_analysis(cfg_args, p);
        json j = json::array();
        fs::create_directories(cfg_args.out);
        for (const auto& r : a.boundaries.records) {
            febi::graphs::IntraCfg g = febi::graphs::intra_cfg(p, r);
            json gj = febi::graphs::to_json(g);
            febi::graphs::AcyclicPathSet ps =
                febi::graphs::acyclic_paths(g, cfg_path_cap);
            gj["acyclic_paths"] = ps.paths.size();
            gj["paths_truncated"] = ps.truncated;
            j.push_back(std::move(gj));
            std::string name = "cfg_" + febi::pipeline::hex_offset(r.entry);
            write_file(fs::path(cfg_args.out) / (name + ".dot"),
                       febi::graphs::to_dot(g, name));
        }
        write_json(fs::path(cfg_args.out) / "cfg.json", j);
        return 0;
    }

    if (cg_cmd->parsed()) {
        febi::evm::Program p = load_program(cg_args.input);
        auto a = run_analysis(cg_args, p);
        std::set<std::size_t> pubs;
        for (const auto& r : a.boundaries.records)
            if (r.kind == febi::boundary::FunctionKind::PublicBody)
                pubs.insert(r.entry);
        febi::graphs::CallGraph cg =
            febi::graphs::call_graph(a.boundaries.records, pubs);
        write_json(fs::path(cg_args.out) / "callgraph.json",
                   febi::graphs::to_json(cg));
        write_file(fs::path(cg_args.out) / "callgraph.dot",
                   febi::graphs::to_dot(cg));
        return 0;
    }

    if (gen->parsed()) {
        std::vector<febi::corpus::GroundTruthContract> set;
        for (std::size_t i = 0; i < gen_count; ++i) {
            febi::corpus::GenSpec spec =
                febi::corpus::sampled_spec(gen_seed, i, gen_style);
            if (gen_share >= 0) spec.share_probability = gen_share;
            if (gen_noncontig >= 0) spec.noncontiguous_probability = gen_noncontig;
            set.push_back(febi::corpus::generate(spec));
        }
        febi::corpus::save(gen_out, set);
        std::cout << "wrote " << set.size() << " contracts to " << gen_out
                  << "\n";
        return 0;
    }

    if (train->parsed()) {
        auto corpus = febi::corpus::load(train_corpus.corpus_dir);
        auto [train_set, test_set] = febi::corpus::split(
            corpus, train_corpus.split_fraction, train_corpus.seed);
        std::vector<febi::fsi::LabeledSequence> seqs;
        for (const auto& gt : train_set)
            seqs.push_back(febi::pipeline::labeled_sequence(gt));
        febi::fsi::TrainConfig tc;
        tc.dims = {train_emb, train_h1, train_h2};
        tc.seed = train_corpus.seed;
        tc.epochs = train_epochs;
        tc.learning_rate = train_lr;
        febi::fsi::TrainHistory hist;
        febi::fsi::FsiModelParams model = febi::fsi::train(seqs, tc, &hist);
        febi::fsi::save_file(model, train_model);
        std::cout << "trained on " << seqs.size() << " contracts, final loss "
                  << (hist.epoch_loss.empty() ? 0.0 : hist.epoch_loss.back())
                  << ", model written to " << train_model << "\n";
        return 0;
    }

    if (eval->parsed()) {
        auto corpus = febi::corpus::load(eval_corpus.corpus_dir);
        auto [train_set, test_set] = febi::corpus::split(
            corpus, eval_corpus.split_fraction, eval_corpus.seed);
        febi::pipeline::RunConfig cfg;
        cfg.contract_timeout = eval_timeout;
        cfg.jobs = eval_jobs;
        cfg.aggregation = eval_agg == "macro" ? febi::metrics::Aggregation::Macro
                                              : febi::metrics::Aggregation::Micro;
        std::optional<febi::fsi::FsiModelParams> model;
        if (!eval_oracle) {
            if (eval_model.empty())
                throw std::runtime_error("need --model or --oracle-entries");
            model = febi::fsi::load_file(eval_model);
        }
        febi::pipeline::EvalResult res = febi::pipeline::evaluate(
            test_set, model ? &*model : nullptr, cfg, eval_oracle);
        json report = febi::pipeline::report_json(res, cfg.aggregation);
        write_json(fs::path(eval_corpus.out) / "report.json", report);
        febi::pipeline::write_timings_csv(
            fs::path(eval_corpus.out) / "timings.csv", res);
        std::cout << report.dump(2) << "\n";
        return 0;
    }

    if (base->parsed()) {
        auto corpus = febi::corpus::load(base_corpus.corpus_dir);
        auto [train_set, test_set] = febi::corpus::split(
            corpus, base_corpus.split_fraction, base_corpus.seed);
        std::vector<febi::metrics::Score> scores;
        for (const auto& gt : test_set) {
            febi::evm::Program p = febi::evm::decode(gt.bytecode);
            std::vector<febi::seg::BasicBlock> blocks = febi::seg::basic_blocks(p);
            std::set<std::size_t> pred = febi::fsi::baseline_entries(p, blocks);
            std::set<std::size_t> pubs = febi::corpus::public_entries(gt);
            for (std::size_t e : pubs) pred.erase(e);
            scores.push_back(febi::metrics::entry_score(
                pred, febi::corpus::internal_entries(gt)));
        }
        json report;
        report["total"] = test_set.size();
        report["entries"] = febi::metrics::to_json(
            febi::metrics::aggregate(scores, febi::metrics::Aggregation::Micro),
            febi::metrics::Aggregation::Micro);
        write_json(fs::path(base_corpus.out) / "report.json", report);
        std::cout << report.dump(2) << "\n";
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        json err;
        err["error"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    }
}
