#pragma once

// Ground-truth corpus handling: a synthetic contract generator that emits
// runtime bytecode with exact per-function byte labels, plus loaders and
// deterministic train/test splitting. The generator's calling convention
// (push return address, push arguments, push callee entry, JUMP; callee
// consumes its arguments and returns through an indirect jump) matches the
// traversal semantics, so oracle-mode boundary identification reproduces the
// labels exactly when no code is shared.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "febi/assembler.hpp"
#include "febi/evm.hpp"
#include "febi/keccak.hpp"

namespace febi::corpus {

struct InfeasibleSpec : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MalformedGroundTruth : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr int kSchemaMajor = 1;
constexpr const char* kSchemaVersion = "1.0";

struct GtFunction {
    std::string name;
    bool is_public = false;
    std::size_t entry = 0;
    std::vector<std::size_t> bytes;  // sorted instruction start offsets
};

struct GroundTruthContract {
    std::string id;
    std::string bytecode;  // hex, no prefix
    std::vector<GtFunction> functions;
    nlohmann::json abi;
    nlohmann::json provenance;
};

struct GenSpec {
    std::uint64_t seed = 1;
    int n_public = 3;
    int n_internal = 4;
    int max_call_depth = 3;
    double share_probability = 0.0;
    double noncontiguous_probability = 0.0;
    double modifier_probability = 0.3;
    std::string optimize_style = "plain";  // plain | dedup
};

namespace detail {

struct Rng {
    std::mt19937_64 eng;
    explicit Rng(std::uint64_t seed) : eng(seed) {}
    // modulo draws keep generation byte-identical across standard libraries
    std::uint64_t next(std::uint64_t n) { return eng() % n; }
    bool chance(double p) { return next(1000000) < std::uint64_t(p * 1000000); }
};

enum class TmplKind { Compute, Storage, Branch, Loop, Call };

struct Tmpl {
    TmplKind kind = TmplKind::Compute;
    int callee = -1;       // function index for Call
    bool split = false;    // Call only: push return address in an earlier block
    std::uint8_t a = 1, b = 2, c = 3;
};

struct FnPlan {
    int index = 0;
    bool is_public = false;
    int arity = 0;
    int depth = 0;
    bool has_modifier = false;
    bool noncontiguous = false;
    bool shares_tail = false;
    std::vector<Tmpl> templates;
    std::string name;
    std::string signature;
};

}  // namespace detail

inline GroundTruthContract generate(const GenSpec& spec) {
    if (spec.n_public < 0 || spec.n_internal < 0)
        throw InfeasibleSpec("negative function counts");
    if (spec.max_call_depth < 1) throw InfeasibleSpec("max_call_depth < 1");
    double share_p = spec.share_probability;
    double noncontig_p = spec.noncontiguous_probability;
    if (spec.optimize_style == "dedup") {
        if (share_p == 0.0) share_p = 0.5;
        if (noncontig_p == 0.0) noncontig_p = 0.3;
    } else if (spec.optimize_style != "plain") {
        throw InfeasibleSpec("unknown optimize_style: " + spec.optimize_style);
    }
    if (share_p < 0 || share_p > 1 || noncontig_p < 0 || noncontig_p > 1 ||
        spec.modifier_probability < 0 || spec.modifier_probability > 1)
        throw InfeasibleSpec("probability outside [0,1]");
    int nf = spec.n_public + spec.n_internal;
    if (share_p > 0 && nf < 2)
        throw InfeasibleSpec("sharing requires at least two functions");
    if (spec.n_internal > 0 && spec.n_public == 0)
        throw InfeasibleSpec("internal functions need a public caller");

    detail::Rng rng(spec.seed);
    std::vector<detail::FnPlan> fns(static_cast<std::size_t>(nf));
    for (int i = 0; i < nf; ++i) {
        auto& f = fns[i];
        f.index = i;
        f.is_public = i < spec.n_public;
        f.arity = rng.chance(0.15) ? 0 : int(1 + rng.next(2));
        f.has_modifier = rng.chance(spec.modifier_probability);
        f.name = (f.is_public ? "f" : "g") + std::to_string(i);
        std::string sig = f.name + "(";
        for (int a = 0; a < f.arity; ++a)
            sig += (a ? ",uint256" : "uint256");
        f.signature = sig + ")";
    }

    // mandatory caller per internal function, acyclic by construction
    std::vector<std::pair<int, int>> edges;  // caller -> callee
    for (int j = spec.n_public; j < nf; ++j) {
        std::vector<int> candidates;
        for (int k = 0; k < j; ++k)
            if (fns[k].depth < spec.max_call_depth) candidates.push_back(k);
        int c = candidates[rng.next(candidates.size())];
        fns[j].depth = fns[c].depth + 1;
        edges.push_back({c, j});
    }
    for (int i = 0; i < nf; ++i)
        for (int j = spec.n_public; j < nf; ++j)
            if (i != j && fns[i].depth < fns[j].depth && rng.chance(0.2))
                edges.push_back({i, j});
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    // body plans: filler templates with call templates spliced in
    for (int i = 0; i < nf; ++i) {
        auto& f = fns[i];
        int fill = int(1 + rng.next(3));
        for (int t = 0; t < fill; ++t) {
            detail::Tmpl tm;
            switch (rng.next(4)) {
                case 0: tm.kind = detail::TmplKind::Compute; break;
                case 1: tm.kind = detail::TmplKind::Storage; break;
                case 2: tm.kind = detail::TmplKind::Branch; break;
                default: tm.kind = detail::TmplKind::Loop; break;
            }
            tm.a = std::uint8_t(1 + rng.next(9));
            tm.b = std::uint8_t(1 + rng.next(9));
            tm.c = std::uint8_t(1 + rng.next(200));
            f.templates.push_back(tm);
        }
    }
    for (const auto& [caller, callee] : edges) {
        detail::Tmpl tm;
        tm.kind = detail::TmplKind::Call;
        tm.callee = callee;
        tm.split = rng.chance(0.2);
        tm.c = std::uint8_t(1 + rng.next(200));
        auto& ts = fns[caller].templates;
        ts.insert(ts.begin() + std::ptrdiff_t(rng.next(ts.size() + 1)), tm);
    }

    std::vector<int> sharers;
    for (int i = 0; i < nf; ++i)
        if (rng.chance(share_p)) sharers.push_back(i);
    bool has_tail = sharers.size() >= 2;
    if (has_tail)
        for (int i : sharers) fns[i].shares_tail = true;
    for (auto& f : fns)
        f.noncontiguous = f.templates.size() >= 2 && rng.chance(noncontig_p);

    // emission
    assembler::Assembler a;
    std::vector<assembler::Assembler::Label> body(static_cast<std::size_t>(nf));
    std::vector<assembler::Assembler::Label> iface(static_cast<std::size_t>(spec.n_public));
    for (int i = 0; i < nf; ++i) body[i] = a.new_label();
    for (int i = 0; i < spec.n_public; ++i) iface[i] = a.new_label();
    auto tail = a.new_label();

    // dispatcher: load the selector, then one EQ comparison per public
    a.clear_owners();
    a.push(u256(0));
    a.op(evm::CALLDATALOAD);
    a.push(u256(0xe0));
    a.op(evm::SHR);
    std::vector<std::uint32_t> selectors;
    for (int i = 0; i < spec.n_public; ++i) {
        std::uint32_t sel = keccak::selector(fns[i].signature);
        selectors.push_back(sel);
        a.op(evm::DUP1);
        a.push(u256(sel), 4);
        a.op(evm::EQ);
        a.push_label(iface[i]);
        a.op(evm::JUMPI);
    }
    a.jumpdest();  // fallback: no selector matched
    a.push(u256(0));
    a.op(evm::DUP1);
    a.op(evm::REVERT);

    // interface stubs: decode arguments, call the body, stop on return
    for (int i = 0; i < spec.n_public; ++i) {
        auto ret = a.new_label();
        a.bind(iface[i]);
        a.jumpdest();
        a.op(evm::POP);  // duplicated selector
        a.push_label(ret);
        for (int arg = 0; arg < fns[i].arity; ++arg) {
            a.push(u256(4 + 32 * arg));
            a.op(evm::CALLDATALOAD);
        }
        a.push_label(body[i]);
        a.op(evm::JUMP);
        a.bind(ret);
        a.jumpdest();
        a.op(evm::STOP);
    }

    auto emit_template = [&](const detail::Tmpl& tm) {
        switch (tm.kind) {
            case detail::TmplKind::Compute:
                a.push(u256(tm.a));
                a.push(u256(tm.c));
                a.op(rng.chance(0.5) ? evm::ADD : evm::MUL);
                a.op(evm::POP);
                break;
            case detail::TmplKind::Storage:
                a.push(u256(tm.a));
                a.op(evm::SLOAD);
                a.push(u256(tm.b));
                a.op(evm::SSTORE);
                break;
            case detail::TmplKind::Branch: {
                auto skip = a.new_label();
                a.push(u256(tm.a));
                a.push(u256(tm.b));
                a.op(evm::LT);
                a.push_label(skip);
                a.op(evm::JUMPI);
                a.push(u256(tm.c));
                a.op(evm::POP);
                a.bind(skip);
                a.jumpdest();
                break;
            }
            case detail::TmplKind::Loop: {
                auto head = a.new_label();
                a.push(u256(tm.a));
                a.bind(head);
                a.jumpdest();
                a.push(u256(1));
                a.op(evm::SWAP1);
                a.op(evm::SUB);
                a.op(evm::DUP1);
                a.op(evm::ISZERO);
                a.op(evm::ISZERO);
                a.push_label(head);
                a.op(evm::JUMPI);
                a.op(evm::POP);
                break;
            }
            case detail::TmplKind::Call: {
                auto ret = a.new_label();
                a.push_label(ret);
                if (tm.split) a.jumpdest();  // block break before the target push
                for (int arg = 0; arg < fns[tm.callee].arity; ++arg)
                    a.push(u256(std::uint8_t(tm.c + arg)));
                a.push_label(body[tm.callee]);
                a.op(evm::JUMP);
                a.bind(ret);
                a.jumpdest();
                break;
            }
        }
    };

    auto emit_epilogue = [&](const detail::FnPlan& f) {
        if (f.shares_tail) {
            a.push_label(tail);
            a.op(evm::JUMP);
        } else {
            a.op(evm::JUMP);  // indirect: consumes the caller's return address
        }
    };

    std::vector<assembler::Assembler::Label> cont(static_cast<std::size_t>(nf), -1);
    for (int i = 0; i < nf; ++i) {
        const auto& f = fns[i];
        a.set_owners({i});
        a.bind(body[i]);
        a.jumpdest();
        if (f.has_modifier) {
            auto ok = a.new_label();
            a.op(evm::CALLER);
            a.push(u256(std::uint8_t(1 + (i * 7) % 200)));
            a.op(evm::EQ);
            a.push_label(ok);
            a.op(evm::JUMPI);
            a.push(u256(0));
            a.op(evm::DUP1);
            a.op(evm::REVERT);
            a.bind(ok);
            a.jumpdest();
        }
        if (f.arity == 2) {
            a.op(evm::ADD);
            a.op(evm::POP);
        } else {
            for (int arg = 0; arg < f.arity; ++arg) a.op(evm::POP);
        }
        std::size_t first_chunk =
            f.noncontiguous ? f.templates.size() / 2 : f.templates.size();
        for (std::size_t t = 0; t < first_chunk; ++t) emit_template(f.templates[t]);
        if (f.noncontiguous) {
            cont[i] = a.new_label();
            a.push_label(cont[i]);
            a.op(evm::JUMP);
        } else {
            emit_epilogue(f);
        }
        a.clear_owners();
    }

    if (has_tail) {
        std::set<int> owners(sharers.begin(), sharers.end());
        a.set_owners(owners);
        a.bind(tail);
        a.jumpdest();
        a.push(u256(7));
        a.op(evm::POP);
        a.op(evm::JUMP);
        a.clear_owners();
    }

    // continuation chunks last, in reverse order, so split functions are
    // genuinely non-contiguous
    for (int i = nf - 1; i >= 0; --i) {
        const auto& f = fns[i];
        if (!f.noncontiguous) continue;
        a.set_owners({i});
        a.bind(cont[i]);
        a.jumpdest();
        for (std::size_t t = f.templates.size() / 2; t < f.templates.size(); ++t)
            emit_template(f.templates[t]);
        emit_epilogue(f);
        a.clear_owners();
    }

    std::vector<std::uint8_t> code = a.assemble();

    GroundTruthContract gt;
    {
        std::ostringstream os;
        os << "gen-" << spec.seed << "-" << spec.optimize_style;
        gt.id = os.str();
    }
    gt.bytecode = evm::to_hex_string(code);
    std::map<int, std::vector<std::size_t>> bytes_of;
    for (const auto& [off, owners] : a.owner_map())
        for (int o : owners) bytes_of[o].push_back(off);
    for (int i = 0; i < nf; ++i) {
        GtFunction gf;
        gf.name = fns[i].name;
        gf.is_public = fns[i].is_public;
        gf.entry = a.offset_of(body[i]);
        gf.bytes = bytes_of[i];
        gt.functions.push_back(std::move(gf));
    }
    gt.abi = nlohmann::json::array();
    for (int i = 0; i < spec.n_public; ++i) {
        nlohmann::json inputs = nlohmann::json::array();
        for (int arg = 0; arg < fns[i].arity; ++arg)
            inputs.push_back({{"name", "a" + std::to_string(arg)},
                              {"type", "uint256"}});
        gt.abi.push_back({{"type", "function"},
                          {"name", fns[i].name},
                          {"inputs", inputs}});
    }
    gt.provenance = {{"generator",
                      {{"seed", spec.seed},
                       {"n_public", spec.n_public},
                       {"n_internal", spec.n_internal},
                       {"max_call_depth", spec.max_call_depth},
                       {"share_probability", share_p},
                       {"noncontiguous_probability", noncontig_p},
                       {"modifier_probability", spec.modifier_probability},
                       {"optimize_style", spec.optimize_style}}}};
    return gt;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const GroundTruthContract& gt) {
    nlohmann::json j;
    j["schema_version"] = kSchemaVersion;
    j["id"] = gt.id;
    j["bytecode"] = gt.bytecode;
    j["functions"] = nlohmann::json::array();
    for (const auto& f : gt.functions)
        j["functions"].push_back({{"name", f.name},
                                  {"visibility", f.is_public ? "public" : "internal"},
                                  {"entry", f.entry},
                                  {"bytes", f.bytes}});
    if (!gt.abi.is_null()) j["abi"] = gt.abi;
    if (!gt.provenance.is_null()) j["provenance"] = gt.provenance;
    return j;
}

inline GroundTruthContract from_json(const nlohmann::json& j) {
    GroundTruthContract gt;
    try {
        std::string version = j.at("schema_version").get<std::string>();
        int major = std::stoi(version.substr(0, version.find('.')));
        if (major != kSchemaMajor)
            throw MalformedGroundTruth("unsupported schema version " + version);
        gt.id = j.at("id").get<std::string>();
        gt.bytecode = j.at("bytecode").get<std::string>();
        std::size_t code_len = gt.bytecode.size() / 2;
        std::set<std::size_t> entries;
        for (const auto& fj : j.at("functions")) {
            GtFunction f;
            f.name = fj.at("name").get<std::string>();
            f.is_public = fj.at("visibility").get<std::string>() == "public";
            f.entry = fj.at("entry").get<std::size_t>();
            f.bytes = fj.at("bytes").get<std::vector<std::size_t>>();
            if (!std::is_sorted(f.bytes.begin(), f.bytes.end()))
                throw MalformedGroundTruth("unsorted byte list in " + f.name);
            if (!std::binary_search(f.bytes.begin(), f.bytes.end(), f.entry))
                throw MalformedGroundTruth("entry not in bytes for " + f.name);
            for (std::size_t off : f.bytes)
                if (off >= code_len)
                    throw MalformedGroundTruth("offset out of range in " + f.name);
            if (!entries.insert(f.entry).second)
                throw MalformedGroundTruth("duplicate entry offset");
            gt.functions.push_back(std::move(f));
        }
        if (j.contains("abi")) gt.abi = j.at("abi");
        if (j.contains("provenance")) gt.provenance = j.at("provenance");
    } catch (const nlohmann::json::exception& e) {
        throw MalformedGroundTruth(std::string("schema violation: ") + e.what());
    }
    return gt;
}

inline void save(const std::filesystem::path& dir,
                 const std::vector<GroundTruthContract>& set) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["schema_version"] = kSchemaVersion;
    manifest["ids"] = nlohmann::json::array();
    for (const auto& gt : set) {
        manifest["ids"].push_back(gt.id);
        std::ofstream hex(dir / (gt.id + ".hex"));
        hex << gt.bytecode << "\n";
        std::ofstream gtf(dir / (gt.id + ".gt.json"));
        gtf << to_json(gt).dump(2) << "\n";
    }
    std::ofstream mf(dir / "manifest.json");
    mf << manifest.dump(2) << "\n";
}

inline std::vector<GroundTruthContract> load(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw MalformedGroundTruth("missing manifest.json in " + dir.string());
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw MalformedGroundTruth(std::string("bad manifest: ") + e.what());
    }
    std::string version = manifest.value("schema_version", "0.0");
    if (std::stoi(version.substr(0, version.find('.'))) != kSchemaMajor)
        throw MalformedGroundTruth("unsupported manifest schema " + version);
    std::vector<GroundTruthContract> out;
    std::set<std::string> ids;
    for (const auto& idj : manifest.at("ids")) {
        std::string id = idj.get<std::string>();
        if (!ids.insert(id).second)
            throw MalformedGroundTruth("duplicate contract id " + id);
        std::ifstream gtf(dir / (id + ".gt.json"));
        if (!gtf) throw MalformedGroundTruth("missing ground truth for " + id);
        nlohmann::json j;
        try {
            gtf >> j;
        } catch (const nlohmann::json::exception& e) {
            throw MalformedGroundTruth(id + ": " + e.what());
        }
        GroundTruthContract gt = from_json(j);
        if (gt.id != id) throw MalformedGroundTruth("id mismatch for " + id);
        out.push_back(std::move(gt));
    }
    return out;
}

inline std::pair<std::vector<GroundTruthContract>, std::vector<GroundTruthContract>>
split(std::vector<GroundTruthContract> set, double fraction, std::uint64_t seed) {
    if (fraction <= 0 || fraction >= 1)
        throw std::invalid_argument("split fraction must be in (0,1)");
    std::mt19937_64 rng(seed);
    for (std::size_t i = set.size(); i > 1; --i)
        std::swap(set[i - 1], set[rng() % i]);
    std::size_t cut = std::size_t(double(set.size()) * fraction);
    std::vector<GroundTruthContract> train(set.begin(), set.begin() + cut);
    std::vector<GroundTruthContract> test(set.begin() + cut, set.end());
    return {std::move(train), std::move(test)};
}

inline std::vector<std::vector<GroundTruthContract>> folds(
    std::vector<GroundTruthContract> set, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("fold count must be >= 2");
    std::mt19937_64 rng(seed);
    for (std::size_t i = set.size(); i > 1; --i)
        std::swap(set[i - 1], set[rng() % i]);
    std::vector<std::vector<GroundTruthContract>> out(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < set.size(); ++i)
        out[i % std::size_t(k)].push_back(std::move(set[i]));
    return out;
}

// Varied-size spec for batch generation: one master seed fans out into
// per-contract seeds and function counts.
inline GenSpec sampled_spec(std::uint64_t master_seed, std::uint64_t index,
                            const std::string& style = "plain") {
    GenSpec s;
    s.seed = master_seed * 1000003ULL + index;
    s.n_public = int(2 + s.seed % 3);
    s.n_internal = int(1 + s.seed % 5);
    s.optimize_style = style;
    if (style == "plain") s.noncontiguous_probability = 0.2;
    return s;
}

// Convenience views used by the pipeline and the metrics suite.
inline std::set<std::size_t> entry_set(const GroundTruthContract& gt) {
    std::set<std::size_t> s;
    for (const auto& f : gt.functions) s.insert(f.entry);
    return s;
}

inline std::set<std::size_t> internal_entries(const GroundTruthContract& gt) {
    std::set<std::size_t> s;
    for (const auto& f : gt.functions)
        if (!f.is_public) s.insert(f.entry);
    return s;
}

inline std::set<std::size_t> public_entries(const GroundTruthContract& gt) {
    std::set<std::size_t> s;
    for (const auto& f : gt.functions)
        if (f.is_public) s.insert(f.entry);
    return s;
}

}  // namespace febi::corpus
