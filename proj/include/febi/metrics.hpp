#pragma once

// Precision/recall/F1 scoring for entries, byte-exact boundaries, and path
// sets, with micro/macro aggregation over contracts.

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "febi/boundary.hpp"
#include "febi/graphs.hpp"

namespace febi::metrics {

struct Score {
    std::size_t tp = 0, fp = 0, fn = 0;

    double precision() const {
        return tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
    }
    double recall() const {
        return tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn);
    }
    double f1() const {
        double p = precision(), r = recall();
        return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
    }
};

inline Score entry_score(const std::set<std::size_t>& predicted,
                         const std::set<std::size_t>& truth) {
    Score s;
    for (std::size_t e : predicted)
        truth.count(e) ? ++s.tp : ++s.fp;
    for (std::size_t e : truth)
        if (!predicted.count(e)) ++s.fn;
    return s;
}

// A predicted function counts as a true positive only when some truth
// function has the same entry and an identical byte set.
inline Score boundary_score(
    const std::map<std::size_t, std::set<std::size_t>>& predicted,
    const std::map<std::size_t, std::set<std::size_t>>& truth) {
    Score s;
    for (const auto& [entry, bytes] : predicted) {
        auto it = truth.find(entry);
        if (it != truth.end() && it->second == bytes)
            ++s.tp;
        else
            ++s.fp;
    }
    for (const auto& [entry, bytes] : truth) {
        auto it = predicted.find(entry);
        if (it == predicted.end() || it->second != bytes) ++s.fn;
    }
    return s;
}

using PathSet = std::set<std::vector<std::size_t>>;

inline Score pathset_score(const PathSet& predicted, const PathSet& truth) {
    Score s;
    for (const auto& p : predicted)
        truth.count(p) ? ++s.tp : ++s.fp;
    for (const auto& p : truth)
        if (!predicted.count(p)) ++s.fn;
    return s;
}

enum class Aggregation { Micro, Macro };

struct AggregateScore {
    Score micro;  // counts summed, rates recomputed
    double precision = 0, recall = 0, f1 = 0;  // per-mode headline values
};

inline AggregateScore aggregate(const std::vector<Score>& per_contract,
                                Aggregation mode) {
    if (per_contract.empty())
        throw std::invalid_argument("aggregate over empty score list");
    AggregateScore out;
    for (const auto& s : per_contract) {
        out.micro.tp += s.tp;
        out.micro.fp += s.fp;
        out.micro.fn += s.fn;
    }
    if (mode == Aggregation::Micro) {
        out.precision = out.micro.precision();
        out.recall = out.micro.recall();
        out.f1 = out.micro.f1();
    } else {
        for (const auto& s : per_contract) {
            out.precision += s.precision();
            out.recall += s.recall();
            out.f1 += s.f1();
        }
        out.precision /= double(per_contract.size());
        out.recall /= double(per_contract.size());
        out.f1 /= double(per_contract.size());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report output

inline nlohmann::json to_json(const Score& s) {
    return {{"tp", s.tp},        {"fp", s.fp},
            {"fn", s.fn},        {"precision", s.precision()},
            {"recall", s.recall()}, {"f1", s.f1()}};
}

inline nlohmann::json to_json(const AggregateScore& a, Aggregation mode) {
    nlohmann::json j = to_json(a.micro);
    j["mode"] = mode == Aggregation::Micro ? "micro" : "macro";
    j["precision"] = a.precision;
    j["recall"] = a.recall;
    j["f1"] = a.f1;
    return j;
}

inline std::string table_row(const std::string& label, double p, double r,
                             double f1) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << label;
    for (std::size_t i = label.size(); i < 24; ++i) os << ' ';
    os << p << "   " << r << "   " << f1;
    return os.str();
}

inline std::string text_table(
    const std::vector<std::pair<std::string, AggregateScore>>& rows) {
    std::ostringstream os;
    os << table_row("metric", 0, 0, 0);
    std::string header = os.str();
    os.str("");
    os << "metric                  prec     recall   f1\n";
    for (const auto& [label, a] : rows)
        os << table_row(label, a.precision, a.recall, a.f1) << "\n";
    return os.str();
}

inline std::string csv_header() {
    return "contract,metric,tp,fp,fn,precision,recall,f1,seconds";
}

inline std::string csv_row(const std::string& contract, const std::string& metric,
                           const Score& s, double seconds) {
    std::ostringstream os;
    os << contract << ',' << metric << ',' << s.tp << ',' << s.fp << ',' << s.fn
       << ',' << s.precision() << ',' << s.recall() << ',' << s.f1() << ','
       << seconds;
    return os.str();
}

}  // namespace febi::metrics
