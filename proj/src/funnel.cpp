#include "htmlcure/funnel.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "htmlcure/jsonl.hpp"

namespace htmlcure::funnel {

// ---------------------------------------------------------------------------
// Summaries and decisions
// ---------------------------------------------------------------------------

TraceSummary summary_from_repair(const repair::RepairTrace& trace) {
    TraceSummary s;
    s.artifact_id = trace.artifact_id;
    s.family = trace.family;
    s.origin_total = trace.initial_report.total;
    s.best_total = trace.best_report.total;
    s.best_round = trace.best_round;
    s.rounds = static_cast<int>(trace.rounds.size());
    s.final_run_fresh = !trace.best_report.run_id.empty();
    s.termination_reason = trace.termination_reason;
    s.html = trace.best_artifact.html;
    return s;
}

TraceSummary summary_from_json(const json& j) {
    TraceSummary s;
    s.artifact_id = j.at("artifact_id").get<std::string>();
    s.family = family_from_name(j.at("family").get<std::string>());
    s.origin_total = points_from_json(j.at("origin_total"));
    s.best_total = points_from_json(j.at("best_total"));
    s.best_round = j.at("best_round").get<int>();
    s.rounds = j.at("rounds").get<int>();
    s.final_run_fresh = j.at("final_run_fresh").get<bool>();
    s.termination_reason = j.value("termination_reason", "");
    s.html = j.value("html", "");
    return s;
}

namespace {
const std::array<std::string, 3> kDecisionNames = {"export", "partial", "reject"};
}

const std::string& decision_name(Decision d) { return kDecisionNames[static_cast<int>(d)]; }

Decision decision_from_name(const std::string& name) {
    for (std::size_t i = 0; i < kDecisionNames.size(); ++i)
        if (kDecisionNames[i] == name) return static_cast<Decision>(i);
    throw DomainError("unknown gate decision: " + name);
}

json to_json(const GateDecision& d) {
    json j;
    j["artifact_id"] = d.artifact_id;
    j["family"] = family_name(d.family);
    j["original_band"] = band_name(d.original_band);
    j["final_band"] = band_name(d.final_band);
    j["decision"] = decision_name(d.decision);
    j["reason"] = d.reason;
    j["best_total"] = points_to_json(d.best_total);
    j["rounds"] = d.rounds;
    j["best_round"] = d.best_round;
    return j;
}

GateDecision gate_decision_from_json(const json& j) {
    GateDecision d;
    d.artifact_id = j.at("artifact_id").get<std::string>();
    d.family = family_from_name(j.at("family").get<std::string>());
    d.original_band = band_from_name(j.at("original_band").get<std::string>());
    d.final_band = band_from_name(j.at("final_band").get<std::string>());
    d.decision = decision_from_name(j.at("decision").get<std::string>());
    d.reason = j.value("reason", "");
    d.best_total = points_from_json(j.at("best_total"));
    d.rounds = j.value("rounds", 0);
    d.best_round = j.value("best_round", 0);
    return d;
}

// ---------------------------------------------------------------------------
// Near-duplicate screening
// ---------------------------------------------------------------------------

namespace {
constexpr std::size_t kShingleLen = 8;

std::uint64_t fnv64(const char* data, std::size_t len) {
    std::uint64_t h = 14695981039346656037ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= static_cast<unsigned char>(data[i]);
        h *= 1099511628211ull;
    }
    return h;
}
} // namespace

std::set<std::uint64_t> shingle_set(const std::string& text) {
    std::set<std::uint64_t> out;
    if (text.size() < kShingleLen) {
        if (!text.empty()) out.insert(fnv64(text.data(), text.size()));
        return out;
    }
    for (std::size_t i = 0; i + kShingleLen <= text.size(); ++i)
        out.insert(fnv64(text.data() + i, kShingleLen));
    return out;
}

double jaccard(const std::set<std::uint64_t>& a, const std::set<std::uint64_t>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::size_t inter = 0;
    const auto& small = a.size() <= b.size() ? a : b;
    const auto& large = a.size() <= b.size() ? b : a;
    for (std::uint64_t h : small)
        if (large.count(h)) ++inter;
    std::size_t uni = a.size() + b.size() - inter;
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

GateDecision Gatekeeper::gate(const TraceSummary& summary) {
    GateDecision d;
    d.artifact_id = summary.artifact_id;
    d.family = summary.family;
    d.original_band = summary.origin_band();
    d.final_band = summary.final_band();
    d.best_total = summary.best_total;
    d.rounds = summary.rounds;
    d.best_round = summary.best_round;

    const bool improved = summary.best_total > summary.origin_total;
    if (summary.best_total >= policy_.export_threshold && summary.final_run_fresh) {
        std::set<std::uint64_t> shingles;
        if (policy_.redundancy_screen && !summary.html.empty()) {
            shingles = shingle_set(summary.html);
            for (const auto& accepted : accepted_shingles_) {
                if (jaccard(shingles, accepted) >= policy_.near_dup_similarity) {
                    d.decision = Decision::reject;
                    d.reason = "redundant near-duplicate of an exported page";
                    return d;
                }
            }
        }
        if (d.original_band == Band::high &&
            summary.best_total - summary.origin_total < policy_.min_high_origin_delta) {
            d.decision = Decision::reject;
            d.reason = "high-origin page with insufficient repair delta";
            return d;
        }
        d.decision = Decision::export_page;
        d.reason = "quality cleared";
        if (policy_.redundancy_screen && !shingles.empty())
            accepted_shingles_.push_back(std::move(shingles));
        return d;
    }
    if (improved) {
        d.decision = Decision::partial;
        d.reason = summary.best_total >= policy_.export_threshold
                       ? "final run not fresh"
                       : "improved but below the export threshold";
        return d;
    }
    d.decision = Decision::reject;
    d.reason = "no verified improvement";
    return d;
}

// ---------------------------------------------------------------------------
// Rows
// ---------------------------------------------------------------------------

std::vector<FunnelRow> funnel_rows_from_decisions(const std::vector<GateDecision>& decisions) {
    std::map<std::tuple<int, int, int>, std::int64_t> grouped;
    for (const auto& d : decisions)
        ++grouped[{static_cast<int>(d.original_band), static_cast<int>(d.final_band),
                   static_cast<int>(d.decision)}];
    std::vector<FunnelRow> rows;
    for (const auto& [key, count] : grouped) {
        FunnelRow row;
        row.orig_band = static_cast<Band>(std::get<0>(key));
        row.final_band = static_cast<Band>(std::get<1>(key));
        row.decision = static_cast<Decision>(std::get<2>(key));
        row.count = count;
        rows.push_back(row);
    }
    return rows;
}

std::vector<FunnelRow> funnel_rows_from_jsonl(const std::filesystem::path& path) {
    std::vector<FunnelRow> rows;
    for (const auto& j : read_jsonl(path)) {
        FunnelRow row;
        row.orig_band = band_from_name(j.at("orig_band").get<std::string>());
        row.final_band = band_from_name(j.at("final_band").get<std::string>());
        row.decision = decision_from_name(j.at("decision").get<std::string>());
        row.count = j.at("count").get<std::int64_t>();
        if (row.count < 0) throw ValidationError(path.string(), "count", "negative row count");
        rows.push_back(row);
    }
    return rows;
}

std::vector<PolicyRow> policy_rows_from_jsonl(const std::filesystem::path& path) {
    std::vector<PolicyRow> rows;
    for (const auto& j : read_jsonl(path)) {
        PolicyRow row;
        row.band = band_from_name(j.at("band").get<std::string>());
        row.strategy = j.at("strategy").get<std::string>();
        // Deltas arrive as decimal text; exact rationals keep table means
        // reproducible at 1 decimal.
        row.delta = Rational::from_decimal(j.at("delta").dump()).round_to_points();
        row.count = j.at("count").get<std::int64_t>();
        rows.push_back(row);
    }
    return rows;
}

std::vector<PolicyRow> policy_rows_from_trace_logs(const std::vector<json>& lines) {
    std::vector<PolicyRow> rows;
    for (const auto& j : lines) {
        if (j.value("kind", "") != "round") continue;
        PolicyRow row;
        row.band = band_from_name(j.at("band").get<std::string>());
        row.strategy = j.at("strategy").get<std::string>();
        Points pre = points_from_json(j.at("pre_total"));
        Points post = points_from_json(j.at("post_total"));
        row.delta = post - pre;
        row.count = 1;
        rows.push_back(row);
    }
    return rows;
}

double pct_1dp(std::int64_t numerator, std::int64_t denominator) {
    if (denominator == 0) return 0.0;
    // Tenths of a percent, rounded half up.
    __int128 tenths = (static_cast<__int128>(numerator) * 2000 + denominator) /
                      (static_cast<__int128>(denominator) * 2);
    return static_cast<double>(static_cast<std::int64_t>(tenths)) / 10.0;
}

// ---------------------------------------------------------------------------
// funnel_report
// ---------------------------------------------------------------------------

FunnelReport funnel_report(const std::vector<FunnelRow>& rows) {
    FunnelReport report;
    for (const auto& row : rows) {
        BandFunnel& band = report.bands[static_cast<int>(row.orig_band)];
        band.traces += row.count;
        switch (row.decision) {
            case Decision::export_page: band.exported += row.count; break;
            case Decision::partial: band.partial += row.count; break;
            case Decision::reject: band.reject += row.count; break;
        }
        report.total_traces += row.count;
    }
    for (auto& band : report.bands) report.pool += band.exported;
    for (auto& band : report.bands) {
        band.reject_pct = pct_1dp(band.reject, band.traces);
        band.partial_pct = pct_1dp(band.partial, band.traces);
        band.export_pct = pct_1dp(band.exported, band.traces);
        band.pool_share_pct = pct_1dp(band.exported, report.pool);
    }
    return report;
}

// ---------------------------------------------------------------------------
// transition_report
// ---------------------------------------------------------------------------

std::int64_t TransitionMatrix::row_total(Band orig) const {
    std::int64_t sum = 0;
    for (int c = 0; c < 3; ++c) sum += counts[static_cast<int>(orig)][c];
    return sum;
}

double TransitionMatrix::row_pct(Band orig, Band final_band) const {
    return pct_1dp(cell(orig, final_band), row_total(orig));
}

TransitionMatrix transition_report(const std::vector<FunnelRow>& rows) {
    TransitionMatrix m;
    for (const auto& row : rows)
        m.counts[static_cast<int>(row.orig_band)][static_cast<int>(row.final_band)] += row.count;
    return m;
}

// ---------------------------------------------------------------------------
// policy_report
// ---------------------------------------------------------------------------

std::vector<PolicyStats> policy_report(const std::vector<PolicyRow>& rows) {
    struct Acc {
        __int128 delta_sum_h = 0;
        std::int64_t n = 0;
        std::int64_t success = 0;
        std::int64_t catastrophe = 0;
    };
    std::map<std::pair<int, std::string>, Acc> grouped;
    for (const auto& row : rows) {
        Acc& acc = grouped[{static_cast<int>(row.band), row.strategy}];
        acc.delta_sum_h += static_cast<__int128>(row.delta.hundredths()) * row.count;
        acc.n += row.count;
        if (row.delta >= Points::from_hundredths(500)) acc.success += row.count;
        if (row.delta <= Points::from_hundredths(-1000)) acc.catastrophe += row.count;
    }
    std::vector<PolicyStats> out;
    for (const auto& [key, acc] : grouped) {
        PolicyStats s;
        s.band = static_cast<Band>(key.first);
        s.strategy = key.second;
        s.n = acc.n;
        if (acc.n > 0) {
            // Mean in tenths of a point, half away from zero.
            __int128 num = acc.delta_sum_h;
            __int128 den = static_cast<__int128>(acc.n) * 10;
            __int128 tenths = num >= 0 ? (num + den / 2) / den : -((-num + den / 2) / den);
            s.mean_delta = static_cast<double>(static_cast<std::int64_t>(tenths)) / 10.0;
        }
        s.success_pct = pct_1dp(acc.success, acc.n);
        s.catastrophe_pct = pct_1dp(acc.catastrophe, acc.n);
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// export_manifest
// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

} // namespace

json to_json(const ManifestEntry& e) {
    json j;
    j["artifact_id"] = e.artifact_id;
    j["family"] = family_name(e.family);
    j["origin_band"] = band_name(e.origin_band);
    j["rounds"] = e.rounds;
    j["best_round"] = e.best_round;
    j["gate_reason"] = e.gate_reason;
    return j;
}

std::vector<ManifestEntry> export_manifest(const std::vector<GateDecision>& decisions,
                                           std::size_t sample_size, std::uint64_t seed) {
    std::map<Family, std::vector<const GateDecision*>> pool;
    std::size_t pool_size = 0;
    for (const auto& d : decisions) {
        if (d.decision != Decision::export_page) continue;
        pool[d.family].push_back(&d);
        ++pool_size;
    }
    if (sample_size > pool_size)
        throw DomainError("export_manifest: sample " + std::to_string(sample_size) +
                          " exceeds pool " + std::to_string(pool_size));

    for (auto& [family, entries] : pool)
        std::sort(entries.begin(), entries.end(),
                  [](const GateDecision* a, const GateDecision* b) {
                      return a->artifact_id < b->artifact_id;
                  });

    // Family quotas proportional to pool composition, largest remainder.
    struct Quota {
        Family family;
        std::size_t take = 0;
        std::size_t have = 0;
        __int128 remainder = 0;
    };
    std::vector<Quota> quotas;
    std::size_t assigned = 0;
    for (const auto& [family, entries] : pool) {
        Quota q;
        q.family = family;
        q.have = entries.size();
        __int128 exact = static_cast<__int128>(sample_size) * entries.size();
        q.take = static_cast<std::size_t>(exact / pool_size);
        q.remainder = exact % pool_size;
        assigned += q.take;
        quotas.push_back(q);
    }
    std::sort(quotas.begin(), quotas.end(), [](const Quota& a, const Quota& b) {
        if (a.remainder != b.remainder) return a.remainder > b.remainder;
        return a.family < b.family;
    });
    for (std::size_t i = 0; assigned < sample_size; i = (i + 1) % quotas.size()) {
        if (quotas[i].take < quotas[i].have) {
            ++quotas[i].take;
            ++assigned;
        }
    }

    std::vector<ManifestEntry> manifest;
    for (const auto& q : quotas) {
        auto& entries = pool[q.family];
        // Seeded Fisher-Yates; the seed stream is family-tagged so adding a
        // family never reshuffles the others.
        std::uint64_t state = seed ^ (0x517cc1b727220a95ull * (static_cast<int>(q.family) + 1));
        for (std::size_t i = entries.size(); i > 1; --i)
            std::swap(entries[i - 1], entries[splitmix64(state) % i]);
        for (std::size_t i = 0; i < q.take; ++i) {
            const GateDecision& d = *entries[i];
            ManifestEntry e;
            e.artifact_id = d.artifact_id;
            e.family = d.family;
            e.origin_band = d.original_band;
            e.rounds = d.rounds;
            e.best_round = d.best_round;
            e.gate_reason = d.reason;
            manifest.push_back(std::move(e));
        }
    }
    std::sort(manifest.begin(), manifest.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) {
                  return a.artifact_id < b.artifact_id;
              });
    return manifest;
}

// ---------------------------------------------------------------------------
// Text renderings
// ---------------------------------------------------------------------------

namespace {
std::string fmt_count(std::int64_t v) {
    std::string raw = std::to_string(v);
    std::string out;
    int counter = 0;
    for (auto it = raw.rbegin(); it != raw.rend(); ++it) {
        if (counter > 0 && counter % 3 == 0 && *it != '-') out += ',';
        out += *it;
        ++counter;
    }
    std::reverse(out.begin(), out.end());
    return out;
}
} // namespace

std::string render_funnel(const FunnelReport& report) {
    std::ostringstream ss;
    char line[256];
    ss << "State   Traces    Reject            Partial           Export            Share\n";
    static const char* kStates[] = {"Low", "Mid", "High"};
    for (int b = 0; b < 3; ++b) {
        const BandFunnel& band = report.bands[b];
        std::snprintf(line, sizeof(line), "%-7s %-9s %-9s (%5.1f%%) %-9s (%5.1f%%) %-9s (%5.1f%%) %5.1f%%\n",
                      kStates[b], fmt_count(band.traces).c_str(), fmt_count(band.reject).c_str(),
                      band.reject_pct, fmt_count(band.partial).c_str(), band.partial_pct,
                      fmt_count(band.exported).c_str(), band.export_pct, band.pool_share_pct);
        ss << line;
    }
    ss << "Refined pool: " << fmt_count(report.pool) << " pages of "
       << fmt_count(report.total_traces) << " traces\n";
    return ss.str();
}

std::string render_transition(const TransitionMatrix& matrix) {
    std::ostringstream ss;
    char line[256];
    ss << "Orig.   Low               Mid               High\n";
    static const char* kStates[] = {"Low", "Mid", "High"};
    for (int r = 0; r < 3; ++r) {
        Band orig = static_cast<Band>(r);
        std::snprintf(line, sizeof(line), "%-7s", kStates[r]);
        ss << line;
        for (int c = 0; c < 3; ++c) {
            Band fin = static_cast<Band>(c);
            std::snprintf(line, sizeof(line), " %5.1f%% (%-9s)", matrix.row_pct(orig, fin),
                          fmt_count(matrix.cell(orig, fin)).c_str());
            ss << line;
        }
        ss << "\n";
    }
    return ss.str();
}

std::string render_policy(const std::vector<PolicyStats>& stats) {
    std::ostringstream ss;
    char line[256];
    ss << "State  Strategy                 Mean D   Success   Cat.     n\n";
    static const char* kStates[] = {"Low", "Mid", "High"};
    for (const auto& s : stats) {
        std::snprintf(line, sizeof(line), "%-6s %-24s %+6.1f   %5.1f%%   %5.1f%%  %s\n",
                      kStates[static_cast<int>(s.band)], s.strategy.c_str(), s.mean_delta,
                      s.success_pct, s.catastrophe_pct, fmt_count(s.n).c_str());
        ss << line;
    }
    return ss.str();
}

} // namespace htmlcure::funnel
