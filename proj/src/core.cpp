#include "htmlcure/core.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace htmlcure {

// ---------------------------------------------------------------------------
// Rational::from_decimal
// ---------------------------------------------------------------------------

Rational Rational::from_decimal(const std::string& text) {
    if (text.empty()) throw DomainError("empty decimal literal");
    std::size_t i = 0;
    bool neg = false;
    if (text[i] == '+' || text[i] == '-') {
        neg = text[i] == '-';
        ++i;
    }
    std::int64_t mantissa = 0;
    int frac_digits = 0;
    bool seen_digit = false;
    bool in_frac = false;
    for (; i < text.size(); ++i) {
        char c = text[i];
        if (c == '.') {
            if (in_frac) throw DomainError("bad decimal literal: " + text);
            in_frac = true;
        } else if (c == 'e' || c == 'E') {
            break;
        } else if (c >= '0' && c <= '9') {
            mantissa = mantissa * 10 + (c - '0');
            if (in_frac) ++frac_digits;
            seen_digit = true;
        } else {
            throw DomainError("bad decimal literal: " + text);
        }
    }
    if (!seen_digit) throw DomainError("bad decimal literal: " + text);
    int exponent = 0;
    if (i < text.size()) { // at 'e'/'E'
        ++i;
        bool exp_neg = false;
        if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
            exp_neg = text[i] == '-';
            ++i;
        }
        if (i == text.size()) throw DomainError("bad decimal literal: " + text);
        for (; i < text.size(); ++i) {
            if (text[i] < '0' || text[i] > '9') throw DomainError("bad decimal literal: " + text);
            exponent = exponent * 10 + (text[i] - '0');
        }
        if (exp_neg) exponent = -exponent;
    }
    if (neg) mantissa = -mantissa;
    int power = exponent - frac_digits;
    std::int64_t num = mantissa;
    std::int64_t den = 1;
    for (; power > 0; --power) num *= 10;
    for (; power < 0; ++power) den *= 10;
    return Rational(num, den);
}

// ---------------------------------------------------------------------------
// Families, profiles, bands, dimensions
// ---------------------------------------------------------------------------

namespace {

const std::array<std::string, kFamilyCount> kFamilyNames = {
    "Apps & Tools",
    "Content & Marketing",
    "Data Visualization",
    "Games & Simulations",
    "3D/WebGL Scenes",
    "Visual Art & Animation",
};

const std::array<std::string, 2> kProfileNames = {"interactive", "noninteractive"};
const std::array<std::string, 3> kBandNames = {"Low", "Mid", "High"};
const std::array<std::string, kDimensionCount> kDimensionNames = {
    "rendering", "visual_design", "functionality", "interactivity", "code_quality"};
const std::array<std::string, 3> kProbeOutcomeNames = {"pass", "fail", "timeout"};

} // namespace

const std::string& family_name(Family f) { return kFamilyNames[static_cast<int>(f)]; }

Family family_from_name(const std::string& name) {
    for (int i = 0; i < kFamilyCount; ++i)
        if (kFamilyNames[i] == name) return static_cast<Family>(i);
    throw DomainError("unknown task family: " + name);
}

const std::vector<Family>& all_families() {
    static const std::vector<Family> v = {
        Family::apps_tools,       Family::content_marketing, Family::data_visualization,
        Family::games_simulations, Family::webgl_3d,          Family::visual_art_animation};
    return v;
}

const std::string& profile_name(Profile p) { return kProfileNames[static_cast<int>(p)]; }

Profile profile_from_name(const std::string& name) {
    for (int i = 0; i < 2; ++i)
        if (kProfileNames[i] == name) return static_cast<Profile>(i);
    throw DomainError("unknown profile: " + name);
}

const std::string& band_name(Band b) { return kBandNames[static_cast<int>(b)]; }

Band band_from_name(const std::string& name) {
    for (int i = 0; i < 3; ++i)
        if (kBandNames[i] == name) return static_cast<Band>(i);
    throw DomainError("unknown band: " + name);
}

const std::string& dimension_name(Dimension d) { return kDimensionNames[static_cast<int>(d)]; }

const std::vector<Dimension>& all_dimensions() {
    static const std::vector<Dimension> v = {Dimension::rendering, Dimension::visual_design,
                                             Dimension::functionality, Dimension::interactivity,
                                             Dimension::code_quality};
    return v;
}

const std::string& probe_outcome_name(ProbeOutcome o) {
    return kProbeOutcomeNames[static_cast<int>(o)];
}

ProbeOutcome probe_outcome_from_name(const std::string& name) {
    for (int i = 0; i < 3; ++i)
        if (kProbeOutcomeNames[i] == name) return static_cast<ProbeOutcome>(i);
    throw DomainError("unknown probe outcome: " + name);
}

// ---------------------------------------------------------------------------
// HtmlArtifact
// ---------------------------------------------------------------------------

Provenance Provenance::repaired(int round) {
    if (round < 1 || round > 8)
        throw DomainError("repair round out of range [1,8]: " + std::to_string(round));
    return {Kind::repaired, round};
}

void HtmlArtifact::check() const {
    if (html.empty() || html.find('<') == std::string::npos)
        throw DomainError("artifact " + id + ": html is empty or contains no tags");
    if (provenance.kind == Provenance::Kind::repaired &&
        (provenance.round < 1 || provenance.round > 8))
        throw DomainError("artifact " + id + ": repair round out of range");
}

// ---------------------------------------------------------------------------
// Budgets and ScoreVector
// ---------------------------------------------------------------------------

Budgets budgets_for(Profile p) {
    Budgets b;
    b.rendering = Points::from_hundredths(1000);
    b.visual_design = Points::from_hundredths(2000);
    b.code_quality = Points::from_hundredths(500);
    if (p == Profile::interactive) {
        b.functionality = Points::from_hundredths(5500);
        b.interactivity = Points::from_hundredths(1000);
    } else {
        b.functionality = Points::from_hundredths(6500);
        b.interactivity = Points::from_hundredths(0);
    }
    return b;
}

Points ScoreVector::component(Dimension d) const {
    switch (d) {
        case Dimension::rendering: return rendering;
        case Dimension::visual_design: return visual_design;
        case Dimension::functionality: return functionality;
        case Dimension::interactivity: return interactivity;
        case Dimension::code_quality: return code_quality;
    }
    throw DomainError("bad dimension");
}

void ScoreVector::set_component(Dimension d, Points v) {
    switch (d) {
        case Dimension::rendering: rendering = v; return;
        case Dimension::visual_design: visual_design = v; return;
        case Dimension::functionality: functionality = v; return;
        case Dimension::interactivity: interactivity = v; return;
        case Dimension::code_quality: code_quality = v; return;
    }
    throw DomainError("bad dimension");
}

void ScoreVector::check() const {
    const Budgets b = budgets_for(profile);
    for (Dimension d : all_dimensions()) {
        Points v = component(d);
        Points cap = b.rendering;
        switch (d) {
            case Dimension::rendering: cap = b.rendering; break;
            case Dimension::visual_design: cap = b.visual_design; break;
            case Dimension::functionality: cap = b.functionality; break;
            case Dimension::interactivity: cap = b.interactivity; break;
            case Dimension::code_quality: cap = b.code_quality; break;
        }
        if (v < kZeroPoints || v > cap)
            throw DomainError("score component " + dimension_name(d) + " = " + v.str() +
                              " outside [0, " + cap.str() + "] for profile " +
                              profile_name(profile));
    }
}

// ---------------------------------------------------------------------------
// classify_state
// ---------------------------------------------------------------------------

PageState classify_state(Points score) {
    if (score < kZeroPoints || score > Points::from_hundredths(10000))
        throw DomainError("score out of range [0,100]: " + score.str());
    Band band = Band::high;
    if (score < Points::from_hundredths(4000)) band = Band::low;
    else if (score < Points::from_hundredths(8000)) band = Band::mid;
    return PageState{band, score};
}

// ---------------------------------------------------------------------------
// ExperienceTrace
// ---------------------------------------------------------------------------

bool ExperienceTrace::layer_run(int layer) const {
    return std::find(layers_run.begin(), layers_run.end(), layer) != layers_run.end();
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

json points_to_json(Points p) { return json(p.hundredths()); }

Points points_from_json(const json& j) {
    if (!j.is_number_integer()) throw ValidationError("", "points", "points must be integer hundredths");
    return Points::from_hundredths(j.get<std::int64_t>());
}

json to_json(const Provenance& p) {
    json j;
    j["kind"] = p.kind == Provenance::Kind::generated ? "generated" : "repaired";
    if (p.kind == Provenance::Kind::repaired) j["round"] = p.round;
    return j;
}

Provenance provenance_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "generated") return Provenance::generated();
    if (kind == "repaired") return Provenance::repaired(j.at("round").get<int>());
    throw ValidationError("", "provenance.kind", "unknown provenance kind: " + kind);
}

json to_json(const HtmlArtifact& a) {
    json j;
    j["id"] = a.id;
    j["html"] = a.html;
    j["prompt"] = a.prompt;
    j["family"] = family_name(a.family);
    j["interactive"] = a.interactive;
    j["provenance"] = to_json(a.provenance);
    return j;
}

HtmlArtifact artifact_from_json(const json& j) {
    HtmlArtifact a;
    a.id = j.at("id").get<std::string>();
    a.html = j.at("html").get<std::string>();
    a.prompt = j.at("prompt").get<std::string>();
    a.family = family_from_name(j.at("family").get<std::string>());
    a.interactive = j.at("interactive").get<bool>();
    a.provenance = provenance_from_json(j.at("provenance"));
    return a;
}

json to_json(const ScoreVector& s) {
    json j;
    j["rendering"] = points_to_json(s.rendering);
    j["visual_design"] = points_to_json(s.visual_design);
    j["functionality"] = points_to_json(s.functionality);
    j["interactivity"] = points_to_json(s.interactivity);
    j["code_quality"] = points_to_json(s.code_quality);
    j["profile"] = profile_name(s.profile);
    return j;
}

ScoreVector score_vector_from_json(const json& j) {
    ScoreVector s;
    s.rendering = points_from_json(j.at("rendering"));
    s.visual_design = points_from_json(j.at("visual_design"));
    s.functionality = points_from_json(j.at("functionality"));
    s.interactivity = points_from_json(j.at("interactivity"));
    s.code_quality = points_from_json(j.at("code_quality"));
    s.profile = profile_from_name(j.at("profile").get<std::string>());
    return s;
}

json to_json(const EvidenceRecord& r) {
    json j;
    j["step_index"] = r.step_index;
    j["action"] = r.action;
    json v;
    v["frame_hash"] = r.visual.frame_hash;
    v["viewport"] = {r.visual.viewport.width, r.visual.viewport.height};
    if (r.visual.frame_delta) v["frame_delta"] = *r.visual.frame_delta;
    j["visual"] = v;
    json b;
    json probes = json::array();
    for (const auto& [id, outcome] : r.behavioral.probe_outcomes)
        probes.push_back({{"id", id}, {"outcome", probe_outcome_name(outcome)}});
    b["probe_outcomes"] = probes;
    b["dom_digest"] = r.behavioral.dom_digest;
    b["console_errors"] = r.behavioral.console_errors;
    b["exceptions"] = r.behavioral.exceptions;
    if (r.behavioral.latency_ms) b["latency_ms"] = *r.behavioral.latency_ms;
    j["behavioral"] = b;
    return j;
}

EvidenceRecord evidence_record_from_json(const json& j) {
    EvidenceRecord r;
    r.step_index = j.at("step_index").get<int>();
    r.action = j.at("action").get<std::string>();
    const json& v = j.at("visual");
    r.visual.frame_hash = v.at("frame_hash").get<std::string>();
    r.visual.viewport = {v.at("viewport").at(0).get<int>(), v.at("viewport").at(1).get<int>()};
    if (v.contains("frame_delta")) r.visual.frame_delta = v.at("frame_delta").get<double>();
    const json& b = j.at("behavioral");
    for (const auto& p : b.at("probe_outcomes"))
        r.behavioral.probe_outcomes.emplace_back(
            p.at("id").get<std::string>(),
            probe_outcome_from_name(p.at("outcome").get<std::string>()));
    r.behavioral.dom_digest = b.at("dom_digest").get<std::string>();
    r.behavioral.console_errors = b.at("console_errors").get<std::vector<std::string>>();
    r.behavioral.exceptions = b.at("exceptions").get<std::vector<std::string>>();
    if (b.contains("latency_ms")) r.behavioral.latency_ms = b.at("latency_ms").get<std::int64_t>();
    return r;
}

json to_json(const ExperienceTrace& t) {
    json j;
    j["artifact_id"] = t.artifact_id;
    json recs = json::array();
    for (const auto& r : t.records) recs.push_back(to_json(r));
    j["records"] = recs;
    j["layers_run"] = t.layers_run;
    json kfs = json::array();
    for (const auto& k : t.keyframes)
        kfs.push_back({{"frame_hash", k.frame_hash}, {"annotation", k.annotation}});
    j["keyframes"] = kfs;
    j["coverage_meta"] = t.coverage_meta;
    j["load_failed"] = t.load_failed;
    return j;
}

ExperienceTrace trace_from_json(const json& j) {
    ExperienceTrace t;
    t.artifact_id = j.at("artifact_id").get<std::string>();
    for (const auto& r : j.at("records")) t.records.push_back(evidence_record_from_json(r));
    t.layers_run = j.at("layers_run").get<std::vector<int>>();
    for (const auto& k : j.at("keyframes"))
        t.keyframes.push_back({k.at("frame_hash").get<std::string>(),
                               k.at("annotation").get<std::string>()});
    t.coverage_meta = j.at("coverage_meta").get<std::map<std::string, std::int64_t>>();
    t.load_failed = j.at("load_failed").get<bool>();
    return t;
}

std::string to_line(const json& j) { return j.dump(); }

json parse_line(const std::string& line) {
    return json::parse(line);
}

} // namespace htmlcure
