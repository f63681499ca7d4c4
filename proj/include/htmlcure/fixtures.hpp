#pragma once
// Deterministic fixture generators: a synthetic benchmark release matching
// the published accounting, aggregate trace tables matching the published
// funnel/transition/policy tables, and a 12-page corpus (pages, mini
// release, scripted mock) for end-to-end runs without network or browser.

#include <filesystem>
#include <string>
#include <vector>

#include "htmlcure/bench.hpp"
#include "htmlcure/core.hpp"
#include "htmlcure/funnel.hpp"

namespace htmlcure::fixtures {

// 400 items / 6,000 scored TCs / 65 subtypes, per-family counts, difficulty
// strata 122/156/122, 338 interactive items, 16,120 steps. Writes one
// items_<family>.jsonl per family plus frozen_pool.txt. Items also carry one
// unscored extra TC each to exercise the frozen-pool restriction.
void write_release(const std::filesystem::path& dir);

// funnel_rows.jsonl + policy_rows.jsonl reproducing the released aggregate
// accounting (funnel, transition, and per-strategy policy tables).
void write_aggregate_tables(const std::filesystem::path& dir);
std::vector<funnel::FunnelRow> aggregate_funnel_rows();
std::vector<funnel::PolicyRow> aggregate_policy_rows();

// Integer delta rows realizing (n, mean, success%, catastrophe%) exactly at
// 1-decimal reporting. Throws if the targets are unsatisfiable.
std::vector<funnel::PolicyRow> solve_policy_group(Band band, const std::string& strategy,
                                                  std::int64_t n, const std::string& mean,
                                                  const std::string& success_pct,
                                                  const std::string& catastrophe_pct);

// 12-page synthetic corpus: pages.jsonl (artifacts), release/ (matching
// bench items + frozen pool), mock_script.jsonl, provider.json.
void write_corpus(const std::filesystem::path& dir);
std::vector<HtmlArtifact> corpus_pages();
std::vector<bench::BenchItem> corpus_items();
std::vector<json> corpus_mock_script();

} // namespace htmlcure::fixtures
