#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mpforge/concentration.hpp"
#include "mpforge/general_recursion.hpp"
#include "mpforge/solvers.hpp"
#include "mpforge/state_evolution.hpp"

namespace mpforge {

std::string library_version();

/// Embedded in every output: JSONL lines carry it inline, CSV files get a sidecar.
struct Provenance {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version = library_version();
};

/// Problem size and trial index of one run.
struct RunTag {
  std::int64_t n = 0;
  std::size_t trial = 0;
};

/// One JSON object per iteration record; undefined (NaN) scalars become null.
void write_trace_jsonl(std::ostream& out, const SolverTrace& trace, const RunTag& tag, const Provenance& prov);
/// Scalars of a general-recursion run, one object per iteration.
void write_general_jsonl(std::ostream& out, const std::vector<GeneralState>& states, const std::string& algorithm,
                         const RunTag& tag, const Provenance& prov);
void write_records_jsonl(std::ostream& out, const std::vector<TrialRecord>& records, const Provenance& prov);

/// Columns k, alpha1, ..., mse_z1; stderr_<field> columns follow when present. NaN cells are empty.
void write_se_csv(std::ostream& out, const SETrajectory& se);
/// Columns N, k, functional, count, median_dev, mean_dev, q10, q25, q75, q90, p_tail@<eps>..., slope.
void write_summary_csv(std::ostream& out, const DeviationSummary& summary);

std::string translation_report_json(const TranslationReport& report, const Provenance& prov);
std::string provenance_json(const Provenance& prov);
/// Writes `text` to path and the provenance to path + ".provenance.json".
void write_with_sidecar(const std::string& path, const std::string& text, const Provenance& prov);
void write_text_file(const std::string& path, const std::string& text);

/// RFC 4180 field quoting.
std::string csv_escape(const std::string& field);
std::string csv_line(const std::vector<std::string>& fields);
/// Parses RFC 4180 text (quoted fields, embedded commas, doubled quotes, CRLF or LF).
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

/// Long-format (x, y, series) tables keyed by figure name, from a summary CSV:
/// "median_deviation" and one "tail_<eps>" per tail column. An empty summary yields
/// "median_deviation" with only the header.
std::map<std::string, std::string> plotdata_from_summary(const std::string& summary_csv);

}  // namespace mpforge
