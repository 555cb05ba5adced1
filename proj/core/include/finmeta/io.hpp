#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "finmeta/combine.hpp"
#include "finmeta/counts.hpp"
#include "finmeta/degcall.hpp"
#include "finmeta/detest.hpp"
#include "finmeta/evalharness.hpp"
#include "finmeta/simgen.hpp"

/**
 * @file io.hpp
 *
 * @brief Tab-separated file formats.
 *
 * Every format has a fixed header line. Readers report problems as
 * `ParseError` carrying the source name and 1-based line number. Writers
 * produce canonical text: p-values in full-precision scientific notation,
 * other reals with six significant digits, LF line endings.
 */

namespace finmeta::io {

inline constexpr std::string_view kManifestHeader = "study_id\treplicates_case\treplicates_control";
inline constexpr std::string_view kStatsHeader = "gene_id\tstudy_id\tp_value\tlog2fc";
inline constexpr std::string_view kDegHeader = "gene_id\tN_g\tmean_abs_log2fc\teffect\tbh_p";
inline constexpr std::string_view kResultsHeader =
    "gene_id\tN_g\tmean_abs_log2fc\teffect\tp_combined\tbh_p\tconcordant\tn_present";
inline constexpr std::string_view kConditionsHeader = "sample_id\tcondition";
inline constexpr std::string_view kTruthHeader = "gene_id\tis_de\tdelta";
inline constexpr std::string_view kWeightsHeader = "study_id\tweight";

class ParseError : public std::runtime_error {
public:
  ParseError(std::string source, std::size_t line, const std::string& message);

  const std::string& source() const { return source_; }
  std::size_t line() const { return line_; }

private:
  std::string source_;
  std::size_t line_;
};

std::string format_p(double p);
std::string format_real(double x);

Manifest parse_manifest(std::istream& in, std::string_view source = "<manifest>");
std::string format_manifest(const Manifest& manifest);

/// Genes appear in order of first occurrence; entries keep file order.
std::vector<GeneEvidence> parse_summary_stats(std::istream& in, const Manifest& manifest,
                                              std::string_view source = "<stats>");
std::string format_summary_stats(std::span<const GeneEvidence> genes, const Manifest& manifest);

/// Rows for one study's unfiltered genes. The header is optional so that
/// several studies can be appended into one stats file.
std::string format_per_study_rows(std::string_view study_id, std::span<const PerStudyResult> results,
                                  bool with_header);

std::map<std::string, double> parse_weights(std::istream& in, std::string_view source = "<weights>");

std::string format_deg_table(std::span<const DegRecord> degs);
std::vector<DegRecord> parse_deg_table(std::istream& in, std::string_view source = "<deg table>");

std::string format_results(std::span<const CombinedResult> results);

/// Counts file: header "gene_id" then sample ids; conditions sidecar maps
/// every sample id to case or control.
CountsMatrix parse_counts(std::istream& counts, std::istream& conditions, std::string_view counts_source = "<counts>",
                          std::string_view conditions_source = "<conditions>");
std::string format_counts(const CountsMatrix& m);
std::string format_conditions(const CountsMatrix& m);

std::string format_truth(const SimTruth& truth);
SimTruth parse_truth(std::istream& in, std::string_view source = "<truth>");

/// "fpr\ttpr" plot points.
std::string format_roc(const RocCurve& curve);

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace finmeta::io
