#include "finmeta/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <system_error>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

namespace finmeta::io {

ParseError::ParseError(std::string source, std::size_t line, const std::string& message)
    : std::runtime_error(fmt::format("{}:{}: {}", source, line, message)), source_(std::move(source)), line_(line) {}

std::string format_p(double p) { return fmt::format("{:.16e}", p); }

std::string format_real(double x) { return fmt::format("{:.6g}", x); }

namespace {

// Line-oriented reader for tab-separated text with a fixed header.
class TsvReader {
public:
  TsvReader(std::istream& in, std::string_view source) : in_(in), source_(source) {}

  [[noreturn]] void fail(const std::string& message) const { throw ParseError(source_, line_no_, message); }

  std::vector<std::string> header() {
    if (!next()) {
      line_no_ = 1;
      fail("empty file, expected a header line");
    }
    return fields_;
  }

  void expect_header(std::string_view expected) {
    header();
    if (line_ != expected) fail(fmt::format("unexpected header (expected \"{}\")", escape(expected)));
  }

  /// Advances to the next non-empty line; false at end of input.
  bool next() {
    while (std::getline(in_, line_)) {
      ++line_no_;
      if (!line_.empty() && line_.back() == '\r') line_.pop_back();
      if (line_.empty()) continue;
      split();
      return true;
    }
    return false;
  }

  const std::vector<std::string>& fields() const { return fields_; }
  std::size_t line_no() const { return line_no_; }

  void expect_columns(std::size_t n) const {
    if (fields_.size() != n) fail(fmt::format("expected {} tab-separated columns, found {}", n, fields_.size()));
  }

  double real(std::size_t col, std::string_view what) const {
    const std::string& text = fields_[col];
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
      fail(fmt::format("{} '{}' is not a finite number", what, text));
    }
    return value;
  }

  template <typename Int>
  Int integer(std::size_t col, std::string_view what) const {
    const std::string& text = fields_[col];
    Int value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) fail(fmt::format("{} '{}' is not an integer", what, text));
    return value;
  }

  const std::string& id(std::size_t col, std::string_view what) const {
    if (fields_[col].empty()) fail(fmt::format("empty {}", what));
    return fields_[col];
  }

private:
  static std::string escape(std::string_view s) {
    std::string out;
    for (char c : s) {
      if (c == '\t') out += "\\t";
      else out.push_back(c);
    }
    return out;
  }

  void split() {
    fields_.clear();
    std::size_t start = 0;
    while (true) {
      const auto tab = line_.find('\t', start);
      fields_.push_back(line_.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
  }

  std::istream& in_;
  std::string source_;
  std::string line_;
  std::vector<std::string> fields_;
  std::size_t line_no_ = 0;
};

}  // namespace

Manifest parse_manifest(std::istream& in, std::string_view source) {
  TsvReader reader(in, source);
  reader.expect_header(kManifestHeader);
  std::vector<StudyMeta> studies;
  std::unordered_set<std::string> seen;
  while (reader.next()) {
    reader.expect_columns(3);
    StudyMeta s{reader.id(0, "study id"), reader.integer<int>(1, "replicates_case"),
                reader.integer<int>(2, "replicates_control")};
    if (s.replicates_case < 1 || s.replicates_control < 1) reader.fail("replicate counts must be positive integers");
    if (!seen.insert(s.study_id).second) reader.fail(fmt::format("duplicate study id '{}'", s.study_id));
    studies.push_back(std::move(s));
  }
  if (studies.empty()) throw ParseError(std::string(source), reader.line_no(), "manifest lists no studies");
  return Manifest(std::move(studies));
}

std::string format_manifest(const Manifest& manifest) {
  std::string out = fmt::format("{}\n", kManifestHeader);
  for (const auto& s : manifest.studies()) {
    out += fmt::format("{}\t{}\t{}\n", s.study_id, s.replicates_case, s.replicates_control);
  }
  return out;
}

std::vector<GeneEvidence> parse_summary_stats(std::istream& in, const Manifest& manifest, std::string_view source) {
  TsvReader reader(in, source);
  reader.expect_header(kStatsHeader);
  std::vector<GeneEvidence> genes;
  std::unordered_map<std::string, std::size_t> index;
  while (reader.next()) {
    reader.expect_columns(4);
    const auto& gene_id = reader.id(0, "gene id");
    const auto& study_id = reader.id(1, "study id");
    const auto study = manifest.find(study_id);
    if (!study) reader.fail(fmt::format("study '{}' is not in the manifest", study_id));
    const double p = reader.real(2, "p_value");
    if (!(p >= 0.0 && p <= 1.0)) reader.fail(fmt::format("p_value {} outside [0, 1]", reader.fields()[2]));
    const double lfc = reader.real(3, "log2fc");

    auto [it, inserted] = index.emplace(gene_id, genes.size());
    if (inserted) genes.push_back(GeneEvidence{gene_id, {}});
    auto& gene = genes[it->second];
    for (const auto& e : gene.entries) {
      if (e.study == *study) reader.fail(fmt::format("duplicate row for gene '{}' in study '{}'", gene_id, study_id));
    }
    gene.entries.push_back(EvidenceEntry{*study, p, lfc});
  }
  return genes;
}

std::string format_summary_stats(std::span<const GeneEvidence> genes, const Manifest& manifest) {
  std::string out = fmt::format("{}\n", kStatsHeader);
  for (const auto& g : genes) {
    for (const auto& e : g.entries) {
      out += fmt::format("{}\t{}\t{}\t{}\n", g.gene_id, manifest[e.study].study_id, format_p(e.p_raw),
                         format_real(e.log2fc));
    }
  }
  return out;
}

std::string format_per_study_rows(std::string_view study_id, std::span<const PerStudyResult> results,
                                  bool with_header) {
  std::string out = with_header ? fmt::format("{}\n", kStatsHeader) : std::string{};
  for (const auto& r : results) {
    if (r.filtered || !r.p_raw) continue;
    out += fmt::format("{}\t{}\t{}\t{}\n", r.gene_id, study_id, format_p(*r.p_raw), format_real(r.log2fc));
  }
  return out;
}

std::map<std::string, double> parse_weights(std::istream& in, std::string_view source) {
  TsvReader reader(in, source);
  reader.expect_header(kWeightsHeader);
  std::map<std::string, double> weights;
  while (reader.next()) {
    reader.expect_columns(2);
    const auto& id = reader.id(0, "study id");
    const double w = reader.real(1, "weight");
    if (!(w > 0.0)) reader.fail("weights must be positive");
    if (!weights.emplace(id, w).second) reader.fail(fmt::format("duplicate study id '{}'", id));
  }
  return weights;
}

std::string format_deg_table(std::span<const DegRecord> degs) {
  std::string out = fmt::format("{}\n", kDegHeader);
  for (const auto& d : degs) {
    out += fmt::format("{}\t{}\t{}\t{}\t{}\n", d.gene_id, format_real(d.n_g), format_real(d.mean_abs_log2fc),
                       d.effect_string, format_p(d.p_bh));
  }
  return out;
}

std::vector<DegRecord> parse_deg_table(std::istream& in, std::string_view source) {
  TsvReader reader(in, source);
  reader.expect_header(kDegHeader);
  std::vector<DegRecord> degs;
  std::size_t width = 0;
  while (reader.next()) {
    reader.expect_columns(5);
    DegRecord d;
    d.gene_id = reader.id(0, "gene id");
    d.n_g = reader.real(1, "N_g");
    d.mean_abs_log2fc = reader.real(2, "mean_abs_log2fc");
    d.effect_string = reader.id(3, "effect");
    d.p_bh = reader.real(4, "bh_p");
    if (d.effect_string.find_first_not_of("+-.") != std::string::npos) reader.fail("effect may only contain + - .");
    if (width == 0) width = d.effect_string.size();
    if (d.effect_string.size() != width) reader.fail("effect strings differ in length");
    const bool up = d.effect_string.find('+') != std::string::npos;
    const bool down = d.effect_string.find('-') != std::string::npos;
    if (!up && !down) reader.fail("effect string marks every study absent");
    d.concordant = !(up && down);
    d.effective_direction = d.concordant ? (up ? +1 : -1) : (d.n_g < 0.0 ? -1 : +1);
    degs.push_back(std::move(d));
  }
  return degs;
}

std::string format_results(std::span<const CombinedResult> results) {
  std::string out = fmt::format("{}\n", kResultsHeader);
  for (const auto& r : results) {
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.gene_id, format_real(r.n_g), format_real(r.mean_abs_log2fc),
                       effect_string(r.directions), format_p(r.p_combined), r.p_bh ? format_p(*r.p_bh) : "NA",
                       r.concordant ? 1 : 0, r.n_present);
  }
  return out;
}

CountsMatrix parse_counts(std::istream& counts, std::istream& conditions, std::string_view counts_source,
                          std::string_view conditions_source) {
  TsvReader cond_reader(conditions, conditions_source);
  cond_reader.expect_header(kConditionsHeader);
  std::unordered_map<std::string, Condition> labels;
  while (cond_reader.next()) {
    cond_reader.expect_columns(2);
    const auto& id = cond_reader.id(0, "sample id");
    Condition c{};
    try {
      c = parse_condition(cond_reader.fields()[1]);
    } catch (const std::invalid_argument& e) {
      cond_reader.fail(e.what());
    }
    if (!labels.emplace(id, c).second) cond_reader.fail(fmt::format("duplicate sample id '{}'", id));
  }

  TsvReader reader(counts, counts_source);
  const auto header = reader.header();
  if (header.empty() || header.front() != "gene_id" || header.size() < 3) {
    reader.fail("header must be \"gene_id\" followed by at least two sample ids");
  }
  std::vector<std::string> samples(header.begin() + 1, header.end());
  std::vector<Condition> sample_conditions;
  std::vector<std::string> missing;
  std::unordered_set<std::string> seen_samples;
  for (const auto& s : samples) {
    if (s.empty()) reader.fail("empty sample id in header");
    if (!seen_samples.insert(s).second) reader.fail(fmt::format("duplicate sample id '{}'", s));
    auto it = labels.find(s);
    if (it == labels.end()) {
      missing.push_back(s);
    } else {
      sample_conditions.push_back(it->second);
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw ParseError(std::string(conditions_source), cond_reader.line_no(),
                     fmt::format("no condition for sample(s): {}", list));
  }
  std::vector<std::string> extra;
  for (const auto& [id, c] : labels) {
    if (!seen_samples.contains(id)) extra.push_back(id);
  }
  if (!extra.empty()) {
    std::sort(extra.begin(), extra.end());
    std::string list;
    for (const auto& m : extra) list += (list.empty() ? "" : ", ") + m;
    throw ParseError(std::string(conditions_source), cond_reader.line_no(),
                     fmt::format("sample(s) not present in the counts file: {}", list));
  }

  std::vector<std::string> genes;
  std::vector<std::uint64_t> data;
  std::unordered_set<std::string> seen_genes;
  while (reader.next()) {
    reader.expect_columns(samples.size() + 1);
    const auto& gene = reader.id(0, "gene id");
    if (!seen_genes.insert(gene).second) reader.fail(fmt::format("duplicate gene id '{}'", gene));
    genes.push_back(gene);
    for (std::size_t j = 1; j <= samples.size(); ++j) data.push_back(reader.integer<std::uint64_t>(j, "count"));
  }
  try {
    return CountsMatrix(std::move(genes), std::move(samples), std::move(sample_conditions), std::move(data));
  } catch (const std::domain_error& e) {
    throw ParseError(std::string(counts_source), reader.line_no(), e.what());
  }
}

std::string format_counts(const CountsMatrix& m) {
  std::string out = "gene_id";
  for (const auto& s : m.sample_ids()) out += "\t" + s;
  out += "\n";
  for (std::size_t g = 0; g < m.n_genes(); ++g) {
    out += m.gene_ids()[g];
    for (auto c : m.row(g)) out += fmt::format("\t{}", c);
    out += "\n";
  }
  return out;
}

std::string format_conditions(const CountsMatrix& m) {
  std::string out = fmt::format("{}\n", kConditionsHeader);
  for (std::size_t j = 0; j < m.n_samples(); ++j) {
    out += fmt::format("{}\t{}\n", m.sample_ids()[j], to_string(m.conditions()[j]));
  }
  return out;
}

std::string format_truth(const SimTruth& truth) {
  std::string out = fmt::format("{}\n", kTruthHeader);
  for (std::size_t g = 0; g < truth.genes.size(); ++g) {
    out += fmt::format("{}\t{}\t{}\n", truth.gene_ids[g], truth.genes[g].is_de ? 1 : 0,
                       fmt::format("{:.17g}", truth.genes[g].delta));
  }
  return out;
}

SimTruth parse_truth(std::istream& in, std::string_view source) {
  TsvReader reader(in, source);
  reader.expect_header(kTruthHeader);
  SimTruth truth;
  while (reader.next()) {
    reader.expect_columns(3);
    GeneTruth t;
    const int flag = reader.integer<int>(1, "is_de");
    if (flag != 0 && flag != 1) reader.fail("is_de must be 0 or 1");
    t.is_de = flag == 1;
    t.delta = reader.real(2, "delta");
    if (t.is_de != (t.delta != 0.0)) reader.fail("is_de must be 1 exactly when delta is nonzero");
    t.true_direction = t.delta < 0.0 ? -1 : +1;
    truth.gene_ids.push_back(reader.id(0, "gene id"));
    truth.genes.push_back(t);
  }
  return truth;
}

std::string format_roc(const RocCurve& curve) {
  std::string out = "fpr\ttpr\n";
  for (const auto& p : curve.points) out += fmt::format("{}\t{}\n", format_real(p.fpr), format_real(p.tpr));
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace finmeta::io
