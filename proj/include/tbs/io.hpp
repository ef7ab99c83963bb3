#ifndef TBS_IO_HPP
#define TBS_IO_HPP

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tbs/model.hpp"
#include "tbs/samplers.hpp"

namespace tbs::io {

using nlohmann::json;

/// Malformed input file. row and column are 1-based positions in the file
/// (the header is row 1); 0 when not applicable.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : std::runtime_error(what + " (row " + std::to_string(row) + ", column " +
                           std::to_string(column) + ")"),
        row_(row),
        column_(column) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_, column_;
};

/// RFC-4180 records: quoted fields, doubled quotes, CRLF or LF line ends.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

struct IngestOptions {
  std::string response = "y";
  std::vector<std::string> covariates;   // empty: every other column
  std::vector<std::string> standardize;  // "*" standardises all covariates
  bool standardize_response = false;
};

struct IngestResult {
  Dataset data;
  std::size_t dropped_rows = 0;               // rows with a missing cell
  std::vector<std::size_t> dropped_row_numbers;  // 1-based file rows
};

/// A cell is missing when empty or one of NA, NaN, null (any case). Rows
/// with a missing cell in a used column are dropped and counted. A zero
/// response is rejected with the offending file row.
IngestResult ingest_csv_text(std::string_view text, const IngestOptions& opt);
IngestResult ingest_csv(const std::filesystem::path& path,
                        const IngestOptions& opt);

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

/// Quotes a field when it contains a comma, quote or line break.
std::string csv_field(std::string_view s);

/// Header plus rows, LF line ends.
std::string csv_text(const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows);

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);

/// Whole-file write through a single stream; parent directories are created.
void write_file(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

json to_json(const mcmc::McmcConfig& c);
json to_json(const PriorHyper& h);
json to_json(const ParamState& s);

/// Overlays the keys present in j; unknown keys are an error.
void apply_json(const json& j, mcmc::McmcConfig& c);
void apply_json(const json& j, PriorHyper& h);
ParamState state_from_json(const json& j);

inline constexpr int kChainFormatVersion = 1;

/// Line 1 is a header record (format, version, variant, config echo,
/// acceptance rates, extra echo); each following line is one draw.
void write_chain(std::ostream& os, const mcmc::ChainOutput& chain,
                 const json& echo = json::object());
mcmc::ChainOutput read_chain(std::istream& is);

struct SummaryContext {
  std::vector<std::string> column_names;
  double ppl = 0.0;
  double ppl_plug_in = 0.0;
};

json summary_json(const mcmc::PosteriorSummary& summary,
                  const mcmc::ChainOutput& chain, const SummaryContext& ctx);

/// Pretty-printed with two-space indent and a trailing newline.
std::string dump(const json& j);

}  // namespace tbs::io

#endif  // TBS_IO_HPP
