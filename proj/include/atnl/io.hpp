#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "atnl/analysis.hpp"
#include "atnl/annotator.hpp"
#include "atnl/model.hpp"
#include "atnl/training.hpp"

namespace atnl {

// Shortest exact decimal is not required; the checkpoint contract is full
// 17-significant-digit form, which round-trips every double exactly.
std::string format_g17(double v);
std::string format_f6(double v);
std::string format_opt_f6(const std::optional<double>& v);

struct Checkpoint {
    Model model;
    OptKind optimizer_kind = OptKind::sgd_momentum;
    long step_count = 0;
    std::map<std::string, std::uint64_t> seed_lineage;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// CSV emitters. Schemas are fixed; all files end with a trailing newline.
std::string metrics_csv(const std::vector<EpochMetrics>& metrics);
std::string sample_table_csv(const std::vector<SampleRecord>& table);
std::string histogram_csv(const std::vector<HistogramRow>& rows);
std::string relabel_log_csv(const std::vector<RelabelEvent>& log);
std::string annotation_report_csv(const AnnotateOutput& out, std::span<const int> true_labels = {});
std::string confidence_report_csv(const std::vector<ConfidenceBin>& bins);
std::string ranking_csv(const std::vector<std::size_t>& order, const std::vector<SampleRecord>& table);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

} // namespace atnl
