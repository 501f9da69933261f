#include "atnl/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "atnl/data.hpp"

namespace atnl {

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_f6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string format_opt_f6(const std::optional<double>& v) {
    return v ? format_f6(*v) : std::string();
}

namespace {

void append_nested_array(std::string& out, const Tensor& t) {
    // rank-1: [a, b, ...]; rank-2: [[row], [row], ...]
    if (t.rank() == 1) {
        out += '[';
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (i) out += ',';
            out += format_g17(t[i]);
        }
        out += ']';
        return;
    }
    out += '[';
    for (std::size_t i = 0; i < t.rows(); ++i) {
        if (i) out += ',';
        out += '[';
        auto row = t.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out += ',';
            out += format_g17(row[j]);
        }
        out += ']';
    }
    out += ']';
}

const char* opt_kind_name(OptKind k) {
    return k == OptKind::sgd_momentum ? "sgd_momentum" : "adam";
}

} // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::string out = "{\n  \"format\": \"atnl-checkpoint-v1\",\n  \"layer_sizes\": [";
    for (std::size_t i = 0; i < ckpt.model.layer_sizes.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(ckpt.model.layer_sizes[i]);
    }
    out += "],\n  \"weights\": [";
    for (std::size_t l = 0; l < ckpt.model.weights.size(); ++l) {
        if (l) out += ',';
        out += "\n    ";
        append_nested_array(out, ckpt.model.weights[l]);
    }
    out += "\n  ],\n  \"biases\": [";
    for (std::size_t l = 0; l < ckpt.model.biases.size(); ++l) {
        if (l) out += ',';
        out += "\n    ";
        append_nested_array(out, ckpt.model.biases[l]);
    }
    out += "\n  ],\n  \"optimizer\": {\"kind\": \"";
    out += opt_kind_name(ckpt.optimizer_kind);
    out += "\", \"step_count\": ";
    out += std::to_string(ckpt.step_count);
    out += "},\n  \"seed_lineage\": {";
    bool first = true;
    for (const auto& [label, seed] : ckpt.seed_lineage) {
        if (!first) out += ", ";
        first = false;
        out += '"';
        out += label;
        out += "\": ";
        out += std::to_string(seed);
    }
    out += "}\n}\n";
    write_text_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path + ": not a valid checkpoint: " + e.what());
    }
    if (!j.is_object() || j.value("format", "") != "atnl-checkpoint-v1") {
        throw FormatError(path + ": missing checkpoint format marker");
    }
    Checkpoint ckpt;
    try {
        ckpt.model.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
        const auto& ws = j.at("weights");
        const auto& bs = j.at("biases");
        if (ckpt.model.layer_sizes.size() < 2 || ws.size() != ckpt.model.layer_sizes.size() - 1 ||
            bs.size() != ws.size()) {
            throw FormatError(path + ": layer structure inconsistent");
        }
        for (std::size_t l = 0; l < ws.size(); ++l) {
            const std::size_t din = ckpt.model.layer_sizes[l], dout = ckpt.model.layer_sizes[l + 1];
            std::vector<double> wdata;
            wdata.reserve(din * dout);
            if (ws[l].size() != din) throw FormatError(path + ": weight row count mismatch");
            for (const auto& row : ws[l]) {
                if (row.size() != dout) throw FormatError(path + ": weight column count mismatch");
                for (const auto& v : row) wdata.push_back(v.get<double>());
            }
            ckpt.model.weights.emplace_back(Tensor({din, dout}, std::move(wdata)));
            std::vector<double> bdata = bs[l].get<std::vector<double>>();
            if (bdata.size() != dout) throw FormatError(path + ": bias length mismatch");
            ckpt.model.biases.emplace_back(Tensor({dout}, std::move(bdata)));
        }
        const auto& opt = j.at("optimizer");
        const std::string kind = opt.at("kind").get<std::string>();
        if (kind == "sgd_momentum") {
            ckpt.optimizer_kind = OptKind::sgd_momentum;
        } else if (kind == "adam") {
            ckpt.optimizer_kind = OptKind::adam;
        } else {
            throw FormatError(path + ": unknown optimizer kind '" + kind + "'");
        }
        ckpt.step_count = opt.at("step_count").get<long>();
        if (j.contains("seed_lineage")) {
            for (const auto& [label, seed] : j.at("seed_lineage").items()) {
                ckpt.seed_lineage[label] = seed.get<std::uint64_t>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path + ": malformed checkpoint: " + e.what());
    }
    return ckpt;
}

std::string metrics_csv(const std::vector<EpochMetrics>& metrics) {
    std::string out =
        "epoch,train_acc_correct,train_acc_incorrect,test_acc_natural,test_acc_robust,"
        "mean_loss_correct,mean_loss_incorrect,mean_kappa_correct,mean_kappa_incorrect\n";
    for (const auto& m : metrics) {
        out += std::to_string(m.epoch);
        for (const auto* field : {&m.train_acc_correct, &m.train_acc_incorrect, &m.test_acc_natural,
                                  &m.test_acc_robust, &m.mean_loss_correct, &m.mean_loss_incorrect,
                                  &m.mean_kappa_correct, &m.mean_kappa_incorrect}) {
            out += ',';
            out += format_opt_f6(*field);
        }
        out += '\n';
    }
    return out;
}

std::string sample_table_csv(const std::vector<SampleRecord>& table) {
    std::string out = "index,observed,true,corrupted,loss,loss_norm,kappa,kappa_norm,predicted\n";
    for (const auto& r : table) {
        out += std::to_string(r.index);
        out += ',' + std::to_string(r.observed);
        out += ',' + std::to_string(r.truth);
        out += ',' + std::to_string(r.corrupted ? 1 : 0);
        out += ',' + format_f6(r.loss);
        out += ',' + format_f6(r.loss_norm);
        out += ',' + std::to_string(r.kappa);
        out += ',' + format_f6(r.kappa_norm);
        out += ',' + std::to_string(r.predicted);
        out += '\n';
    }
    return out;
}

std::string histogram_csv(const std::vector<HistogramRow>& rows) {
    std::string out = "bin_low,bin_high,count_correct,count_incorrect\n";
    for (const auto& r : rows) {
        out += format_f6(r.bin_low);
        out += ',' + format_f6(r.bin_high);
        out += ',' + std::to_string(r.count_correct);
        out += ',' + std::to_string(r.count_incorrect);
        out += '\n';
    }
    return out;
}

std::string relabel_log_csv(const std::vector<RelabelEvent>& log) {
    std::string out = "epoch,batch,index,old_label,new_label,kappa,loss\n";
    for (const auto& e : log) {
        out += std::to_string(e.epoch);
        out += ',' + std::to_string(e.batch);
        out += ',' + std::to_string(e.index);
        out += ',' + std::to_string(e.old_label);
        out += ',' + std::to_string(e.new_label);
        out += ',' + std::to_string(e.kappa);
        out += ',' + format_f6(e.loss);
        out += '\n';
    }
    return out;
}

std::string annotation_report_csv(const AnnotateOutput& out, std::span<const int> true_labels) {
    std::string csv = "index,assigned,kappa,perturbed,correct\n";
    for (std::size_t i = 0; i < out.results.size(); ++i) {
        const auto& r = out.results[i];
        csv += std::to_string(r.sample_index);
        csv += ',' + std::to_string(r.assigned_label);
        csv += ',' + std::to_string(r.kappa);
        csv += ',' + std::to_string(out.perturbed[i] ? 1 : 0);
        csv += ',';
        if (!true_labels.empty()) {
            csv += std::to_string(r.assigned_label == true_labels[i] ? 1 : 0);
        }
        csv += '\n';
    }
    return csv;
}

std::string confidence_report_csv(const std::vector<ConfidenceBin>& bins) {
    std::string out = "kappa_bin,count,accuracy\n";
    for (const auto& b : bins) {
        out += std::to_string(b.kappa);
        out += ',' + std::to_string(b.count);
        out += ',' + format_opt_f6(b.accuracy);
        out += '\n';
    }
    return out;
}

std::string ranking_csv(const std::vector<std::size_t>& order, const std::vector<SampleRecord>& table) {
    std::vector<std::size_t> where(table.size());
    for (std::size_t pos = 0; pos < table.size(); ++pos) where[table[pos].index] = pos;
    std::string out = "rank,index,kappa,loss\n";
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const SampleRecord& r = table[where[order[rank]]];
        out += std::to_string(rank);
        out += ',' + std::to_string(r.index);
        out += ',' + std::to_string(r.kappa);
        out += ',' + format_f6(r.loss);
        out += '\n';
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("short write to " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace atnl
