#include "clseq/clbench/record.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "clseq/error.hpp"

namespace clseq::clbench {

namespace {

constexpr int kRecordVersion = 1;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        check(os.good(), "record: cannot open for writing: " + tmp);
        os.write(text.data(), static_cast<std::streamsize>(text.size()));
        check(os.good(), "record: write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::string render_wer_matrix_csv(const WerMatrix& m) {
    std::string out = "t,i,wer\n";
    for (int t = 1; t <= m.tasks(); ++t)
        for (int i = 1; i <= t; ++i)
            out += cat(t, ",", i, ",", fmt(m.at(t, i)), "\n");
    return out;
}

WerMatrix parse_wer_matrix_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    check(static_cast<bool>(std::getline(is, line)) && line == "t,i,wer",
          "wer_matrix.csv: missing header");
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        int t = 0, i = 0;
        double wer = 0.0;
        check(std::sscanf(line.c_str(), "%d,%d,%lf", &t, &i, &wer) == 3,
              cat("wer_matrix.csv: line ", line_no, ": malformed row"));
        if (static_cast<int>(rows.size()) < t) rows.resize(t);
        if (static_cast<int>(rows[t - 1].size()) < i) rows[t - 1].resize(i);
        rows[t - 1][i - 1] = wer;
    }
    WerMatrix m;
    for (std::size_t t = 0; t < rows.size(); ++t)
        m.append_row(rows[t], cat("task", t + 1));
    return m;
}

std::string render_metrics_csv(const MetricSeries& s) {
    std::string out = "stage,metric,value\n";
    for (std::size_t i = 0; i < s.awer.size(); ++i)
        out += cat(i + 1, ",awer,", fmt(s.awer[i]), "\n");
    for (std::size_t i = 0; i < s.bwt.size(); ++i)
        out += cat(i + 2, ",bwt,", fmt(s.bwt[i]), "\n");
    if (s.im)
        for (std::size_t i = 0; i < s.im->size(); ++i)
            out += cat(i + 2, ",im,", fmt((*s.im)[i]), "\n");
    if (s.fwt)
        for (std::size_t i = 0; i < s.fwt->size(); ++i)
            out += cat(i + 2, ",fwt,", fmt((*s.fwt)[i]), "\n");
    return out;
}

namespace {

nlohmann::json matrix_to_json(const WerMatrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int t = 1; t <= m.tasks(); ++t) rows.push_back(m.row(t));
    return {{"labels", m.labels()}, {"rows", rows}};
}

WerMatrix matrix_from_json(const nlohmann::json& j) {
    WerMatrix m;
    const auto labels = j.at("labels").get<std::vector<std::string>>();
    const auto& rows = j.at("rows");
    for (std::size_t t = 0; t < rows.size(); ++t)
        m.append_row(rows[t].get<std::vector<double>>(), labels[t]);
    return m;
}

}  // namespace

void save_record(const ExperimentRecord& record, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["version"] = kRecordVersion;
    j["config_hash"] = record.config_hash;
    j["refs_hash"] = record.refs_hash;
    j["strategy"] = record.strategy;
    j["seed"] = record.seed;
    j["language_order"] = record.language_order;
    j["wer_matrix"] = matrix_to_json(record.matrix);
    if (record.refs.has_value())
        j["references"] = {{"joint", record.refs->joint}, {"solo", record.refs->solo}};
    else
        j["references"] = nullptr;
    nlohmann::json metrics;
    metrics["awer"] = record.metrics.awer;
    metrics["bwt"] = record.metrics.bwt;
    metrics["im"] = record.metrics.im ? nlohmann::json(*record.metrics.im) : nullptr;
    metrics["fwt"] = record.metrics.fwt ? nlohmann::json(*record.metrics.fwt) : nullptr;
    j["metrics"] = metrics;
    nlohmann::json clocks = nlohmann::json::array();
    for (const auto& c : record.wall_clock)
        clocks.push_back({{"stage", c.label}, {"seconds", c.seconds}});
    j["wall_clock"] = clocks;
    j["budget_warning"] = record.budget_warning;

    write_text_atomic(dir / "record.json", j.dump(2) + "\n");
    write_text_atomic(dir / "wer_matrix.csv", render_wer_matrix_csv(record.matrix));
    write_text_atomic(dir / "metrics.csv", render_metrics_csv(record.metrics));
}

ExperimentRecord load_record(const std::filesystem::path& json_path) {
    std::ifstream is(json_path);
    check(is.good(), "record: cannot open: " + json_path.string());
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(cat("record: corrupt json in ", json_path.string(), ": ", e.what()));
    }
    check(j.at("version").get<int>() == kRecordVersion, "record: unsupported version");
    ExperimentRecord r;
    r.config_hash = j.at("config_hash").get<std::string>();
    r.refs_hash = j.at("refs_hash").get<std::string>();
    r.strategy = j.at("strategy").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.language_order = j.at("language_order").get<std::vector<std::string>>();
    r.matrix = matrix_from_json(j.at("wer_matrix"));
    if (!j.at("references").is_null()) {
        ReferenceWers refs;
        refs.joint = j["references"].at("joint").get<std::vector<double>>();
        refs.solo = j["references"].at("solo").get<std::vector<double>>();
        r.refs = refs;
    }
    const auto& m = j.at("metrics");
    r.metrics.awer = m.at("awer").get<std::vector<double>>();
    r.metrics.bwt = m.at("bwt").get<std::vector<double>>();
    if (!m.at("im").is_null()) r.metrics.im = m["im"].get<std::vector<double>>();
    if (!m.at("fwt").is_null()) r.metrics.fwt = m["fwt"].get<std::vector<double>>();
    for (const auto& c : j.at("wall_clock"))
        r.wall_clock.push_back({c.at("stage").get<std::string>(),
                                c.at("seconds").get<double>()});
    r.budget_warning = j.at("budget_warning").get<std::string>();
    return r;
}

void emit_plot_data(const ExperimentRecord& record, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto emit = [&](const std::string& name, const std::vector<double>& series,
                    int first_stage) {
        std::string out = "stage,metric,value,std\n";
        for (std::size_t i = 0; i < series.size(); ++i)
            out += cat(first_stage + static_cast<int>(i), ",", name, ",", fmt(series[i]),
                       ",\n");
        write_text_atomic(dir / ("plot_" + name + ".csv"), out);
    };
    emit("awer", record.metrics.awer, 1);
    emit("bwt", record.metrics.bwt, 2);
    if (record.metrics.im) emit("im", *record.metrics.im, 2);
    if (record.metrics.fwt) emit("fwt", *record.metrics.fwt, 2);
}

}  // namespace clseq::clbench
