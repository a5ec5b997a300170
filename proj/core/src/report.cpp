// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsflow/report.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace tsflow {

namespace {

using nlohmann::json;

void row(std::ostringstream& out, const std::string& id, const MetricValues& v) {
    out << id << ',' << format_number(v.mae) << ',' << format_number(v.rmse) << ',' << format_number(v.sam_degrees)
        << ',' << format_number(v.psnr_db) << ',' << format_number(v.ssim) << ',' << v.masked_pixels << ','
        << v.ssim_frames << '\n';
}

void trend_rows(std::ostringstream& out, const std::string& id, const char* source,
                const std::vector<TrajectoryPoint>& points) {
    for (const auto& p : points)
        out << id << ',' << p.date << ',' << source << ',' << format_number(p.mean) << ','
            << format_number(p.median) << ',' << format_number(p.q25) << ',' << format_number(p.q75) << '\n';
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

}  // namespace

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string report_csv(const MetricReport& report) {
    std::ostringstream out;
    out << "id,mae,rmse,sam_deg,psnr_db,ssim,masked_pixels,ssim_frames\n";
    for (const auto& r : report.rows) row(out, r.id, r.values);
    row(out, "aggregate", report.aggregate);
    return out.str();
}

std::string report_json(const MetricReport& report) {
    json j;
    j["protocol"] = report.protocol;
    j["method"] = report.method;
    j["sequences"] = report.rows.size();
    const MetricValues& a = report.aggregate;
    j["aggregate"] = {{"mae", a.mae},         {"rmse", a.rmse},   {"sam_deg", a.sam_degrees},
                      {"psnr_db", a.psnr_db}, {"ssim", a.ssim},   {"masked_pixels", a.masked_pixels},
                      {"ssim_frames", a.ssim_frames}};
    j["metadata"] = report.metadata;
    return j.dump(2) + "\n";
}

void write_report(const std::filesystem::path& dir, const std::string& stem, const MetricReport& report) {
    std::filesystem::create_directories(dir);
    write_file(dir / (stem + ".csv"), report_csv(report));
    write_file(dir / (stem + ".json"), report_json(report));
}

std::string loss_curve_csv(const std::vector<EpochRecord>& history) {
    std::ostringstream out;
    out << "epoch,loss,lr,steps\n";
    for (const auto& h : history)
        out << h.epoch << ',' << format_number(h.mean_loss) << ',' << format_number(h.lr) << ',' << h.steps << '\n';
    return out.str();
}

std::string trends_csv(const std::vector<AnytimeTrend>& trends) {
    std::ostringstream out;
    out << "id,date,source,mean,median,q25,q75\n";
    for (const auto& t : trends) {
        trend_rows(out, t.id, "generated", t.generated);
        trend_rows(out, t.id, "oracle", t.oracle);
        trend_rows(out, t.id, "linear", t.baseline);
    }
    return out.str();
}

}  // namespace tsflow
