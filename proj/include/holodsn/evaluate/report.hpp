#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "holodsn/core/errors.hpp"
#include "holodsn/core/hvol_io.hpp"
#include "holodsn/evaluate/jaccard.hpp"
#include "holodsn/evaluate/match.hpp"
#include "holodsn/evaluate/weights.hpp"

namespace holodsn {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    write_bytes(path, std::vector<char>(text.begin(), text.end()));
}

inline std::string read_text(const std::filesystem::path& path) {
    const auto b = read_bytes(path);
    return {b.begin(), b.end()};
}

inline const char* label_name(MatchLabel l) {
    switch (l) {
        case MatchLabel::TP: return "TP";
        case MatchLabel::FP: return "FP";
        case MatchLabel::FN: return "FN";
    }
    return "?";
}

inline MatchLabel parse_label(const std::string& s) {
    if (s == "TP") return MatchLabel::TP;
    if (s == "FP") return MatchLabel::FP;
    if (s == "FN") return MatchLabel::FN;
    throw FormatError("unknown match label: " + s);
}

inline nlohmann::ordered_json match_report_json(const MatchReport& r) {
    nlohmann::ordered_json j;
    j["tp"] = r.tp;
    j["fp"] = r.fp;
    j["fn"] = r.fn;
    j["gate_um"] = {r.gate.a, r.gate.b, r.gate.c};
    j["assignment_cost"] = r.assignment_cost;
    auto list = [](const std::vector<Centroid>& cs, const std::vector<MatchLabel>& labels) {
        auto arr = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < cs.size(); ++i) {
            nlohmann::ordered_json e;
            e["pos_um"] = {cs[i].position[0], cs[i].position[1], cs[i].position[2]};
            e["voxels"] = cs[i].voxels;
            e["label"] = label_name(labels[i]);
            arr.push_back(std::move(e));
        }
        return arr;
    };
    j["predictions"] = list(r.pred, r.pred_labels);
    j["ground_truth"] = list(r.gt, r.gt_labels);
    auto pairs = nlohmann::ordered_json::array();
    for (const auto& p : r.pairs) pairs.push_back({{"pred", p.pred}, {"gt", p.gt}, {"d", p.distance}});
    j["pairs"] = std::move(pairs);
    return j;
}

inline MatchReport match_report_from_json(const nlohmann::json& j) {
    try {
        MatchReport r;
        r.tp = j.at("tp").get<std::size_t>();
        r.fp = j.at("fp").get<std::size_t>();
        r.fn = j.at("fn").get<std::size_t>();
        const auto& g = j.at("gate_um");
        r.gate = {g.at(0).get<double>(), g.at(1).get<double>(), g.at(2).get<double>()};
        r.assignment_cost = j.value("assignment_cost", 0.0);
        auto read = [](const nlohmann::json& arr, CentroidSource src, std::vector<Centroid>& cs,
                       std::vector<MatchLabel>& labels) {
            for (const auto& e : arr) {
                const auto& p = e.at("pos_um");
                cs.push_back({{p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()},
                              e.value("voxels", std::size_t{0}), src});
                labels.push_back(parse_label(e.at("label").get<std::string>()));
            }
        };
        read(j.at("predictions"), CentroidSource::Prediction, r.pred, r.pred_labels);
        read(j.at("ground_truth"), CentroidSource::GroundTruth, r.gt, r.gt_labels);
        for (const auto& p : j.at("pairs")) {
            r.pairs.push_back({p.at("pred").get<std::size_t>(), p.at("gt").get<std::size_t>(), p.at("d").get<double>()});
        }
        if (r.tp + r.fp != r.pred.size() || r.tp + r.fn != r.gt.size()) {
            throw FormatError("match report counts disagree with its label lists");
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed match report: ") + e.what());
    }
}

inline void write_match_report(const std::filesystem::path& path, const MatchReport& r) {
    write_text(path, match_report_json(r).dump(2) + "\n");
}

inline MatchReport read_match_report(const std::filesystem::path& path) {
    const auto text = read_text(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return match_report_from_json(j);
}

namespace detail {
inline std::string fmt_num(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os.precision(8);
    os << v;
    return os.str();
}
}  // namespace detail

/// One row per depth bin; absent bins carry nan for mean and std.
inline std::string ji_csv(const JiCurve& c) {
    std::string s = "bin_start_um,mean_ji,std_ji,tp,fp,fn\n";
    for (const auto& b : c.bins) {
        s += detail::fmt_num(b.bin_start_um) + ',' + detail::fmt_num(b.mean_ji) + ',' + detail::fmt_num(b.std_ji) +
             ',' + detail::fmt_num(b.tp) + ',' + detail::fmt_num(b.fp) + ',' + detail::fmt_num(b.fn) + '\n';
    }
    return s;
}

inline std::string weight_csv(const std::map<std::string, WeightStats>& stats) {
    std::string s = "group,count,mean_a1,mean_a2,mean_a3,std_a1,std_a2,std_a3\n";
    for (const auto& [name, st] : stats) {
        s += name + ',' + std::to_string(st.count);
        for (double v : st.mean) s += ',' + detail::fmt_num(v);
        for (double v : st.std) s += ',' + detail::fmt_num(v);
        s += '\n';
    }
    return s;
}

/// Line plot of mean JI against depth with ±std whiskers. Absent bins break the line.
inline std::string ji_svg(const std::vector<std::pair<std::string, JiCurve>>& series, double depth_max_um) {
    constexpr double W = 640, H = 400, L = 60, R = 20, T = 20, B = 50;
    const double pw = W - L - R, ph = H - T - B;
    if (!(depth_max_um > 0.0)) depth_max_um = 1.0;
    auto px = [&](double z) { return L + pw * z / depth_max_um; };
    auto py = [&](double ji) { return T + ph * (1.0 - std::clamp(ji, 0.0, 1.0)); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::ostringstream os;
    os.precision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double v = t / 5.0;
        os << "<text x=\"" << L - 8 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
        os << "<line x1=\"" << L << "\" x2=\"" << L + pw << "\" y1=\"" << py(v) << "\" y2=\"" << py(v)
           << "\" stroke=\"#ddd\"/>\n";
    }
    for (int t = 0; t <= 5; ++t) {
        const double z = depth_max_um * t / 5.0;
        os << "<text x=\"" << px(z) << "\" y=\"" << T + ph + 18 << "\" text-anchor=\"middle\">" << z << "</text>\n";
    }
    os << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">depth (um)</text>\n";
    os << "<text x=\"15\" y=\"" << T + ph / 2 << "\" transform=\"rotate(-90 15 " << T + ph / 2
       << ")\" text-anchor=\"middle\">Jaccard index</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& [name, curve] = series[s];
        const char* col = colors[s % std::size(colors)];
        if (curve.bins.empty()) continue;
        const double width = curve.bins.size() > 1 ? curve.bins[1].bin_start_um - curve.bins[0].bin_start_um
                                                   : depth_max_um;
        std::string path;
        bool pen = false;
        for (const auto& b : curve.bins) {
            if (!b.present()) {
                pen = false;
                continue;
            }
            const double x = px(b.bin_start_um + width / 2);
            std::ostringstream seg;
            seg.precision(6);
            seg << (pen ? " L" : " M") << x << ' ' << py(b.mean_ji);
            path += seg.str();
            pen = true;
            os << "<line x1=\"" << x << "\" x2=\"" << x << "\" y1=\"" << py(b.mean_ji - b.std_ji) << "\" y2=\""
               << py(b.mean_ji + b.std_ji) << "\" stroke=\"" << col << "\"/>\n";
            os << "<circle cx=\"" << x << "\" cy=\"" << py(b.mean_ji) << "\" r=\"3\" fill=\"" << col << "\"/>\n";
        }
        if (!path.empty()) {
            os << "<path d=\"" << path.substr(1) << "\" fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
        }
        os << "<text x=\"" << L + pw - 10 << "\" y=\"" << T + 16 + 16 * s << "\" text-anchor=\"end\" fill=\"" << col
           << "\">" << name << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace holodsn
