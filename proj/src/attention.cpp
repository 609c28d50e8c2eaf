#include "phrec/attention.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "phrec/common.hpp"
#include "phrec/labeler.hpp"

namespace phrec {

using nlohmann::json;

void record_attention(AttentionTrace& trace, int epoch, const Tensor& A) {
    if (A.rows() == 0 || A.cols() != trace.units.size())
        throw DataError("record_attention: matrix " + A.shape_str() + " does not match the " +
                        std::to_string(trace.units.size()) + " tracked units of '" +
                        trace.article_id + "'");
    if (!trace.epochs.empty() && epoch <= trace.epochs.back().epoch)
        throw DataError("record_attention: epoch " + std::to_string(epoch) +
                        " not after previously recorded epoch " +
                        std::to_string(trace.epochs.back().epoch));
    for (std::size_t i = 0; i < A.rows(); ++i) {
        Real sum = 0;
        for (std::size_t j = 0; j < A.cols(); ++j) sum += A.at(i, j);
        if (std::abs(sum - Real(1)) > Real(1e-6))
            throw DataError("record_attention: row " + std::to_string(i) + " sums to " +
                            std::to_string(static_cast<double>(sum)) + ", expected 1");
    }
    trace.epochs.push_back({epoch, A});
}

std::vector<Real> aggregate_intensity(const Tensor& A) {
    std::vector<Real> col(A.cols(), Real(0));
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < A.cols(); ++j) col[j] += A.at(i, j);
    Real mx = 0;
    for (Real v : col) mx = std::max(mx, v);
    if (mx > Real(0))
        for (Real& v : col) v /= mx;
    return col;
}

Real attention_entropy(const Tensor& A) {
    std::vector<Real> col(A.cols(), Real(0));
    Real total = 0;
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < A.cols(); ++j) {
            col[j] += A.at(i, j);
            total += A.at(i, j);
        }
    Real h = 0;
    for (Real v : col) {
        if (v <= Real(0)) continue;
        const Real p = v / total;
        h -= p * std::log(p);
    }
    return h;
}

namespace {

std::string escape_html(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

} // namespace

std::string emit_heatmap_html(const AttentionTrace& trace) {
    if (trace.epochs.empty())
        throw DataError("emit_heatmap: trace for '" + trace.article_id + "' has no recorded epochs");
    std::ostringstream os;
    os << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
       << "<title>attention: " << escape_html(trace.article_id) << "</title>\n"
       << "<style>\n"
       << "body { font-family: sans-serif; margin: 2em; max-width: 60em; }\n"
       << "section { margin-bottom: 1.5em; }\n"
       << "h2 { font-size: 1em; color: #444; }\n"
       << ".units { line-height: 1.9; }\n"
       << ".unit { padding: 1px 3px; border-radius: 3px; }\n"
       << ".phrase { border-bottom: 2px solid #c96; }\n"
       << "</style>\n</head>\n<body>\n"
       << "<h1>" << escape_html(trace.article_id) << " (" << to_string(trace.level)
       << " level)</h1>\n";
    char buf[32];
    for (const auto& entry : trace.epochs) {
        os << "<section>\n<h2>epoch " << entry.epoch << "</h2>\n<p class=\"units\">";
        const auto intensity = aggregate_intensity(entry.A);
        for (std::size_t j = 0; j < trace.units.size(); ++j) {
            const bool is_phrase = split_phrase_unit(trace.units[j]).size() >= 2;
            std::snprintf(buf, sizeof(buf), "%.6f", static_cast<double>(intensity[j]));
            os << "<span class=\"unit" << (is_phrase ? " phrase" : "")
               << "\" style=\"background-color: rgba(255,140,0," << buf << ")\">"
               << escape_html(trace.units[j]) << "</span> ";
        }
        os << "</p>\n</section>\n";
    }
    os << "</body>\n</html>\n";
    return os.str();
}

void save_trace_json(const std::string& path, const AttentionTrace& trace) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write trace file '" + path + "'");
    json j;
    j["article_id"] = trace.article_id;
    j["level"] = to_string(trace.level);
    j["units"] = trace.units;
    json epochs = json::array();
    for (const auto& e : trace.epochs) {
        json rows = json::array();
        for (std::size_t i = 0; i < e.A.rows(); ++i) {
            json row = json::array();
            for (std::size_t c = 0; c < e.A.cols(); ++c) row.push_back(e.A.at(i, c));
            rows.push_back(std::move(row));
        }
        epochs.push_back(json{{"epoch", e.epoch}, {"A", std::move(rows)}});
    }
    j["epochs"] = std::move(epochs);
    out << j.dump(2) << '\n';
}

AttentionTrace load_trace_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open trace file '" + path + "'");
    json j;
    try {
        in >> j;
        AttentionTrace trace;
        trace.article_id = j.at("article_id").get<std::string>();
        trace.level = unit_level_from_string(j.at("level").get<std::string>());
        trace.units = j.at("units").get<std::vector<std::string>>();
        for (const auto& e : j.at("epochs")) {
            const auto& rows = e.at("A");
            const std::size_t r = rows.size();
            const std::size_t n = r ? rows[0].size() : 0;
            Tensor A = Tensor::matrix(r, n);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t c = 0; c < n; ++c) A.at(i, c) = rows[i][c].get<Real>();
            record_attention(trace, e.at("epoch").get<int>(), A);
        }
        return trace;
    } catch (const json::exception& e) {
        throw DataError(path + ": parse error: " + e.what());
    }
}

} // namespace phrec
