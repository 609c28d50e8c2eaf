#ifndef PHREC_ATTENTION_HPP
#define PHREC_ATTENTION_HPP

#include <string>
#include <vector>

#include "phrec/article.hpp"
#include "phrec/tensor.hpp"

namespace phrec {

// Per-epoch r x n attention matrices recorded for one tracked article.
struct AttentionTrace {
    std::string article_id;
    UnitLevel level = UnitLevel::word;
    std::vector<std::string> units; // the n displayed units

    struct EpochEntry {
        int epoch = 0;
        Tensor A; // r x n, rows normalized
    };
    std::vector<EpochEntry> epochs;
};

// Appends one epoch; epochs must be strictly increasing, A must be r x n with
// rows summing to 1 within 1e-6.
void record_attention(AttentionTrace& trace, int epoch, const Tensor& A);

// Column sums scaled so the largest intensity is exactly 1.
std::vector<Real> aggregate_intensity(const Tensor& A);

// Shannon entropy (natural log) of the normalized column-sum distribution.
Real attention_entropy(const Tensor& A);

// Self-contained HTML document: one section per epoch, each unit tinted with
// background opacity equal to its intensity, phrase units delimited.
std::string emit_heatmap_html(const AttentionTrace& trace);

void save_trace_json(const std::string& path, const AttentionTrace& trace);
AttentionTrace load_trace_json(const std::string& path);

} // namespace phrec

#endif
