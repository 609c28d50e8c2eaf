#ifndef PHREC_INSTANCES_HPP
#define PHREC_INSTANCES_HPP

#include <string>
#include <vector>

namespace phrec {

enum class PairLabel { positive, negative };

struct ArticlePair {
    std::string a_c; // article being read
    std::string a_r; // candidate next article
    PairLabel label = PairLabel::positive;
};

// One positive pair plus m negatives sharing the same a_c.
struct EvalInstance {
    std::string a_c;
    std::string pos;
    std::vector<std::string> negs;
};

// One scored candidate for a recommendation list.
struct PairScore {
    std::string a_c;
    std::string a_r;
    double score = 0;
};

// JSON-lines {a_c, pos, negs:[...]}.
void save_instances(const std::string& path, const std::vector<EvalInstance>& instances);
std::vector<EvalInstance> load_instances(const std::string& path);

} // namespace phrec

#endif
