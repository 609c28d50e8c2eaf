#ifndef PHREC_OPTIM_HPP
#define PHREC_OPTIM_HPP

#include <vector>

#include "phrec/tensor.hpp"

namespace phrec::nn {

struct Adam {
    Real lr = 0.001;
    Real beta1 = 0.9;
    Real beta2 = 0.999;
    Real eps = 1e-8;
    long step_count = 0;

    void step(const std::vector<Parameter*>& params);
};

struct Adagrad {
    Real lr = 0.01;
    Real eps = 1e-8;

    void step(const std::vector<Parameter*>& params);
};

void zero_grads(const std::vector<Parameter*>& params);

} // namespace phrec::nn

#endif
