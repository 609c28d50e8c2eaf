#include "phrec/optim.hpp"

#include <cmath>

namespace phrec::nn {

void Adam::step(const std::vector<Parameter*>& params) {
    ++step_count;
    const Real bc1 = Real(1) - std::pow(beta1, static_cast<Real>(step_count));
    const Real bc2 = Real(1) - std::pow(beta2, static_cast<Real>(step_count));
    for (Parameter* p : params) {
        const std::size_t n = p->value.count();
        if (p->opt_m.size() != n) p->opt_m.assign(n, Real(0));
        if (p->opt_v.size() != n) p->opt_v.assign(n, Real(0));
        for (std::size_t i = 0; i < n; ++i) {
            const Real g = p->grad.values[i];
            p->opt_m[i] = beta1 * p->opt_m[i] + (Real(1) - beta1) * g;
            p->opt_v[i] = beta2 * p->opt_v[i] + (Real(1) - beta2) * g * g;
            const Real mhat = p->opt_m[i] / bc1;
            const Real vhat = p->opt_v[i] / bc2;
            p->value.values[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

void Adagrad::step(const std::vector<Parameter*>& params) {
    for (Parameter* p : params) {
        const std::size_t n = p->value.count();
        if (p->opt_m.size() != n) p->opt_m.assign(n, Real(0));
        for (std::size_t i = 0; i < n; ++i) {
            const Real g = p->grad.values[i];
            p->opt_m[i] += g * g;
            p->value.values[i] -= lr * g / (std::sqrt(p->opt_m[i]) + eps);
        }
    }
}

void zero_grads(const std::vector<Parameter*>& params) {
    for (Parameter* p : params) p->zero_grad();
}

} // namespace phrec::nn
