#include "bbmlab/rng.hpp"

#include <cmath>
#include <numbers>

namespace bbmlab {

double RngStream::normal() {
    if (have_spare_normal_) {
        have_spare_normal_ = false;
        return spare_normal_;
    }
    const double u1 = uniform_pos();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_normal_ = r * std::sin(theta);
    have_spare_normal_ = true;
    return r * std::cos(theta);
}

double RngStream::exponential(double rate) {
    return -std::log(uniform_pos()) / rate;
}

double RngStream::gumbel() {
    return -std::log(-std::log(uniform_pos()));
}

} // namespace bbmlab
