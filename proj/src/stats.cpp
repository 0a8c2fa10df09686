#include "sbm/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace sbm {

Stats summarize(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("statistics of an empty set");
    Stats s{values.front(), 0.0, values.front(), values.size()};
    double sum = 0.0;
    for (double v : values) {
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
        sum += v;
    }
    s.mean = sum / static_cast<double>(values.size());
    return s;
}

double population_stddev(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("standard deviation of an empty set");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double acc = 0.0;
    for (double v : values) acc += (v - mean) * (v - mean);
    return std::sqrt(acc / static_cast<double>(values.size()));
}

std::string format_percent(double value) {
    // to_chars gives the correctly rounded decimal of the exact binary value.
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed, 2);
    if (ec != std::errc{}) throw std::runtime_error("cannot format percent value");
    std::string out(buf, ptr);
    if (out == "-0.00") out = "0.00";
    return out;
}

double round_percent(double value) {
    const auto text = format_percent(value);
    double out = 0.0;
    std::from_chars(text.data(), text.data() + text.size(), out);
    return out;
}

}  // namespace sbm
