#pragma once

#include <span>
#include <string>

namespace sbm {

struct Stats {
    double min = 0.0;
    double mean = 0.0;
    double max = 0.0;
    std::size_t count = 0;
};

/// Min, arithmetic mean and max, folded in input order.
Stats summarize(std::span<const double> values);

double population_stddev(std::span<const double> values);

/// Fixed two-decimal rendering; exact ties round half to even and the
/// decimal separator is always '.'.
std::string format_percent(double value);

/// `value` rounded the same way as format_percent.
double round_percent(double value);

}  // namespace sbm
