#pragma once

#include <cstddef>
#include <span>

namespace neurolds {

// Process-wide threading knobs. Thread count defaults to 1.
void set_thread_count(int threads);
int thread_count();

// When set (the default), every parallel reduction accumulates per-row
// partials and combines them in index order, so results do not depend on
// the thread count.
void set_deterministic(bool on);
bool deterministic();

// Neumaier-compensated running sum.
class KahanSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if ((sum_ >= 0 ? sum_ : -sum_) >= (x >= 0 ? x : -x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double kahan_total(std::span<const double> values) {
    KahanSum s;
    for (double v : values) s.add(v);
    return s.value();
}

}  // namespace neurolds
