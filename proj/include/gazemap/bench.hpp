#pragma once

#include "gazemap/density.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <chrono>
#include <cmath>
#include <numeric>
#include <vector>

namespace gazemap {

/// Mean, sample standard deviation and two-sided Student-t confidence interval.
struct TimingStats {
    std::size_t n = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;

    static TimingStats from(const std::vector<double>& xs, double confidence = 0.95) {
        TimingStats s;
        s.n = xs.size();
        if (xs.empty()) return s;
        s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(s.n);
        if (s.n < 2) {
            s.ci_low = s.ci_high = s.mean;
            return s;
        }
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(s.n - 1));
        const boost::math::students_t dist(static_cast<double>(s.n - 1));
        const double t = boost::math::quantile(boost::math::complement(dist, (1.0 - confidence) / 2.0));
        const double half = t * s.stddev / std::sqrt(static_cast<double>(s.n));
        s.ci_low = s.mean - half;
        s.ci_high = s.mean + half;
        return s;
    }
};

struct BenchReport {
    TimingStats filtered;
    TimingStats unfiltered;
    /// unfiltered mean / filtered mean
    double speedup = 0.0;
    /// Every repetition of a path produced bit-identical values.
    bool deterministic = true;
    DensityMap filtered_map;
    DensityMap unfiltered_map;
};

/// Times `repetitions` runs of generate with and without sample filtering.
inline BenchReport run_bench(const Scene& scene, const std::vector<SampledMesh>& meshes,
                             const std::vector<Fixation>& fixations, GenerationConfig config,
                             std::size_t repetitions = 10) {
    BenchReport report;
    auto run_path = [&](bool filtering, DensityMap& keep) {
        config.filtering_enabled = filtering;
        std::vector<double> seconds;
        for (std::size_t rep = 0; rep < repetitions; ++rep) {
            const auto start = std::chrono::steady_clock::now();
            auto map = generate(scene, meshes, fixations, config);
            seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
            if (rep == 0) {
                keep = std::move(map);
            } else if (map.values != keep.values || map.global_max != keep.global_max) {
                report.deterministic = false;
            }
        }
        return TimingStats::from(seconds);
    };
    report.filtered = run_path(true, report.filtered_map);
    report.unfiltered = run_path(false, report.unfiltered_map);
    report.speedup = report.filtered.mean > 0.0 ? report.unfiltered.mean / report.filtered.mean : 0.0;
    return report;
}

}  // namespace gazemap
