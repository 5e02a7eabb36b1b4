#pragma once

#include "gazemap/error.hpp"
#include "gazemap/fixation_log.hpp"
#include "gazemap/gaze.hpp"
#include "gazemap/geometry.hpp"
#include "gazemap/parallel.hpp"
#include "gazemap/raster.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace gazemap {

inline constexpr double kDefaultSamplingDensity = 40000.0;

struct GenerationConfig {
    double k = kDefaultSamplingDensity;
    double theta = kDefaultThetaRad;
    int zbuffer_resolution = kDefaultZBufferResolution;
    double epsilon_abs = 1e-3;
    double epsilon_rel = 1e-3;
    TimeWindow time_window;
    bool filtering_enabled = true;
    /// When set, only these objects accumulate (all objects still occlude).
    std::optional<std::vector<std::string>> object_include_list;
    /// 0 = one per hardware thread.
    unsigned workers = 0;

    void validate() const {
        if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("k", "must be > 0");
        if (!(theta > 0.0 && theta < std::numbers::pi / 2)) throw ConfigError("theta", "must lie in (0, pi/2)");
        if (zbuffer_resolution < 1) throw ConfigError("zbuffer_resolution", "must be >= 1");
        if (!(epsilon_abs >= 0.0)) throw ConfigError("epsilon_abs", "must be >= 0");
        if (!(epsilon_rel >= 0.0)) throw ConfigError("epsilon_rel", "must be >= 0");
        if (!(time_window.t0 <= time_window.t1)) throw ConfigError("time_window", "t0 must not exceed t1");
    }

    EpsilonPolicy epsilon() const { return {epsilon_abs, epsilon_rel, true}; }

    bool includes(const std::string& object_id) const {
        if (!object_include_list) return true;
        return std::find(object_include_list->begin(), object_include_list->end(), object_id) !=
               object_include_list->end();
    }
};

/// Per-object sample values laid out like the SampledMesh blocks.
struct DensityMap {
    std::vector<std::vector<double>> values;
    double global_max = 0.0;
    bool normalized = false;

    static DensityMap zeros(const std::vector<SampledMesh>& meshes) {
        DensityMap m;
        m.values.reserve(meshes.size());
        for (const auto& sm : meshes) m.values.emplace_back(sm.total_samples, 0.0);
        return m;
    }

    std::size_t total_samples() const {
        std::size_t n = 0;
        for (const auto& v : values) n += v.size();
        return n;
    }

    double scan_max() const {
        double m = 0.0;
        for (const auto& v : values) {
            for (double x : v) m = std::max(m, x);
        }
        return m;
    }
};

/// Wall-clock seconds spent per phase, summed over fixations.
struct PhaseTimings {
    double cull = 0.0;
    double rasterize = 0.0;
    double accumulate = 0.0;
    double normalize = 0.0;
    std::size_t filtered_fixations = 0;
    std::size_t fallback_fixations = 0;
};

struct GenerateOptions {
    std::function<void(std::size_t done, std::size_t total)> progress;
    PhaseTimings* timings = nullptr;
};

/// Model matrix of every object for one fixation, honoring its transform overrides.
inline std::vector<Mat4> object_matrices(const Scene& scene, const Fixation& fx) {
    std::vector<Mat4> out;
    out.reserve(scene.objects.size());
    for (const auto& obj : scene.objects) out.push_back(obj.transform.matrix());
    for (const auto& ov : fx.overrides) {
        const auto idx = scene.find(ov.object_id);
        if (idx == scene.objects.size()) throw Error("fixation overrides unknown object '" + ov.object_id + "'");
        out[idx] = ov.transform.matrix();
    }
    return out;
}

/// Runs the per-fixation pipeline against a fixed scene; holds the precomputed culling bounds.
class Accumulator {
public:
    Accumulator(const Scene& scene, const std::vector<SampledMesh>& meshes, const GenerationConfig& config)
        : scene_(scene), meshes_(meshes), config_(config), cone_(GazeCone::from_theta(config.theta)),
          bounds_(build_scene_bounds(scene)), workers_(resolve_workers(config.workers)) {
        config_.validate();
        if (meshes.size() != scene.objects.size()) throw Error("sampled meshes do not match the scene");
        for (std::size_t o = 0; o < meshes.size(); ++o) {
            if (meshes[o].triangles.size() != scene.objects[o].mesh.triangles.size()) {
                throw Error("sampled mesh '" + meshes[o].object_id + "' does not match its scene object");
            }
            included_.push_back(config_.includes(scene.objects[o].object_id));
        }
    }

    const GazeCone& cone() const { return cone_; }

    /// Adds one fixation's contributions to `map` and raises map.global_max accordingly.
    void accumulate(DensityMap& map, const Fixation& fx, PhaseTimings* timings = nullptr) const {
        using Clock = std::chrono::steady_clock;
        auto t0 = Clock::now();
        const auto models = object_matrices(scene_, fx);
        const Mat4 view = fx.camera.view_matrix();

        bool filtered = config_.filtering_enabled;
        Mat4 projection;
        if (filtered) {
            try {
                projection = make_crop_frustum(fx, cone_).projection;
            } catch (const GazeOutsideFrustumError&) {
                filtered = false;
            } catch (const InvalidFrustumError&) {
                filtered = false;
            }
        }
        if (!filtered) projection = perspective_matrix(fx.frustum);
        if (timings) ++(config_.filtering_enabled && !filtered ? timings->fallback_fixations : timings->filtered_fixations);

        const auto planes = FrustumPlanes::from_matrix(projection * view);
        std::vector<DrawItem> items;
        for (std::size_t o = 0; o < scene_.objects.size(); ++o) {
            auto ranges = cull_clusters(scene_.objects[o].mesh, bounds_[o], models[o], planes);
            if (!ranges.empty()) {
                items.push_back({&scene_.objects[o].mesh, models[o], std::move(ranges), static_cast<std::uint32_t>(o),
                                 &bounds_[o].order});
            }
        }
        auto t1 = Clock::now();

        const int res = config_.zbuffer_resolution;
        const DepthBuffer buffer = rasterize_depth(items, view, projection, {res, res}, workers_);
        auto t2 = Clock::now();

        // Sample runs to evaluate: culled clusters when filtering, everything otherwise.
        struct Span {
            std::uint32_t object;
            std::size_t begin, end;
        };
        std::vector<Span> spans;
        if (filtered) {
            for (const auto& item : items) {
                if (!included_[item.object_index]) continue;
                const auto& tris = meshes_[item.object_index].triangles;
                for (const auto& r : item.ranges) {
                    for (auto k = r.begin; k < r.end; ++k) {
                        const auto& tri = tris[item.triangle(k)];
                        const std::size_t b = tri.sample_offset, e = b + tri.sample_count;
                        if (!spans.empty() && spans.back().object == item.object_index && spans.back().end == b) {
                            spans.back().end = e;
                        } else {
                            spans.push_back({item.object_index, b, e});
                        }
                    }
                }
            }
        } else {
            for (std::size_t o = 0; o < meshes_.size(); ++o) {
                if (included_[o] && meshes_[o].total_samples > 0) {
                    spans.push_back({static_cast<std::uint32_t>(o), 0, meshes_[o].total_samples});
                }
            }
        }
        std::vector<std::size_t> starts(spans.size() + 1, 0);
        for (std::size_t i = 0; i < spans.size(); ++i) starts[i + 1] = starts[i] + (spans[i].end - spans[i].begin);

        std::vector<Mat4> model_view(models.size());
        for (std::size_t o = 0; o < models.size(); ++o) model_view[o] = view * models[o];

        const auto eps = config_.epsilon();
        const double reject_sq = 16.0 * cone_.sigma * cone_.sigma * (1.0 + 1e-6);
        const Vec3 gaze = fx.gaze_dir;
        const double duration = fx.duration;
        std::vector<double> partial_max(workers_, 0.0);
        parallel_blocks(starts.back(), workers_, [&](std::size_t begin, std::size_t end, unsigned worker) {
            if (begin >= end) return;
            double local_max = 0.0;
            auto s = static_cast<std::size_t>(std::upper_bound(starts.begin(), starts.end(), begin) - starts.begin() - 1);
            std::size_t g = begin;
            while (g < end) {
                const auto& span = spans[s];
                const std::size_t stop = std::min(end, starts[s + 1]);
                const Mat4& mv = model_view[span.object];
                const auto& local = meshes_[span.object].local_positions;
                auto& values = map.values[span.object];
                for (std::size_t i = span.begin + (g - starts[s]); g < stop; ++g, ++i) {
                    const Vec3 eye = transform_point(mv, local[i]);
                    Vec4 clip;
                    if (filtered) {
                        clip = projection * eye.homogeneous();
                        if (!inside_ndc_cube(clip)) continue;
                    }
                    // Cheap squared test that only drops points well past the cutoff.
                    const double d1 = eye.dot(gaze);
                    if (!(d1 > 0.0) || eye.squaredNorm() - d1 * d1 > reject_sq * d1 * d1) continue;
                    const double w = gaussian_weight(eye, gaze, duration, cone_);
                    if (w == 0.0) continue;
                    if (!filtered) clip = projection * eye.homogeneous();
                    if (!is_visible_eye(buffer, eye, clip, eps)) continue;
                    values[i] += w;
                    local_max = std::max(local_max, values[i]);
                }
                ++s;
            }
            partial_max[worker] = local_max;
        });
        for (double m : partial_max) map.global_max = std::max(map.global_max, m);
        auto t3 = Clock::now();

        if (timings) {
            timings->cull += std::chrono::duration<double>(t1 - t0).count();
            timings->rasterize += std::chrono::duration<double>(t2 - t1).count();
            timings->accumulate += std::chrono::duration<double>(t3 - t2).count();
        }
    }

private:
    const Scene& scene_;
    const std::vector<SampledMesh>& meshes_;
    GenerationConfig config_;
    GazeCone cone_;
    std::vector<MeshBounds> bounds_;
    std::vector<bool> included_;
    unsigned workers_;
};

inline void accumulate_fixation(DensityMap& map, const Scene& scene, const std::vector<SampledMesh>& meshes,
                                const Fixation& fx, const GenerationConfig& config) {
    Accumulator(scene, meshes, config).accumulate(map, fx);
}

/// Un-normalized density over all fixations inside the configured time window, in log order.
inline DensityMap generate(const Scene& scene, const std::vector<SampledMesh>& meshes,
                           const std::vector<Fixation>& fixations, const GenerationConfig& config,
                           const GenerateOptions& options = {}) {
    const Accumulator acc(scene, meshes, config);
    DensityMap map = DensityMap::zeros(meshes);
    std::size_t done = 0;
    for (const auto& fx : fixations) {
        if (config.time_window.contains(fx.start_time)) acc.accumulate(map, fx, options.timings);
        ++done;
        if (options.progress) options.progress(done, fixations.size());
    }
    return map;
}

/// Divides every value by the tracked maximum. Idempotent.
inline void normalize(DensityMap& map) {
    if (map.normalized) return;
    if (map.global_max > 0.0) {
        const double m = map.global_max;
        for (auto& v : map.values) {
            for (double& x : v) x /= m;
        }
        map.global_max = 1.0;
    }
    map.normalized = true;
}

inline DensityMap normalized(DensityMap map) {
    normalize(map);
    return map;
}

}  // namespace gazemap
