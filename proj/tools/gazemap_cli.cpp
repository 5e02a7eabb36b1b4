// gazemap command-line front end: generate, export, render, bench, depth.

#include "gazemap/gazemap.hpp"

#include <CLI11/CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace gazemap;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

constexpr const char* kConfigKeys =
    "Config file keys (flat `key = value`, '#' comments):\n"
    "  k                   sampling density, samples per m^2 (default 40000)\n"
    "  theta               gaze deviation in radians (default 0.01745)\n"
    "  theta_deg           gaze deviation in degrees (alternative to theta)\n"
    "  zbuffer_resolution  crop z-buffer side in pixels (default 512)\n"
    "  epsilon_abs         absolute depth tolerance in m (default 0.001)\n"
    "  epsilon_rel         relative depth tolerance (default 0.001)\n"
    "  time_window         t0:t1 in seconds, either side may be empty (default all)\n"
    "  filtering           true/false, crop-frustum sample filtering (default true)\n"
    "  objects             comma-separated object ids to accumulate (default all)\n"
    "  workers             worker threads, 0 = all cores (default 0)\n"
    "Command-line flags override the file.";

/// Generation options as given on the command line; unset fields keep file/default values.
struct GenerationFlags {
    std::string config_path;
    std::optional<double> k;
    std::optional<double> theta;
    std::optional<double> theta_deg;
    std::optional<int> zbuffer_res;
    std::optional<double> epsilon_abs;
    std::optional<double> epsilon_rel;
    std::optional<std::string> time_window;
    bool no_filtering = false;
    std::optional<std::string> objects;
    std::optional<unsigned> workers;

    void add_to(CLI::App& cmd) {
        cmd.add_option("--config", config_path, "Config file (see keys below)")->check(CLI::ExistingFile);
        cmd.add_option("--k", k, "Sampling density k, samples per m^2 [k]");
        auto* deg = cmd.add_option("--theta-deg", theta_deg, "Gaze deviation theta in degrees [theta_deg]");
        cmd.add_option("--theta", theta, "Gaze deviation theta in radians [theta]")->excludes(deg);
        cmd.add_option("--zbuffer-res", zbuffer_res, "Z-buffer resolution in pixels per side [zbuffer_resolution]");
        cmd.add_option("--epsilon-abs", epsilon_abs, "Absolute depth tolerance in m [epsilon_abs]");
        cmd.add_option("--epsilon-rel", epsilon_rel, "Relative depth tolerance [epsilon_rel]");
        cmd.add_option("--time-window", time_window, "Fixation start-time window t0:t1 in s [time_window]");
        cmd.add_flag("--no-filtering", no_filtering, "Disable crop-frustum sample filtering [filtering = false]");
        cmd.add_option("--objects", objects, "Comma-separated object ids to accumulate [objects]");
        cmd.add_option("--workers", workers, "Worker threads, 0 = all cores [workers]");
        cmd.footer(kConfigKeys);
    }

    GenerationConfig resolve() const {
        GenerationConfig cfg = config_path.empty() ? GenerationConfig{} : load_config(config_path);
        if (k) cfg.k = *k;
        if (theta) cfg.theta = *theta;
        if (theta_deg) cfg.theta = degrees_to_radians(*theta_deg);
        if (zbuffer_res) cfg.zbuffer_resolution = *zbuffer_res;
        if (epsilon_abs) cfg.epsilon_abs = *epsilon_abs;
        if (epsilon_rel) cfg.epsilon_rel = *epsilon_rel;
        if (time_window) cfg.time_window = parse_time_window(*time_window);
        if (no_filtering) cfg.filtering_enabled = false;
        if (objects) cfg.object_include_list = parse_id_list(*objects);
        if (workers) cfg.workers = *workers;
        cfg.validate();
        return cfg;
    }
};

std::vector<double> parse_numbers(const std::string& text, std::size_t count, const std::string& field) {
    std::vector<double> out;
    for (const auto& item : parse_id_list(text)) out.push_back(detail::config_number(field, item));
    if (out.size() != count) throw ConfigError(field, fmt::format("expected {} comma-separated numbers", count));
    return out;
}

CameraPose parse_camera(const std::string& text) {
    const auto v = parse_numbers(text, 7, "camera");
    CameraPose c;
    c.position = Vec3(v[0], v[1], v[2]);
    c.rotation = quat_xyzw(v[3], v[4], v[5], v[6]);
    if (std::abs(c.rotation.norm() - 1.0) > 1e-6) throw ConfigError("camera", "rotation is not a unit quaternion");
    return c;
}

FrustumParams parse_frustum(const std::string& text) {
    const auto v = parse_numbers(text, 6, "frustum");
    FrustumParams fr{v[0], v[1], v[3], v[2], v[4], v[5]};  // given as l,r,t,b,n,f
    if (!fr.valid()) throw ConfigError("frustum", "needs l < r, b < t, 0 < n < f");
    return fr;
}

std::pair<int, int> parse_resolution(const std::string& text) {
    const auto x = text.find('x');
    if (x == std::string::npos) throw ConfigError("resolution", "expected WxH");
    const auto w = detail::config_integer("resolution", text.substr(0, x));
    const auto h = detail::config_integer("resolution", text.substr(x + 1));
    if (w < 1 || h < 1 || w > 16384 || h > 16384) throw ConfigError("resolution", "must lie in 1..16384");
    return {static_cast<int>(w), static_cast<int>(h)};
}

struct View {
    std::string camera;
    std::string frustum;
    std::string resolution = "1024x768";

    void add_to(CLI::App& cmd) {
        cmd.add_option("--camera", camera, "Camera pose px,py,pz,qx,qy,qz,qw (world from camera)")->required();
        cmd.add_option("--frustum", frustum, "Near-plane frustum l,r,t,b,n,f in m")->required();
        cmd.add_option("--resolution", resolution, "Image size WxH")->capture_default_str();
    }
};

int cmd_generate(const std::string& scene_path, const std::string& fixations_path, const GenerationFlags& flags,
                 const std::string& out, bool quiet) {
    const auto cfg = flags.resolve();
    const auto scene = load_scene(scene_path);
    const auto fixations = parse_fixation_log(fixations_path, cfg.time_window);
    const auto meshes = build_sampled_meshes(scene, cfg.k);

    PhaseTimings timings;
    GenerateOptions options;
    options.timings = &timings;
    std::size_t next_report = 1;
    if (!quiet) {
        options.progress = [&](std::size_t done, std::size_t total) {
            if (done * 10 >= next_report * total) {
                std::cerr << fmt::format("\rprocessed {}/{} fixations", done, total) << std::flush;
                while (done * 10 >= next_report * total && next_report <= 10) ++next_report;
            }
        };
    }
    auto map = generate(scene, meshes, fixations, cfg, options);
    if (!quiet && !fixations.empty()) std::cerr << '\n';
    const auto t0 = std::chrono::steady_clock::now();
    normalize(map);
    timings.normalize = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    save_map(out, map, meshes, layout_hash(scene, meshes, cfg.k), cfg.k);

    std::size_t samples = 0;
    for (const auto& m : meshes) samples += m.total_samples;
    std::cout << fmt::format("objects     {}\nsamples     {}\nfixations   {} ({} filtered, {} fallback)\n",
                             meshes.size(), samples, fixations.size(), timings.filtered_fixations,
                             timings.fallback_fixations);
    std::cout << fmt::format("cull        {:.3f} s\nrasterize   {:.3f} s\naccumulate  {:.3f} s\nnormalize   {:.3f} s\n",
                             timings.cull, timings.rasterize, timings.accumulate, timings.normalize);
    std::cout << fmt::format("wrote {}\n", out);
    return kExitOk;
}

/// Loads a map and the scene it claims to belong to, failing on layout mismatch.
std::tuple<StoredMap, Scene, std::vector<SampledMesh>> load_checked(const std::string& map_path,
                                                                    const std::string& scene_path) {
    auto stored = load_map(map_path);
    auto scene = load_scene(scene_path);
    auto meshes = build_sampled_meshes(scene, stored.k);
    check_layout(stored, scene, meshes);
    return {std::move(stored), std::move(scene), std::move(meshes)};
}

int cmd_export(const std::string& map_path, const std::string& scene_path, const std::optional<std::string>& objects,
               const std::string& out) {
    const auto [stored, scene, meshes] = load_checked(map_path, scene_path);
    std::optional<std::vector<std::string>> include;
    if (objects) include = parse_id_list(*objects);
    const auto n = write_export(out, stored.map, scene, meshes, include);
    std::cout << fmt::format("wrote {} records to {}\n", n, out);
    return kExitOk;
}

int cmd_render(const std::string& map_path, const std::string& scene_path, const View& view, double gamma,
               const std::string& colormap_path, unsigned workers, const std::string& out) {
    const auto camera = parse_camera(view.camera);
    const auto frustum = parse_frustum(view.frustum);
    const auto [w, h] = parse_resolution(view.resolution);
    const auto colormap = colormap_path.empty() ? ColorMap::heat(gamma) : load_colormap(colormap_path, gamma);
    colormap.validate();
    const auto [stored, scene, meshes] = load_checked(map_path, scene_path);
    const auto map = stored.map.normalized ? stored.map : normalized(stored.map);
    const auto img = render_heatmap(scene, meshes, map, camera, frustum, colormap, w, h, workers);
    write_png(out, img.image);
    std::cout << fmt::format("wrote {}x{} image to {}\n", w, h, out);
    return kExitOk;
}

int cmd_depth(const std::string& scene_path, const View& view, unsigned workers, const std::string& out) {
    const auto camera = parse_camera(view.camera);
    const auto frustum = parse_frustum(view.frustum);
    const auto [w, h] = parse_resolution(view.resolution);
    const auto scene = load_scene(scene_path);
    const auto buf = rasterize_depth(scene, camera.view_matrix(), perspective_matrix(frustum), {w, h},
                                     resolve_workers(workers));
    write_png(out, depth_to_image(buf));
    std::cout << fmt::format("wrote {}x{} depth image to {}\n", w, h, out);
    return kExitOk;
}

void print_stats_row(const char* name, const TimingStats& s) {
    std::cout << fmt::format("{:<11} {:>10.4f} {:>10.4f}   [{:.4f}, {:.4f}]\n", name, s.mean, s.stddev, s.ci_low,
                             s.ci_high);
}

int cmd_bench(const std::string& scene_path, const std::string& fixations_path, const GenerationFlags& flags,
              std::size_t repetitions) {
    const auto cfg = flags.resolve();
    const auto scene = load_scene(scene_path);
    const auto fixations = parse_fixation_log(fixations_path, cfg.time_window);
    const auto meshes = build_sampled_meshes(scene, cfg.k);
    std::size_t samples = 0, triangles = 0;
    for (std::size_t o = 0; o < meshes.size(); ++o) {
        samples += meshes[o].total_samples;
        triangles += scene.objects[o].mesh.triangles.size();
    }
    std::cout << fmt::format("{} triangles, {} samples, {} fixations, {} repetitions\n", triangles, samples,
                             fixations.size(), repetitions);
    const auto report = run_bench(scene, meshes, fixations, cfg, repetitions);
    std::cout << fmt::format("{:<11} {:>10} {:>10}   {}\n", "path", "mu (s)", "sigma (s)", "CI (95%)");
    print_stats_row("filtered", report.filtered);
    print_stats_row("unfiltered", report.unfiltered);
    std::cout << fmt::format("speedup     {:.3f}x (unfiltered mean / filtered mean)\n", report.speedup);
    std::cout << fmt::format("values      {}\n", report.deterministic ? "identical across repetitions"
                                                                      : "DIFFER across repetitions");
    return report.deterministic ? kExitOk : kExitData;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Surface fixation density maps (gaze heatmaps) on triangle meshes"};
    app.require_subcommand(1);

    std::string scene_path, fixations_path, map_path, out, colormap_path;
    std::optional<std::string> export_objects;
    double gamma = 1.0;
    unsigned view_workers = 0;
    std::size_t repetitions = 10;
    bool quiet = false;

    auto* gen = app.add_subcommand("generate", "Accumulate and normalize a density map, then save it");
    GenerationFlags gen_flags;
    gen->add_option("--scene", scene_path, "Scene manifest (JSON)")->required()->check(CLI::ExistingFile);
    gen->add_option("--fixations", fixations_path, "Fixation log")->required()->check(CLI::ExistingFile);
    gen_flags.add_to(*gen);
    gen->add_option("--out", out, "Output map file")->required();
    gen->add_flag("--quiet", quiet, "No progress output");

    auto* exp = app.add_subcommand("export", "Write one CSV record per sample of a saved map");
    exp->add_option("--map", map_path, "Map file from `generate`")->required()->check(CLI::ExistingFile);
    exp->add_option("--scene", scene_path, "Scene manifest the map was generated for")->required()->check(
        CLI::ExistingFile);
    exp->add_option("--objects", export_objects, "Comma-separated object ids to export (default all)");
    exp->add_option("--out", out, "Output CSV file")->required();

    auto* ren = app.add_subcommand("render", "Render a saved map as a heatmap PNG");
    View ren_view;
    ren->add_option("--map", map_path, "Map file from `generate`")->required()->check(CLI::ExistingFile);
    ren->add_option("--scene", scene_path, "Scene manifest the map was generated for")->required()->check(
        CLI::ExistingFile);
    ren_view.add_to(*ren);
    ren->add_option("--gamma", gamma, "Value exponent applied before the color lookup")->capture_default_str();
    ren->add_option("--colormap", colormap_path, "Color stops file, lines of `stop r g b` (0..255)")
        ->check(CLI::ExistingFile);
    ren->add_option("--workers", view_workers, "Worker threads, 0 = all cores");
    ren->add_option("--out", out, "Output PNG")->required();

    auto* bench = app.add_subcommand("bench", "Time filtered against unfiltered generation");
    GenerationFlags bench_flags;
    bench->add_option("--scene", scene_path, "Scene manifest (JSON)")->required()->check(CLI::ExistingFile);
    bench->add_option("--fixations", fixations_path, "Fixation log")->required()->check(CLI::ExistingFile);
    bench_flags.add_to(*bench);
    bench->add_option("--repetitions,-n", repetitions, "Runs per path")->capture_default_str()->check(
        CLI::PositiveNumber);

    auto* depth = app.add_subcommand("depth", "Dump a depth buffer as a grayscale PNG (nearest = white)");
    View depth_view;
    depth->add_option("--scene", scene_path, "Scene manifest (JSON)")->required()->check(CLI::ExistingFile);
    depth_view.add_to(*depth);
    depth->add_option("--workers", view_workers, "Worker threads, 0 = all cores");
    depth->add_option("--out", out, "Output PNG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*gen) return cmd_generate(scene_path, fixations_path, gen_flags, out, quiet);
        if (*exp) return cmd_export(map_path, scene_path, export_objects, out);
        if (*ren) return cmd_render(map_path, scene_path, ren_view, gamma, colormap_path, view_workers, out);
        if (*bench) return cmd_bench(scene_path, fixations_path, bench_flags, repetitions);
        if (*depth) return cmd_depth(scene_path, depth_view, view_workers, out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
