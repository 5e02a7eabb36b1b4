// Generates a fixation density map for a scene, then exports and renders it.
//
// usage: quickstart <scene.json> <fixations.csv> <out_dir>

#include "gazemap/gazemap.hpp"

#include <fmt/format.h>

#include <iostream>

int main(int argc, char** argv) {
    if (argc != 4) {
        std::cerr << "usage: quickstart <scene.json> <fixations.csv> <out_dir>\n";
        return 1;
    }
    try {
        const auto scene = gazemap::load_scene(argv[1]);
        const auto fixations = gazemap::parse_fixation_log(argv[2]);
        const std::filesystem::path out_dir = argv[3];
        std::filesystem::create_directories(out_dir);

        gazemap::GenerationConfig config;
        config.k = 5000.0;
        config.theta = gazemap::degrees_to_radians(1.5);

        const auto meshes = gazemap::build_sampled_meshes(scene, config.k);
        auto map = gazemap::generate(scene, meshes, fixations, config);
        gazemap::normalize(map);

        const auto records = gazemap::write_export(out_dir / "samples.csv", map, scene, meshes);

        // Render from the first fixation's viewpoint.
        const auto& view = fixations.front();
        const auto heat = gazemap::render_heatmap(scene, meshes, map, view.camera, view.frustum,
                                                  gazemap::ColorMap::heat(0.7), 640, 480);
        gazemap::write_png(out_dir / "heatmap.png", heat.image);

        fmt::print("{} samples exported, heatmap written to {}\n", records, (out_dir / "heatmap.png").string());
    } catch (const std::exception& e) {
        std::cerr << "quickstart: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
