#include "scendbg/world.hpp"

#include <algorithm>
#include <cmath>

#include "scendbg/errors.hpp"
#include "scendbg/geometry.hpp"

namespace scendbg::world {

namespace {

constexpr double kDegToRad = 3.141592653589793238462643383 / 180.0;
constexpr double kMinProjectionDepth = 0.2;  // meters; guards corners near the image plane

struct Frame {
  double fwd_x, fwd_y;    // unit forward
  double right_x, right_y;
};

Frame camera_frame(const CameraPose& cam) {
  double th = cam.heading_deg * kDegToRad;
  return {std::sin(th), std::cos(th), std::cos(th), -std::sin(th)};
}

}  // namespace

Scene realize(const dsl::ScenarioProgram& program, const dsl::FeatureSchema& schema,
              const FeatureVector& f, const CameraConfig& camera) {
  auto number_of = [&](const std::string& obj, const char* field) {
    int idx = schema.index_of(dsl::object_field_name(obj, field));
    if (idx < 0) throw UnknownObject(obj);
    return as_number(f.values.at(static_cast<std::size_t>(idx)));
  };
  auto string_of = [&](const std::string& obj, const char* field) {
    int idx = schema.index_of(dsl::object_field_name(obj, field));
    if (idx < 0) throw UnknownObject(obj);
    return as_string(f.values.at(static_cast<std::size_t>(idx)));
  };

  Scene scene;
  scene.camera_config = camera;
  const std::string& ego = program.objects.front().name;
  scene.camera = {number_of(ego, "x"), number_of(ego, "y"), number_of(ego, "heading")};
  for (std::size_t i = 1; i < program.objects.size(); ++i) {
    const std::string& name = program.objects[i].name;
    CarInstance car;
    car.name = name;
    car.x = number_of(name, "x");
    car.y = number_of(name, "y");
    car.heading_deg = number_of(name, "heading");
    car.model = string_of(name, "model");
    car.color = {number_of(name, "colorR"), number_of(name, "colorG"),
                 number_of(name, "colorB")};
    scene.cars.push_back(std::move(car));
  }
  return scene;
}

Scene realize(const dsl::ScenarioProgram& program, const FeatureVector& f,
              const CameraConfig& camera) {
  return realize(program, dsl::feature_schema(program), f, camera);
}

namespace {

bool car_visible(const Scene& scene, const CarInstance& car) {
  return geom::in_view_cone(scene.camera.x, scene.camera.y, scene.camera.heading_deg, car.x,
                            car.y, scene.camera_config.view_half_angle_deg,
                            scene.camera_config.max_range_m);
}

}  // namespace

bool visible_from(const Scene& scene, std::string_view car_name) {
  for (const auto& car : scene.cars)
    if (car.name == car_name) return car_visible(scene, car);
  throw UnknownObject(std::string(car_name));
}

std::vector<BoundingBox> ground_truth_boxes(const Scene& scene) {
  const CameraConfig& cfg = scene.camera_config;
  const Frame frame = camera_frame(scene.camera);
  const double focal = (cfg.image_width / 2.0) / std::tan(cfg.view_half_angle_deg * kDegToRad);

  struct Entry {
    BoundingBox box;
    double distance;
  };
  std::vector<Entry> entries;

  for (const auto& car : scene.cars) {
    if (!car_visible(scene, car)) continue;

    double ch = car.heading_deg * kDegToRad;
    double cfx = std::sin(ch), cfy = std::cos(ch);
    double crx = std::cos(ch), cry = -std::sin(ch);

    double u_min = 1e300, u_max = -1e300;
    for (int sl : {-1, 1}) {
      for (int sw : {-1, 1}) {
        double px = car.x + sl * car.length_m / 2 * cfx + sw * car.width_m / 2 * crx;
        double py = car.y + sl * car.length_m / 2 * cfy + sw * car.width_m / 2 * cry;
        double dx = px - scene.camera.x, dy = py - scene.camera.y;
        double depth = std::max(dx * frame.fwd_x + dy * frame.fwd_y, kMinProjectionDepth);
        double lateral = dx * frame.right_x + dy * frame.right_y;
        double u = cfg.image_width / 2.0 + focal * lateral / depth;
        u_min = std::min(u_min, u);
        u_max = std::max(u_max, u);
      }
    }

    double dx = car.x - scene.camera.x, dy = car.y - scene.camera.y;
    double center_depth = std::max(dx * frame.fwd_x + dy * frame.fwd_y, kMinProjectionDepth);
    double v_bottom = cfg.image_height / 2.0 + focal * cfg.height_m / center_depth;
    double width = u_max - u_min;
    double v_top = v_bottom - 0.8 * width;

    BoundingBox box;
    box.object_name = car.name;
    box.x_min = std::max(u_min, 0.0);
    box.x_max = std::min(u_max, cfg.image_width);
    box.y_min = std::max(v_top, 0.0);
    box.y_max = std::min(v_bottom, cfg.image_height);
    if (box.x_min >= box.x_max || box.y_min >= box.y_max) continue;  // clipped away entirely

    entries.push_back({std::move(box), geom::euclid(scene.camera.x, scene.camera.y, car.x, car.y)});
  }

  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.distance < b.distance; });
  std::vector<BoundingBox> boxes;
  boxes.reserve(entries.size());
  for (auto& e : entries) boxes.push_back(std::move(e.box));
  return boxes;
}

}  // namespace scendbg::world
