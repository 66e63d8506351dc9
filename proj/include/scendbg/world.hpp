#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "scendbg/dsl/ast.hpp"
#include "scendbg/dsl/schema.hpp"
#include "scendbg/value.hpp"

namespace scendbg::world {

/// Camera intrinsics/extents. The horizontal field of view is
/// 2 * view_half_angle_deg; focal length follows from the image width.
struct CameraConfig {
  double view_half_angle_deg = 30.0;
  double max_range_m = 60.0;
  double image_width = 1920.0;
  double image_height = 1200.0;
  double height_m = 1.4;
};

struct CameraPose {
  double x = 0.0;
  double y = 0.0;
  double heading_deg = 0.0;  // compass: 0 = +y, clockwise
};

struct CarInstance {
  std::string name;
  double x = 0.0;
  double y = 0.0;
  double heading_deg = 0.0;
  double length_m = 4.5;
  double width_m = 1.8;
  std::string model;
  std::array<double, 3> color = {0.0, 0.0, 0.0};
};

struct Scene {
  CameraPose camera;
  CameraConfig camera_config;
  std::vector<CarInstance> cars;  // non-ego objects
};

/// Axis-aligned box in image-plane pixel coordinates, clipped to the frame.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  std::string object_name;
};

/// A scored box produced by a perception module.
struct Detection {
  BoundingBox box;
  double confidence = 1.0;
};

/// Places the camera at the ego pose and one car per non-ego object with
/// fields copied from the feature vector.
Scene realize(const dsl::ScenarioProgram& program, const dsl::FeatureSchema& schema,
              const FeatureVector& f, const CameraConfig& camera = {});
Scene realize(const dsl::ScenarioProgram& program, const FeatureVector& f,
              const CameraConfig& camera = {});

/// True iff the car's center is within max range and within the view cone
/// (both boundaries inclusive). Throws UnknownObject.
bool visible_from(const Scene& scene, std::string_view car_name);

/// Pinhole-projected footprint boxes of visible cars, sorted by distance
/// ascending. Occlusion is not modeled: a car behind another still yields
/// its own box.
std::vector<BoundingBox> ground_truth_boxes(const Scene& scene);

}  // namespace scendbg::world
