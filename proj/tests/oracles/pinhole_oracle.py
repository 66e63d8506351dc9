#!/usr/bin/env python3
"""Standalone pinhole projection oracle.

Computes the expected ground-truth bounding box for a single car seen by the
camera, independently of the C++ implementation. The frozen numbers below are
pasted into tests/test_world.cpp.

Conventions (must match docs/dsl.md):
  - world frame: x east, y north; compass heading deg, 0 = +y, clockwise
  - image 1920x1200, u left->right, v top->bottom
  - fx = fy = 960 / tan(view_half_angle), view_half_angle = 30 deg
  - camera height 1.4 m; box bottom at the ground line of the car center
  - box height = 0.8 * projected footprint width
"""

import math

W, H = 1920.0, 1200.0
HALF_ANGLE = math.radians(30.0)
FX = (W / 2.0) / math.tan(HALF_ANGLE)
CAM_HEIGHT = 1.4
CAR_LEN, CAR_WID = 4.5, 1.8


def project(cam_x, cam_y, cam_heading_deg, car_x, car_y, car_heading_deg):
    th = math.radians(cam_heading_deg)
    fwd = (math.sin(th), math.cos(th))
    right = (math.cos(th), -math.sin(th))

    ch = math.radians(car_heading_deg)
    cfwd = (math.sin(ch), math.cos(ch))
    cright = (math.cos(ch), -math.sin(ch))

    corners = []
    for sl, sw in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        px = car_x + sl * CAR_LEN / 2 * cfwd[0] + sw * CAR_WID / 2 * cright[0]
        py = car_y + sl * CAR_LEN / 2 * cfwd[1] + sw * CAR_WID / 2 * cright[1]
        corners.append((px, py))

    us = []
    for px, py in corners:
        dx, dy = px - cam_x, py - cam_y
        depth = max(dx * fwd[0] + dy * fwd[1], 0.2)
        lateral = dx * right[0] + dy * right[1]
        us.append(W / 2 + FX * lateral / depth)

    dx, dy = car_x - cam_x, car_y - cam_y
    center_depth = max(dx * fwd[0] + dy * fwd[1], 0.2)
    v_bottom = H / 2 + FX * CAM_HEIGHT / center_depth

    u_min, u_max = min(us), max(us)
    width = u_max - u_min
    y_max = v_bottom
    y_min = v_bottom - 0.8 * width

    # clip to frame
    x0, x1 = max(u_min, 0.0), min(u_max, W)
    y0, y1 = max(y_min, 0.0), min(y_max, H)
    return x0, y0, x1, y1


if __name__ == "__main__":
    print("fx =", repr(FX))
    box = project(0, 0, 0, 0, 10, 0)
    print("car (0,10) heading 0:", [repr(v) for v in box])
    box20 = project(0, 0, 0, 0, 20, 0)
    print("car (0,20) heading 0:", [repr(v) for v in box20])
    box_rot = project(0, 0, 0, 3, 12, 45)
    print("car (3,12) heading 45:", [repr(v) for v in box_rot])
    d = math.hypot(-198.1 - (-205.4), 1105.0 - 1100.2)
    print("euclid oracle:", repr(d))
