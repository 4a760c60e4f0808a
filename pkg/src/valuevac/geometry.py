"""2D geometry primitives shared by the home simulation.

Units are meters and degrees throughout. Heading 0 points along +x and
increases counter-clockwise.
"""

from __future__ import annotations

import math

Vec = tuple[float, float]
Segment = tuple[Vec, Vec]

_EPS = 1e-12


def normalize_heading(deg: float) -> float:
    """Wrap an angle into [0, 360)."""
    h = math.fmod(deg, 360.0)
    if h < 0.0:
        h += 360.0
    # fmod can return 360.0 - tiny for inputs just below a multiple of 360
    if h >= 360.0:
        h -= 360.0
    return h


def heading_to_dir(deg: float) -> Vec:
    rad = math.radians(deg)
    return (math.cos(rad), math.sin(rad))


def bearing_deg(origin: Vec, target: Vec) -> float:
    """Absolute heading from origin to target."""
    return normalize_heading(math.degrees(math.atan2(target[1] - origin[1], target[0] - origin[0])))


def angle_diff_deg(a: float, b: float) -> float:
    """Smallest signed difference a - b, in (-180, 180]."""
    d = math.fmod(a - b, 360.0)
    if d > 180.0:
        d -= 360.0
    elif d <= -180.0:
        d += 360.0
    return d


def dist(a: Vec, b: Vec) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1])


def closest_point_on_segment(p: Vec, a: Vec, b: Vec) -> Vec:
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    seg_len_sq = dx * dx + dy * dy
    if seg_len_sq <= _EPS:
        return a
    t = ((px - ax) * dx + (py - ay) * dy) / seg_len_sq
    t = max(0.0, min(1.0, t))
    return (ax + t * dx, ay + t * dy)


def point_segment_distance(p: Vec, a: Vec, b: Vec) -> float:
    cx, cy = closest_point_on_segment(p, a, b)
    return math.hypot(p[0] - cx, p[1] - cy)


def ray_segment_intersection(origin: Vec, direction: Vec, a: Vec, b: Vec) -> float | None:
    """Distance t >= 0 along the ray to segment ab, or None if no hit."""
    ox, oy = origin
    dx, dy = direction
    sx, sy = b[0] - a[0], b[1] - a[1]
    denom = dx * sy - dy * sx
    if abs(denom) <= _EPS:
        return None
    qx, qy = a[0] - ox, a[1] - oy
    t = (qx * sy - qy * sx) / denom
    s = (qx * dy - qy * dx) / denom
    if t >= 0.0 and -_EPS <= s <= 1.0 + _EPS:
        return t
    return None


def ray_circle_intersection(origin: Vec, direction: Vec, center: Vec, radius: float) -> float | None:
    """Smallest t >= 0 where the ray touches the circle, or None.

    An origin already inside the circle reports t = 0.
    """
    fx, fy = origin[0] - center[0], origin[1] - center[1]
    if fx * fx + fy * fy <= radius * radius:
        return 0.0
    dx, dy = direction
    a = dx * dx + dy * dy
    if a <= _EPS:
        return None
    b = 2.0 * (fx * dx + fy * dy)
    c = fx * fx + fy * fy - radius * radius
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return None
    sqrt_disc = math.sqrt(disc)
    t1 = (-b - sqrt_disc) / (2.0 * a)
    if t1 >= 0.0:
        return t1
    t2 = (-b + sqrt_disc) / (2.0 * a)
    if t2 >= 0.0:
        return t2
    return None


def segments_intersect(p1: Vec, p2: Vec, q1: Vec, q2: Vec) -> bool:
    """True when the open segments p1p2 and q1q2 properly cross or touch."""

    def orient(a: Vec, b: Vec, c: Vec) -> float:
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    def on_seg(a: Vec, b: Vec, c: Vec) -> bool:
        return (
            min(a[0], b[0]) - _EPS <= c[0] <= max(a[0], b[0]) + _EPS
            and min(a[1], b[1]) - _EPS <= c[1] <= max(a[1], b[1]) + _EPS
        )

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    if abs(d1) <= _EPS and on_seg(q1, q2, p1):
        return True
    if abs(d2) <= _EPS and on_seg(q1, q2, p2):
        return True
    if abs(d3) <= _EPS and on_seg(p1, p2, q1):
        return True
    if abs(d4) <= _EPS and on_seg(p1, p2, q2):
        return True
    return False


def swept_circle_segment_contact(
    origin: Vec, direction: Vec, radius: float, a: Vec, b: Vec
) -> float | None:
    """First t >= 0 where a circle of `radius` moving from origin along
    `direction` touches segment ab. None when the sweep never reaches it.

    Equivalent to intersecting the ray with the segment inflated by the
    circle radius (two end caps plus two offset edges).
    """
    if point_segment_distance(origin, a, b) <= radius:
        return 0.0
    hits: list[float] = []
    for cap in (a, b):
        t = ray_circle_intersection(origin, direction, cap, radius)
        if t is not None:
            hits.append(t)
    sx, sy = b[0] - a[0], b[1] - a[1]
    seg_len = math.hypot(sx, sy)
    if seg_len > _EPS:
        nx, ny = -sy / seg_len, sx / seg_len
        for sign in (1.0, -1.0):
            off = (sign * nx * radius, sign * ny * radius)
            t = ray_segment_intersection(
                origin, direction, (a[0] + off[0], a[1] + off[1]), (b[0] + off[0], b[1] + off[1])
            )
            if t is not None:
                hits.append(t)
    if not hits:
        return None
    return min(hits)


def swept_circle_circle_contact(
    origin: Vec, direction: Vec, radius: float, center: Vec, other_radius: float
) -> float | None:
    """First t >= 0 where a moving circle touches a static circle."""
    return ray_circle_intersection(origin, direction, center, radius + other_radius)
