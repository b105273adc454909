use super::{GeometryError, Point2, Vector2};

const COLLINEAR_EPS: f64 = 1e-12;

fn cross(o: &Point2, a: &Point2, b: &Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull (Andrew's monotone chain) that tolerates degenerate input:
/// returns the unique point, the two extreme points of a collinear set, or a
/// CCW polygon without collinear vertices.
pub fn hull_points(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (a.x - b.x).abs() <= COLLINEAR_EPS && (a.y - b.y).abs() <= COLLINEAR_EPS);
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point2> = Vec::with_capacity(pts.len());
    for p in &pts {
        while lower.len() >= 2
            && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= COLLINEAR_EPS
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point2> = Vec::with_capacity(pts.len());
    for p in pts.iter().rev() {
        while upper.len() >= 2
            && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= COLLINEAR_EPS
        {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() == 2 && (lower[0] - lower[1]).norm() <= COLLINEAR_EPS {
        lower.pop();
    }
    lower
}

/// Minimal CCW convex polygon containing `points`.
pub fn convex_hull_2d(points: &[Point2]) -> Result<Footprint, GeometryError> {
    let hull = hull_points(points);
    if hull.len() < 3 || polygon_area(&hull) <= COLLINEAR_EPS {
        return Err(GeometryError::DegenerateInput);
    }
    Ok(Footprint { hull })
}

/// Absolute shoelace area.
pub fn polygon_area(poly: &[Point2]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc.abs()
}

/// Sutherland–Hodgman clipping of `subject` against the convex CCW polygon `clip`.
pub fn clip_convex(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut output: Vec<Point2> = subject.to_vec();
    for i in 0..clip.len() {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let input = std::mem::take(&mut output);
        let side = |p: &Point2| cross(&a, &b, p);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (sc, sp) = (side(&cur), side(&prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    output.push(intersect(&prev, &cur, sp, sc));
                }
                output.push(cur);
            } else if sp >= 0.0 {
                output.push(intersect(&prev, &cur, sp, sc));
            }
        }
    }
    output
}

fn intersect(p: &Point2, q: &Point2, sp: f64, sq: f64) -> Point2 {
    let t = sp / (sp - sq);
    p + (q - p) * t
}

/// Area of the intersection of two convex footprints.
pub fn overlap_area(a: &Footprint, b: &Footprint) -> f64 {
    let (amin, amax) = a.aabb();
    let (bmin, bmax) = b.aabb();
    if amin.x >= bmax.x || bmin.x >= amax.x || amin.y >= bmax.y || bmin.y >= amax.y {
        return 0.0;
    }
    polygon_area(&clip_convex(&a.hull, &b.hull))
}

pub fn segment_distance(p: &Point2, a: &Point2, b: &Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Closed point-in-hull test over an arbitrary point set; degenerate hulls
/// (a point or a segment) contain only points within `eps` of them.
pub fn point_in_hull(points: &[Point2], p: &Point2, eps: f64) -> bool {
    let hull = hull_points(points);
    match hull.len() {
        0 => false,
        1 => (hull[0] - p).norm() <= eps,
        2 => segment_distance(p, &hull[0], &hull[1]) <= eps,
        n => (0..n).all(|i| {
            let a = hull[i];
            let b = hull[(i + 1) % n];
            cross(&a, &b, p) >= -eps * (b - a).norm()
        }),
    }
}

/// Exact area of the union of convex polygons, by slab decomposition: the
/// union's cross-section length is linear between consecutive breakpoints
/// (vertex abscissae and edge–edge crossings), so the midpoint rule is exact.
pub fn union_area(polys: &[Vec<Point2>]) -> f64 {
    let polys: Vec<&Vec<Point2>> = polys.iter().filter(|p| p.len() >= 3).collect();
    if polys.is_empty() {
        return 0.0;
    }
    let mut xs: Vec<f64> = polys.iter().flat_map(|p| p.iter().map(|v| v.x)).collect();
    let edges: Vec<(usize, Point2, Point2)> = polys
        .iter()
        .enumerate()
        .flat_map(|(k, p)| (0..p.len()).map(move |i| (k, p[i], p[(i + 1) % p.len()])))
        .collect();
    for i in 0..edges.len() {
        for j in (i + 1)..edges.len() {
            if edges[i].0 == edges[j].0 {
                continue;
            }
            if let Some(x) = segment_crossing_x(&edges[i].1, &edges[i].2, &edges[j].1, &edges[j].2)
            {
                xs.push(x);
            }
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-15);
    let mut area = 0.0;
    let mut intervals: Vec<(f64, f64)> = Vec::with_capacity(polys.len());
    for w in xs.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        if x1 - x0 <= 1e-15 {
            continue;
        }
        let xm = 0.5 * (x0 + x1);
        intervals.clear();
        for p in &polys {
            if let Some(iv) = vertical_section(p, xm) {
                intervals.push(iv);
            }
        }
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut len = 0.0;
        let mut cur: Option<(f64, f64)> = None;
        for &(lo, hi) in &intervals {
            match cur {
                Some((clo, chi)) if lo <= chi => cur = Some((clo, chi.max(hi))),
                Some((clo, chi)) => {
                    len += chi - clo;
                    cur = Some((lo, hi));
                }
                None => cur = Some((lo, hi)),
            }
        }
        if let Some((clo, chi)) = cur {
            len += chi - clo;
        }
        area += len * (x1 - x0);
    }
    area
}

fn vertical_section(poly: &[Point2], x: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (l, r) = if a.x <= b.x { (a, b) } else { (b, a) };
        if x < l.x || x > r.x || r.x == l.x {
            continue;
        }
        let y = l.y + (r.y - l.y) * (x - l.x) / (r.x - l.x);
        lo = lo.min(y);
        hi = hi.max(y);
    }
    (lo < hi).then_some((lo, hi))
}

fn segment_crossing_x(p1: &Point2, p2: &Point2, q1: &Point2, q2: &Point2) -> Option<f64> {
    let r = p2 - p1;
    let s = q2 - q1;
    let denom = r.x * s.y - r.y * s.x;
    if denom.abs() <= 1e-18 {
        return None;
    }
    let qp = q1 - p1;
    let t = (qp.x * s.y - qp.y * s.x) / denom;
    let u = (qp.x * r.y - qp.y * r.x) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some(p1.x + t * r.x)
    } else {
        None
    }
}

/// Convex CCW polygon: the x–y projection of an asset at a given yaw.
#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    hull: Vec<Point2>,
}

impl Footprint {
    pub fn vertices(&self) -> &[Point2] {
        &self.hull
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.hull)
    }

    pub fn translated(&self, v: Vector2) -> Footprint {
        Footprint {
            hull: self.hull.iter().map(|p| p + v).collect(),
        }
    }

    /// Rotation about the frame origin; rotation keeps the polygon convex and CCW.
    pub fn rotated(&self, angle: f64) -> Footprint {
        let (s, c) = angle.sin_cos();
        Footprint {
            hull: self
                .hull
                .iter()
                .map(|p| Point2::new(c * p.x - s * p.y, s * p.x + c * p.y))
                .collect(),
        }
    }

    pub fn aabb(&self) -> (Point2, Point2) {
        let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.hull {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        (min, max)
    }

    pub fn contains(&self, p: &Point2) -> bool {
        let n = self.hull.len();
        (0..n).all(|i| cross(&self.hull[i], &self.hull[(i + 1) % n], p) >= -1e-12)
    }

    /// Distance from `p` to the polygon (zero inside).
    pub fn distance_to(&self, p: &Point2) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        let n = self.hull.len();
        (0..n)
            .map(|i| segment_distance(p, &self.hull[i], &self.hull[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }
}
