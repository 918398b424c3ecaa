//! Distance-based intersection predicates in R^3 (planar inputs use z = 0).
//!
//! Closest-point routines follow the usual clamped-parameter formulation;
//! "hit" predicates compare the resulting distance against a tolerance so
//! that touching and coplanar configurations count as intersections.

pub type Point = [f64; 3];

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: &Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: &Point, b: &Point) -> Point {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

pub fn to_point(x: &[f64]) -> Point {
    let mut p = [0.0; 3];
    p[..x.len()].copy_from_slice(x);
    p
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(&ab, &ab);
    let t = if len2 > 0.0 { (dot(&sub(p, a), &ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    norm(&sub(p, &add(a, &scale(&ab, t))))
}

/// Distance between closed segments `[p1, q1]` and `[p2, q2]`.
pub fn segment_segment_distance(p1: &Point, q1: &Point, p2: &Point, q2: &Point) -> f64 {
    let d1 = sub(q1, p1);
    let d2 = sub(q2, p2);
    let r = sub(p1, p2);
    let a = dot(&d1, &d1);
    let e = dot(&d2, &d2);
    let f = dot(&d2, &r);
    const TINY: f64 = 1e-300;

    let (s, t);
    if a <= TINY && e <= TINY {
        return norm(&r);
    }
    if a <= TINY {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = dot(&d1, &r);
        if e <= TINY {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = dot(&d1, &d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 1e-14 * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let c1 = add(p1, &scale(&d1, s));
    let c2 = add(p2, &scale(&d2, t));
    let mut best = norm(&sub(&c1, &c2));
    // Nearly parallel segments: the clamped solution above is exact only up to
    // the choice of s0; endpoint distances cover the overlap cases.
    if a * e - dot(&d1, &d2).powi(2) <= 1e-14 * a * e {
        best = best
            .min(point_segment_distance(p1, p2, q2))
            .min(point_segment_distance(q1, p2, q2))
            .min(point_segment_distance(p2, p1, q1))
            .min(point_segment_distance(q2, p1, q1));
    }
    best
}

/// Closest point on triangle `abc` to `p`.
pub fn closest_point_on_triangle(p: &Point, a: &Point, b: &Point, c: &Point) -> Point {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(&ab, &ap);
    let d2 = dot(&ac, &ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = sub(p, b);
    let d3 = dot(&ab, &bp);
    let d4 = dot(&ac, &bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return add(a, &scale(&ab, v));
    }
    let cp = sub(p, c);
    let d5 = dot(&ab, &cp);
    let d6 = dot(&ac, &cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return add(a, &scale(&ac, w));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return add(b, &scale(&sub(c, b), w));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    add(a, &add(&scale(&ab, v), &scale(&ac, w)))
}

pub fn point_triangle_distance(p: &Point, a: &Point, b: &Point, c: &Point) -> f64 {
    norm(&sub(p, &closest_point_on_triangle(p, a, b, c)))
}

/// Whether the open segment crosses the triangle interior transversally.
fn segment_crosses_triangle(p: &Point, q: &Point, a: &Point, b: &Point, c: &Point) -> bool {
    let nrm = cross(&sub(b, a), &sub(c, a));
    let dp = dot(&nrm, &sub(p, a));
    let dq = dot(&nrm, &sub(q, a));
    if (dp > 0.0 && dq > 0.0) || (dp < 0.0 && dq < 0.0) || dp == dq {
        return false;
    }
    let t = dp / (dp - dq);
    let x = add(p, &scale(&sub(q, p), t));
    // barycentric sign test on the crossing point
    let s1 = dot(&cross(&sub(b, a), &sub(&x, a)), &nrm);
    let s2 = dot(&cross(&sub(c, b), &sub(&x, b)), &nrm);
    let s3 = dot(&cross(&sub(a, c), &sub(&x, c)), &nrm);
    (s1 >= 0.0 && s2 >= 0.0 && s3 >= 0.0) || (s1 <= 0.0 && s2 <= 0.0 && s3 <= 0.0)
}

/// Distance between the closed segment `[p, q]` and the closed triangle `abc`.
pub fn segment_triangle_distance(p: &Point, q: &Point, a: &Point, b: &Point, c: &Point) -> f64 {
    if segment_crosses_triangle(p, q, a, b, c) {
        return 0.0;
    }
    point_triangle_distance(p, a, b, c)
        .min(point_triangle_distance(q, a, b, c))
        .min(segment_segment_distance(p, q, a, b))
        .min(segment_segment_distance(p, q, b, c))
        .min(segment_segment_distance(p, q, c, a))
}
