use std::path::Path;

use super::predicates::{
    cross, norm, point_segment_distance, point_triangle_distance, segment_segment_distance,
    segment_triangle_distance, sub, to_point, Point,
};
use crate::error::{Error, Result};

/// Minimum (n-1)-volume of an accepted simplex.
pub const MIN_SIMPLEX_MEASURE: f64 = 1e-12;

/// A flat crack patch: a segment (n = 2) or a triangle (n = 3).
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    vertices: Vec<Point>,
    normal: Point,
    measure: f64,
    lo: Point,
    hi: Point,
}

impl Simplex {
    pub fn new(n: usize, vertices: &[Vec<f64>]) -> Result<Self> {
        if vertices.len() != n || vertices.iter().any(|v| v.len() != n) {
            return Err(Error::param(format!("a crack simplex in dimension {n} needs {n} vertices of {n} coordinates")));
        }
        if vertices.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::param("crack vertex coordinates must be finite"));
        }
        let pts: Vec<Point> = vertices.iter().map(|v| to_point(v)).collect();
        let (normal, measure) = match n {
            2 => {
                let d = sub(&pts[1], &pts[0]);
                let len = norm(&d);
                ([-d[1] / len, d[0] / len, 0.0], len)
            }
            3 => {
                let c = cross(&sub(&pts[1], &pts[0]), &sub(&pts[2], &pts[0]));
                let area2 = norm(&c);
                ([c[0] / area2, c[1] / area2, c[2] / area2], 0.5 * area2)
            }
            _ => return Err(Error::param(format!("unsupported dimension {n}"))),
        };
        if !(measure > MIN_SIMPLEX_MEASURE) {
            return Err(Error::Degenerate(format!("crack simplex of measure {measure:e}")));
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &pts {
            for d in 0..3 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        Ok(Self { vertices: pts, normal, measure, lo, hi })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn normal(&self) -> &Point {
        &self.normal
    }

    /// (n-1)-dimensional Hausdorff measure.
    pub fn measure(&self) -> f64 {
        self.measure
    }

    pub fn bbox(&self) -> (Point, Point) {
        (self.lo, self.hi)
    }

    pub fn distance_to_segment(&self, p: &Point, q: &Point) -> f64 {
        match self.vertices.len() {
            2 => segment_segment_distance(p, q, &self.vertices[0], &self.vertices[1]),
            _ => segment_triangle_distance(p, q, &self.vertices[0], &self.vertices[1], &self.vertices[2]),
        }
    }

    pub fn distance_to_point(&self, p: &Point) -> f64 {
        match self.vertices.len() {
            2 => point_segment_distance(p, &self.vertices[0], &self.vertices[1]),
            _ => point_triangle_distance(p, &self.vertices[0], &self.vertices[1], &self.vertices[2]),
        }
    }
}

/// A finite union of flat simplices standing in for a rectifiable crack.
#[derive(Debug, Clone, PartialEq)]
pub struct CrackSurface {
    n: usize,
    simplices: Vec<Simplex>,
}

impl CrackSurface {
    pub fn empty(n: usize) -> Self {
        Self { n, simplices: Vec::new() }
    }

    pub fn new(n: usize, simplices: Vec<Simplex>) -> Result<Self> {
        if !(2..=3).contains(&n) {
            return Err(Error::param(format!("unsupported dimension {n}")));
        }
        if simplices.iter().any(|s| s.vertices.len() != n) {
            return Err(Error::param("simplex dimension does not match crack dimension"));
        }
        Ok(Self { n, simplices })
    }

    /// Builds from raw vertex lists, one simplex per entry.
    pub fn from_vertices(n: usize, patches: &[Vec<Vec<f64>>]) -> Result<Self> {
        let simplices = patches.iter().map(|v| Simplex::new(n, v)).collect::<Result<Vec<_>>>()?;
        Self::new(n, simplices)
    }

    /// A single segment (n = 2).
    pub fn segment(a: [f64; 2], b: [f64; 2]) -> Result<Self> {
        Self::from_vertices(2, &[vec![a.to_vec(), b.to_vec()]])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn push(&mut self, s: Simplex) -> Result<()> {
        if s.vertices.len() != self.n {
            return Err(Error::param("simplex dimension does not match crack dimension"));
        }
        self.simplices.push(s);
        Ok(())
    }

    /// Total (n-1)-measure.
    pub fn measure(&self) -> f64 {
        self.simplices.iter().map(Simplex::measure).sum()
    }

    /// `sum_s |nu_s . e| / |e| * H^{n-1}(s)` for an integer direction `e`.
    pub fn slab_weight(&self, e: &[f64]) -> f64 {
        let len = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        self.simplices
            .iter()
            .map(|s| {
                let proj: f64 = e.iter().zip(s.normal.iter()).map(|(a, b)| a * b).sum();
                proj.abs() / len * s.measure
            })
            .sum()
    }

    /// Parses the plain-text format: one simplex per line with `n * n`
    /// whitespace-separated vertex coordinates. `#` starts a comment.
    pub fn parse(text: &str, n: usize, path: &Path) -> Result<Self> {
        let mut simplices = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |msg: String| Error::Parse { path: path.to_path_buf(), line: lineno + 1, msg };
            let nums = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| parse_err(format!("bad number {t:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if nums.len() != n * n {
                return Err(parse_err(format!("expected {} coordinates, found {}", n * n, nums.len())));
            }
            let verts: Vec<Vec<f64>> = nums.chunks(n).map(<[f64]>::to_vec).collect();
            let s = Simplex::new(n, &verts).map_err(|e| parse_err(e.to_string()))?;
            if (norm(&s.normal) - 1.0).abs() > 1e-12 {
                return Err(parse_err("normal failed unit-length validation".into()));
            }
            simplices.push(s);
        }
        Self::new(n, simplices)
    }

    pub fn load(path: &Path, n: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text, n, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.simplices {
            let coords: Vec<String> = s
                .vertices
                .iter()
                .flat_map(|v| v[..self.n].iter().map(|x| format!("{x:?}")))
                .collect();
            out.push_str(&coords.join(" "));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_normal_and_measure() {
        let c = CrackSurface::segment([0.5, 0.0], [0.5, 1.0]).unwrap();
        let s = &c.simplices()[0];
        assert!((s.measure() - 1.0).abs() < 1e-15);
        assert!((s.normal()[0].abs() - 1.0).abs() < 1e-15);
        assert!((c.slab_weight(&[1.0, 1.0]) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn degenerate_simplices_rejected() {
        assert!(CrackSurface::segment([0.5, 0.5], [0.5, 0.5]).is_err());
        let tri = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![2.0, 0.0, 0.0]];
        assert!(Simplex::new(3, &tri).is_err());
    }

    #[test]
    fn parse_roundtrip_and_errors() {
        let text = "# vertical crack\n0.5 0 0.5 1\n\n0.2 0.2 0.3 0.4 # tilted\n";
        let c = CrackSurface::parse(text, 2, Path::new("mem")).unwrap();
        assert_eq!(c.simplices().len(), 2);
        let again = CrackSurface::parse(&c.to_text(), 2, Path::new("mem")).unwrap();
        assert_eq!(again, c);
        let err = CrackSurface::parse("0 0 1\n", 2, Path::new("f.txt")).unwrap_err();
        assert!(err.to_string().contains("f.txt:1"));
        assert!(CrackSurface::parse("0 0 0 0\n", 2, Path::new("f")).is_err());
        let tri = CrackSurface::parse("0.5 0 0  0.5 1 0  0.5 0 1\n", 3, Path::new("f")).unwrap();
        assert!((tri.measure() - 0.5).abs() < 1e-15);
    }
}
