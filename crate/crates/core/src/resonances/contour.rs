//! Zero counting by the argument principle and certified root search in
//! rectangles.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re0: f64,
    pub re1: f64,
    pub im0: f64,
    pub im1: f64,
}

impl Rect {
    pub fn new(re0: f64, re1: f64, im0: f64, im1: f64) -> Result<Rect> {
        if !(re1 > re0 && im1 > im0) || [re0, re1, im0, im1].iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "degenerate box [{re0}, {re1}] x [{im0}, {im1}]"
            )));
        }
        Ok(Rect { re0, re1, im0, im1 })
    }

    /// Square of half-width `r` around `c`.
    pub fn around(c: Complex64, r: f64) -> Rect {
        Rect {
            re0: c.re - r,
            re1: c.re + r,
            im0: c.im - r,
            im1: c.im + r,
        }
    }

    /// Parses `re0,re1,im0,im1`.
    pub fn parse(text: &str) -> Result<Rect> {
        let parts: Vec<f64> = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("bad box '{text}': {e}")))?;
        if parts.len() != 4 {
            return Err(Error::Config(format!("box needs four numbers, got '{text}'")));
        }
        Rect::new(parts[0], parts[1], parts[2], parts[3])
    }

    pub fn width(&self) -> f64 {
        self.re1 - self.re0
    }

    pub fn height(&self) -> f64 {
        self.im1 - self.im0
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re0 + self.re1), 0.5 * (self.im0 + self.im1))
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re0 && z.re <= self.re1 && z.im >= self.im0 && z.im <= self.im1
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re0, self.im0),
            Complex64::new(self.re1, self.im0),
            Complex64::new(self.re1, self.im1),
            Complex64::new(self.re0, self.im1),
        ]
    }

    pub fn grown(&self, by: f64) -> Rect {
        Rect {
            re0: self.re0 - by,
            re1: self.re1 + by,
            im0: self.im0 - by,
            im1: self.im1 + by,
        }
    }

    /// Four children split at fractions `(fx, fy)` of the sides.
    fn split(&self, fx: f64, fy: f64) -> [Rect; 4] {
        let xm = self.re0 + fx * self.width();
        let ym = self.im0 + fy * self.height();
        [
            Rect { re0: self.re0, re1: xm, im0: self.im0, im1: ym },
            Rect { re0: xm, re1: self.re1, im0: self.im0, im1: ym },
            Rect { re0: xm, re1: self.re1, im0: ym, im1: self.im1 },
            Rect { re0: self.re0, re1: xm, im0: ym, im1: self.im1 },
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub lambda: Complex64,
    pub multiplicity: usize,
    /// |F(λ)| after polishing.
    pub residual: f64,
    pub certified_box: Rect,
}

/// Flat JSON record {re, im, multiplicity, residual, box}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceRecord {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
    pub residual: f64,
    #[serde(rename = "box")]
    pub certified_box: [f64; 4],
}

impl From<&Resonance> for ResonanceRecord {
    fn from(r: &Resonance) -> Self {
        let b = r.certified_box;
        ResonanceRecord {
            re: r.lambda.re,
            im: r.lambda.im,
            multiplicity: r.multiplicity,
            residual: r.residual,
            certified_box: [b.re0, b.re1, b.im0, b.im1],
        }
    }
}

/// Memoizing evaluator; points are keyed by their exact bit patterns.
pub struct CachedFn<'a> {
    f: &'a (dyn Fn(Complex64) -> Result<Complex64> + Sync),
    cache: Mutex<HashMap<(u64, u64), Complex64>>,
}

impl<'a> CachedFn<'a> {
    pub fn new(f: &'a (dyn Fn(Complex64) -> Result<Complex64> + Sync)) -> Self {
        CachedFn {
            f,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn key(z: Complex64) -> (u64, u64) {
        (z.re.to_bits(), z.im.to_bits())
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        if let Some(v) = self.cache.lock().unwrap().get(&Self::key(z)) {
            return Ok(*v);
        }
        let v = (self.f)(z)?;
        self.cache.lock().unwrap().insert(Self::key(z), v);
        Ok(v)
    }

    pub fn eval_many(&self, zs: &[Complex64]) -> Result<Vec<Complex64>> {
        let missing: Vec<Complex64> = {
            let c = self.cache.lock().unwrap();
            let mut seen = std::collections::HashSet::new();
            zs.iter()
                .copied()
                .filter(|z| !c.contains_key(&Self::key(*z)) && seen.insert(Self::key(*z)))
                .collect()
        };
        let vals: Vec<Complex64> = missing
            .par_iter()
            .map(|&z| (self.f)(z))
            .collect::<Result<Vec<_>>>()?;
        let mut c = self.cache.lock().unwrap();
        for (z, v) in missing.into_iter().zip(vals) {
            c.insert(Self::key(z), v);
        }
        Ok(zs.iter().map(|z| c[&Self::key(*z)]).collect())
    }
}

/// Outcome of a boundary traversal.
#[derive(Debug, Clone, Copy)]
pub struct Winding {
    pub count: i64,
    pub max_abs: f64,
    pub min_abs: f64,
    pub samples: usize,
}

const INITIAL_PER_EDGE: usize = 16;
const MAX_ARG_STEP: f64 = PI / 4.0;
/// A boundary sample this small relative to the boundary maximum means a
/// zero sits (numerically) on the contour.
const NEAR_ZERO: f64 = 1e-10;

fn wrap(d: f64) -> f64 {
    let mut d = d;
    while d > PI {
        d -= 2.0 * PI;
    }
    while d <= -PI {
        d += 2.0 * PI;
    }
    d
}

/// Winding number of f around a closed polygon with adaptively refined
/// samples (every argument increment below π/4).
pub fn winding_polygon(f: &CachedFn, vertices: &[Complex64]) -> Result<Winding> {
    winding_sampled(f, vertices, INITIAL_PER_EDGE)
}

fn winding_sampled(f: &CachedFn, vertices: &[Complex64], per_edge: usize) -> Result<Winding> {
    let m = vertices.len();
    let mut segments: Vec<(Complex64, Complex64)> = Vec::new();
    for k in 0..m {
        let a = vertices[k];
        let b = vertices[(k + 1) % m];
        for s in 0..per_edge {
            let t0 = s as f64 / per_edge as f64;
            let t1 = (s + 1) as f64 / per_edge as f64;
            let p0 = if s == 0 { a } else { a + (b - a) * t0 };
            let p1 = if s + 1 == per_edge { b } else { a + (b - a) * t1 };
            segments.push((p0, p1));
        }
    }
    let perimeter: f64 = (0..m).map(|k| (vertices[(k + 1) % m] - vertices[k]).norm()).sum();
    let min_len = 1e-12 * perimeter;
    let mut total = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut min_abs = f64::INFINITY;
    let mut samples = 0usize;
    let mut pending = segments;
    while !pending.is_empty() {
        let pts: Vec<Complex64> = pending.iter().flat_map(|s| [s.0, s.1]).collect();
        let vals = f.eval_many(&pts)?;
        let mut next = Vec::new();
        let mut mids = Vec::new();
        for (k, seg) in pending.iter().enumerate() {
            let (fa, fb) = (vals[2 * k], vals[2 * k + 1]);
            max_abs = max_abs.max(fa.norm()).max(fb.norm());
            min_abs = min_abs.min(fa.norm()).min(fb.norm());
            if fa == Complex64::new(0.0, 0.0) || fb == Complex64::new(0.0, 0.0) {
                return Err(Error::ContourAccuracy("exact zero on the contour".into()));
            }
            let d = wrap(fb.arg() - fa.arg());
            if d.abs() < MAX_ARG_STEP {
                total += d;
                samples += 1;
            } else {
                if (seg.1 - seg.0).norm() < min_len {
                    return Err(Error::ContourAccuracy(
                        "argument increments do not resolve; refine boundary sampling".into(),
                    ));
                }
                let mid = 0.5 * (seg.0 + seg.1);
                mids.push(mid);
                next.push((seg.0, mid));
                next.push((mid, seg.1));
            }
        }
        f.eval_many(&mids)?;
        pending = next;
    }
    let w = total / (2.0 * PI);
    let count = w.round();
    if (w - count).abs() > 0.1 {
        return Err(Error::ContourAccuracy(format!(
            "winding accumulation {w} is not an integer; refine boundary sampling"
        )));
    }
    Ok(Winding {
        count: count as i64,
        max_abs,
        min_abs,
        samples,
    })
}

pub fn winding_rect(f: &CachedFn, r: &Rect) -> Result<Winding> {
    winding_polygon(f, &r.corners())
}

/// Winding around a circle sampled at `points` vertices (refined adaptively).
pub fn winding_circle(f: &CachedFn, center: Complex64, radius: f64, points: usize) -> Result<Winding> {
    let verts: Vec<Complex64> = (0..points)
        .map(|k| center + Complex64::from_polar(radius, 2.0 * PI * k as f64 / points as f64))
        .collect();
    winding_sampled(f, &verts, 1)
}

/// Newton iteration with central-difference derivative. Stops at the step
/// tolerance or once |f| stops decreasing (evaluation noise reached), and
/// returns the best iterate.
pub fn newton(f: &CachedFn, start: Complex64, step_scale: f64, tol: f64) -> Result<(Complex64, f64)> {
    let mut z = start;
    let h = 1e-6 * step_scale;
    let mut fz = f.eval(z)?;
    let mut best = (z, fz.norm());
    for it in 0..60 {
        let fp = (f.eval(z + h)? - f.eval(z - h)?) / (2.0 * h);
        if fp.norm() == 0.0 || !fp.is_finite() {
            break;
        }
        let dz = fz / fp;
        z -= dz;
        fz = f.eval(z)?;
        let r = fz.norm();
        if r < best.1 {
            best = (z, r);
        } else if it >= 2 {
            break;
        }
        if dz.norm() <= tol.max(1e-15 * z.norm()) {
            break;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    /// Root tolerance; also the size below which clusters are reported.
    pub tol: f64,
    /// Relative residual bound |F(λ)| ≤ residual_rel · max|F| on the cell.
    pub residual_rel: f64,
    /// Absolute evaluation noise of F; residuals below it always pass.
    pub abs_floor: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            tol: 1e-12,
            residual_rel: 1e-9,
            abs_floor: 0.0,
        }
    }
}

/// Split fractions tried in turn; off-center so that symmetric zero sets do
/// not land on the cut lines.
const SPLITS: [(f64, f64); 4] = [(0.5141, 0.4862), (0.4717, 0.5273), (0.5389, 0.5411), (0.4433, 0.4587)];

/// All zeros of `f` in `rect`, with multiplicities, sorted by (Re, Im).
pub fn find_zeros(
    f: &(dyn Fn(Complex64) -> Result<Complex64> + Sync),
    rect: Rect,
    opts: SearchOptions,
) -> Result<Vec<Resonance>> {
    let cf = CachedFn::new(f);
    // nudge the outer box outward if a zero lies on it
    let mut rect = rect;
    let mut top = None;
    for attempt in 0..6 {
        match winding_rect(&cf, &rect) {
            Ok(w) if w.min_abs > NEAR_ZERO * w.max_abs => {
                top = Some(w);
                break;
            }
            Ok(_) | Err(Error::ContourAccuracy(_)) if attempt < 5 => {
                rect = rect.grown(1e-3 * rect.diameter() * (attempt + 1) as f64);
            }
            Ok(_) => {
                return Err(Error::ContourAccuracy("a zero persists on the search box boundary".into()));
            }
            Err(e) => return Err(e),
        }
    }
    let top = top.ok_or_else(|| Error::ContourAccuracy("search box could not be certified".into()))?;
    let mut roots = Vec::new();
    let mut stack = vec![(rect, top)];
    while let Some((cell, w)) = stack.pop() {
        if w.count <= 0 {
            if w.count < 0 {
                return Err(Error::NumericalInconsistency("negative winding for an entire function".into()));
            }
            continue;
        }
        let size = cell.width().max(cell.height());
        if w.count == 1 {
            let (z, res) = newton(&cf, cell.center(), size.min(1.0).max(1e-3), opts.tol)?;
            if cell.contains(z) && res <= (opts.residual_rel * w.max_abs).max(opts.abs_floor) {
                roots.push(Resonance {
                    lambda: z,
                    multiplicity: 1,
                    residual: res,
                    certified_box: cell,
                });
                continue;
            }
        }
        if size <= opts.tol.max(1e-9) * 10.0 {
            // cluster below resolution: one multiple zero
            let (z, res) = newton(&cf, cell.center(), size.max(1e-9), opts.tol)?;
            let z = if cell.contains(z) { z } else { cell.center() };
            roots.push(Resonance {
                lambda: z,
                multiplicity: w.count as usize,
                residual: res,
                certified_box: cell,
            });
            continue;
        }
        let mut done = false;
        for &(fx, fy) in SPLITS.iter() {
            let kids = cell.split(fx, fy);
            let mut ws = Vec::with_capacity(4);
            let mut ok = true;
            for k in kids.iter() {
                match winding_rect(&cf, k) {
                    Ok(kw) if kw.min_abs > NEAR_ZERO * kw.max_abs => ws.push(kw),
                    Ok(_) | Err(Error::ContourAccuracy(_)) => {
                        ok = false;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            if !ok {
                continue;
            }
            let sum: i64 = ws.iter().map(|k| k.count).sum();
            if sum != w.count {
                return Err(Error::ContourAccuracy(format!(
                    "winding not additive ({} vs {sum}); refine boundary sampling",
                    w.count
                )));
            }
            // push in reverse so that the first quadrant is processed first
            for (k, kw) in kids.iter().zip(ws).rev() {
                stack.push((*k, kw));
            }
            done = true;
            break;
        }
        if !done {
            return Err(Error::ContourAccuracy("no admissible subdivision of a cell".into()));
        }
    }
    roots.sort_by(|a, b| a.lambda.re.total_cmp(&b.lambda.re).then(a.lambda.im.total_cmp(&b.lambda.im)));
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_roots() {
        let roots = [Complex64::new(0.3, 0.2), Complex64::new(-0.5, -0.1), Complex64::new(0.3, -0.6)];
        let f = move |z: Complex64| -> Result<Complex64> {
            Ok(roots.iter().fold(Complex64::new(1.0, 0.0), |acc, r| acc * (z - r)))
        };
        let found = find_zeros(&f, Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap(), SearchOptions::default()).unwrap();
        assert_eq!(found.len(), 3);
        for r in roots {
            assert!(found.iter().any(|z| (z.lambda - r).norm() < 1e-10));
        }
    }

    #[test]
    fn double_root_is_one_cluster() {
        let f = |z: Complex64| -> Result<Complex64> { Ok((z - Complex64::new(0.1, 0.1)).powu(2) * (z + 0.7)) };
        let found = find_zeros(&f, Rect::new(-0.5, 0.5, -0.5, 0.5).unwrap(), SearchOptions::default()).unwrap();
        assert_eq!(found.iter().map(|r| r.multiplicity).sum::<usize>(), 2);
    }

    #[test]
    fn parse_box() {
        let r = Rect::parse("-3,3,-3,0.5").unwrap();
        assert_eq!(r, Rect::new(-3.0, 3.0, -3.0, 0.5).unwrap());
        assert!(Rect::parse("1,2,3").is_err());
    }
}
