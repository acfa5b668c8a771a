//! Resilient vector consensus kernels.
//!
//! Given the vectors received from in-neighbours, at most `f` of which are
//! adversarial, the exact kernels return a point inside the convex hull of the
//! honest vectors whatever the identity of the adversarial ones, provided
//! `f < n/(m+1)` in dimension `m`:
//!
//! * `m = 1`: the lower median;
//! * `m = 2`: a centerpoint (Tukey depth at least `⌈n/3⌉`), certified by a
//!   brute-force depth computation;
//! * any `m`: a point in the intersection of all leave-`f`-out hulls, found by
//!   one feasibility program (nonempty by Helly's theorem).
//!
//! [`coordinate_wise`] is the scalable fallback with no hull guarantee.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::lp::{find_feasible, solve_sparse, Feasibility, Row};

/// Equality tolerance for hull-membership programs.
pub const HULL_TOL: f64 = 1e-8;
/// Default bound on the number of leave-f-out subsets the LP kernel enumerates.
pub const DEFAULT_SUBSET_CAP: usize = 5000;
/// Critical directions closer than this (radians) are treated as coincident.
const ANGLE_MERGE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub points: Vec<Vec<f64>>,
    pub f: usize,
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>, f: usize) -> Self {
        Self { points, f }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn check_shape(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Resilience("no points to aggregate".into()));
        }
        let m = self.dim();
        if self.points.iter().any(|p| p.len() != m) {
            return Err(Error::Domain("points have inconsistent dimensions".into()));
        }
        Ok(())
    }
}

/// `f < n / (m + 1)`
pub fn resilience_holds(n: usize, f: usize, dim: usize) -> bool {
    f * (dim + 1) < n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Exact1d,
    Exact2d,
    ExactLp,
    CoordinateWise,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Exact1d => "exact-1d",
            Mode::Exact2d => "exact-2d",
            Mode::ExactLp => "exact-lp",
            Mode::CoordinateWise => "coordinate-wise",
        }
    }

    pub fn is_exact(self) -> bool {
        !matches!(self, Mode::CoordinateWise)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Why the returned point is safe.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// Lower median of the values.
    Median,
    /// Brute-force Tukey depth of the point and the depth that was required.
    Depth { depth: usize, required: usize },
    /// Membership in every leave-f-out hull, checked through this many subsets.
    HullIntersection { subsets: usize },
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafePointResult {
    pub point: Vec<f64>,
    /// Strictly positive convex weights over input indices, sorted by index.
    pub weights: Option<Vec<(usize, f64)>>,
    pub mode: Mode,
    pub certificate: Certificate,
}

impl SafePointResult {
    /// `‖Σ wⱼ pⱼ − point‖∞`, or `None` without weights.
    pub fn weight_residual(&self, points: &[Vec<f64>]) -> Option<f64> {
        let w = self.weights.as_ref()?;
        let mut acc = vec![0.0; self.point.len()];
        for &(j, wj) in w {
            for (a, p) in acc.iter_mut().zip(&points[j]) {
                *a += wj * p;
            }
        }
        Some(acc.iter().zip(&self.point).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

/// Which kernel the dispatcher [`safe_point`] should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RvcMode {
    /// Median in 1-D, centerpoint in 2-D, hull intersection LP otherwise.
    Exact,
    /// Always the hull intersection LP.
    ExactLp,
    CoordinateWise,
}

impl RvcMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exact" => Some(Self::Exact),
            "exact-lp" | "lp" => Some(Self::ExactLp),
            "coordinate-wise" | "coordinatewise" => Some(Self::CoordinateWise),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::ExactLp => "exact-lp",
            Self::CoordinateWise => "coordinate-wise",
        }
    }

    /// Dimension that enters the resilience condition.
    pub fn condition_dim(self, dim: usize) -> usize {
        match self {
            Self::CoordinateWise => 1,
            _ => dim,
        }
    }
}

pub fn safe_point(points: &PointSet, mode: RvcMode, subset_cap: usize) -> Result<SafePointResult> {
    points.check_shape()?;
    match mode {
        RvcMode::CoordinateWise => coordinate_wise(points),
        RvcMode::ExactLp => safe_point_lp(points, subset_cap),
        RvcMode::Exact => match points.dim() {
            1 => {
                let values: Vec<f64> = points.points.iter().map(|p| p[0]).collect();
                safe_point_1d(&values, points.f)
            }
            2 => centerpoint_2d(points),
            _ => safe_point_lp(points, subset_cap),
        },
    }
}

fn resilience_error(n: usize, f: usize, dim: usize) -> Error {
    Error::Resilience(format!("f = {f} is not below n/(d+1) = {n}/{}", dim + 1))
}

/// Indices sorted by value, ties broken by index.
fn argsort(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

fn lower_median_index(values: &[f64]) -> usize {
    argsort(values)[(values.len() - 1) / 2]
}

/// Lower median; lies in the range of every `n − f` subset when `f < n/2`.
pub fn safe_point_1d(values: &[f64], f: usize) -> Result<SafePointResult> {
    if values.is_empty() || !resilience_holds(values.len(), f, 1) {
        return Err(resilience_error(values.len(), f, 1));
    }
    let j = lower_median_index(values);
    Ok(SafePointResult {
        point: vec![values[j]],
        weights: Some(vec![(j, 1.0)]),
        mode: Mode::Exact1d,
        certificate: Certificate::Median,
    })
}

/// Per-coordinate lower median. No hull guarantee beyond one dimension.
pub fn coordinate_wise(points: &PointSet) -> Result<SafePointResult> {
    points.check_shape()?;
    if !resilience_holds(points.len(), points.f, 1) {
        return Err(resilience_error(points.len(), points.f, 1));
    }
    let m = points.dim();
    let mut column = vec![0.0; points.len()];
    let point = (0..m)
        .map(|c| {
            for (slot, p) in column.iter_mut().zip(&points.points) {
                *slot = p[c];
            }
            column[lower_median_index(&column)]
        })
        .collect();
    Ok(SafePointResult {
        point,
        weights: None,
        mode: Mode::CoordinateWise,
        certificate: Certificate::None,
    })
}

/// Minimum number of points in a closed halfspace containing `query`.
/// Supports dimensions 1 and 2.
pub fn tukey_depth(query: &[f64], points: &[Vec<f64>]) -> Result<usize> {
    match query.len() {
        1 => {
            let q = query[0];
            let below = points.iter().filter(|p| p[0] <= q).count();
            let above = points.iter().filter(|p| p[0] >= q).count();
            Ok(below.min(above))
        }
        2 => Ok(depth_2d(query[0], query[1], points)),
        m => Err(Error::UnsupportedDimension(m)),
    }
}

fn depth_2d(qx: f64, qy: f64, points: &[Vec<f64>]) -> usize {
    let scale = points
        .iter()
        .flat_map(|p| [(p[0] - qx).abs(), (p[1] - qy).abs()])
        .fold(0.0, f64::max)
        .max(1.0);
    let mut coincident = 0usize;
    let mut dirs: Vec<f64> = Vec::with_capacity(points.len());
    for p in points {
        let (dx, dy) = (p[0] - qx, p[1] - qy);
        if dx.hypot(dy) <= 1e-12 * scale {
            coincident += 1;
        } else {
            dirs.push(dy.atan2(dx));
        }
    }
    if dirs.is_empty() {
        return coincident;
    }
    // The closed halfspace with normal angle θ holds p iff cos(φ_p − θ) ≥ 0;
    // membership changes only at θ = φ_p ± π/2.
    let two_pi = std::f64::consts::TAU;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut critical: Vec<f64> = dirs
        .iter()
        .flat_map(|&phi| [(phi + half_pi).rem_euclid(two_pi), (phi - half_pi).rem_euclid(two_pi)])
        .collect();
    critical.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::with_capacity(critical.len());
    for c in critical {
        if merged.last().is_none_or(|&last| c - last > ANGLE_MERGE) {
            merged.push(c);
        }
    }
    if merged.len() > 1 && merged[0] + two_pi - merged[merged.len() - 1] <= ANGLE_MERGE {
        merged.pop();
    }
    let mut best = usize::MAX;
    for (i, &start) in merged.iter().enumerate() {
        let end = if i + 1 < merged.len() { merged[i + 1] } else { merged[0] + two_pi };
        let theta = 0.5 * (start + end);
        let (ux, uy) = (theta.cos(), theta.sin());
        let count = points
            .iter()
            .filter(|p| (p[0] - qx) * ux + (p[1] - qy) * uy >= 0.0)
            .count();
        best = best.min(count);
    }
    best.max(coincident)
}

fn candidates_2d(points: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let n = points.len();
    let mut out: Vec<[f64; 2]> = points.iter().map(|p| [p[0], p[1]]).collect();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                out.push([
                    (points[i][0] + points[j][0] + points[k][0]) / 3.0,
                    (points[i][1] + points[j][1] + points[k][1]) / 3.0,
                ]);
            }
        }
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    let lines: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    for (a, &(i, j)) in lines.iter().enumerate() {
        for &(k, l) in &lines[a + 1..] {
            if let Some(x) = line_intersection(&points[i], &points[j], &points[k], &points[l]) {
                if (0..2).all(|c| x[c] >= lo[c] && x[c] <= hi[c]) {
                    out.push(x);
                }
            }
        }
    }
    out
}

fn line_intersection(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Option<[f64; 2]> {
    let r = [b[0] - a[0], b[1] - a[1]];
    let s = [d[0] - c[0], d[1] - c[1]];
    let denom = r[0] * s[1] - r[1] * s[0];
    let scale = (r[0].hypot(r[1]) * s[0].hypot(s[1])).max(f64::MIN_POSITIVE);
    if denom.abs() <= 1e-12 * scale {
        return None;
    }
    let t = ((c[0] - a[0]) * s[1] - (c[1] - a[1]) * s[0]) / denom;
    Some([a[0] + t * r[0], a[1] + t * r[1]])
}

/// Point of Tukey depth `≥ ⌈n/3⌉`, searched among the inputs, triple
/// centroids and intersections of lines through input pairs, closest to the
/// coordinate-wise median first. Falls back to [`safe_point_lp`] when no
/// candidate certifies.
pub fn centerpoint_2d(points: &PointSet) -> Result<SafePointResult> {
    points.check_shape()?;
    if points.dim() != 2 {
        return Err(Error::UnsupportedDimension(points.dim()));
    }
    let n = points.len();
    if !resilience_holds(n, points.f, 2) {
        return Err(resilience_error(n, points.f, 2));
    }
    let required = n.div_ceil(3);
    let pts = &points.points;
    let median = coordinate_wise(&PointSet::new(pts.clone(), 0))?.point;
    let mut cands = candidates_2d(pts);
    let dist = |c: &[f64; 2]| (c[0] - median[0]).powi(2) + (c[1] - median[1]).powi(2);
    cands.sort_by(|a, b| dist(a).partial_cmp(&dist(b)).unwrap_or(Ordering::Equal));
    for c in cands {
        let depth = depth_2d(c[0], c[1], pts);
        if depth < required {
            continue;
        }
        if let Some(weights) = hull_weights(&c, pts) {
            return Ok(SafePointResult {
                point: c.to_vec(),
                weights: Some(weights),
                mode: Mode::Exact2d,
                certificate: Certificate::Depth { depth, required },
            });
        }
    }
    safe_point_lp(points, DEFAULT_SUBSET_CAP)
}

/// Affine normalisation so LP coefficients are O(1).
struct Normalizer {
    center: Vec<f64>,
    inv_scale: f64,
}

impl Normalizer {
    fn new(points: &[Vec<f64>]) -> Self {
        let m = points[0].len();
        let mut center = vec![0.0; m];
        for p in points {
            for (c, v) in center.iter_mut().zip(p) {
                *c += v;
            }
        }
        center.iter_mut().for_each(|c| *c /= points.len() as f64);
        let spread = points
            .iter()
            .flat_map(|p| p.iter().zip(&center).map(|(v, c)| (v - c).abs()))
            .fold(0.0, f64::max);
        Self { center, inv_scale: if spread > 0.0 { 1.0 / spread } else { 1.0 } }
    }

    fn apply(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(&self.center).map(|(v, c)| (v - c) * self.inv_scale).collect()
    }
}

fn sparse_weights(raw: &[f64], index: impl Fn(usize) -> usize) -> Vec<(usize, f64)> {
    let mut w: Vec<(usize, f64)> = raw
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 1e-13)
        .map(|(k, &v)| (index(k), v))
        .collect();
    let total: f64 = w.iter().map(|(_, v)| v).sum();
    w.iter_mut().for_each(|(_, v)| *v /= total);
    w.sort_by_key(|&(j, _)| j);
    w
}

fn residual_inf(query: &[f64], points: &[Vec<f64>], weights: &[(usize, f64)]) -> f64 {
    let mut acc = vec![0.0; query.len()];
    for &(j, w) in weights {
        for (a, p) in acc.iter_mut().zip(&points[j]) {
            *a += w * p;
        }
    }
    acc.iter().zip(query).map(|(a, q)| (a - q).abs()).fold(0.0, f64::max)
}

/// Convex weights reproducing `query` from `points`, if `query` lies in their
/// hull (equality tolerance [`HULL_TOL`] relative to the point spread).
pub fn hull_weights(query: &[f64], points: &[Vec<f64>]) -> Option<Vec<(usize, f64)>> {
    if points.is_empty() {
        return None;
    }
    let m = query.len();
    let norm = Normalizer::new(points);
    let q = norm.apply(query);
    let scaled: Vec<Vec<f64>> = points.iter().map(|p| norm.apply(p)).collect();
    let n = points.len();
    let mut rows: Vec<Vec<f64>> = (0..m).map(|c| scaled.iter().map(|p| p[c]).collect()).collect();
    rows.push(vec![1.0; n]);
    let mut rhs = q.clone();
    rhs.push(1.0);
    match find_feasible(&rows, &rhs, n) {
        Feasibility::Feasible(x) => {
            let w = sparse_weights(&x, |k| k);
            if w.is_empty() {
                return None;
            }
            let tol = HULL_TOL * (1.0 / norm.inv_scale).max(1.0);
            (residual_inf(query, points, &w) <= tol).then_some(w)
        }
        Feasibility::Infeasible { .. } => None,
    }
}

pub fn in_hull(query: &[f64], points: &[Vec<f64>]) -> bool {
    hull_weights(query, points).is_some()
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Point in the intersection of the hulls of all leave-`f`-out subsets.
///
/// Variables are one weight vector per subset; the first subset's
/// combination defines the point and every other subset must reproduce it.
pub fn safe_point_lp(points: &PointSet, subset_cap: usize) -> Result<SafePointResult> {
    points.check_shape()?;
    let n = points.len();
    let m = points.dim();
    let f = points.f;
    if !resilience_holds(n, f, m) {
        return Err(resilience_error(n, f, m));
    }
    let pts = &points.points;
    if f == 0 {
        let w = 1.0 / n as f64;
        let mut point = vec![0.0; m];
        for p in pts {
            for (a, v) in point.iter_mut().zip(p) {
                *a += w * v;
            }
        }
        return Ok(SafePointResult {
            point,
            weights: Some((0..n).map(|j| (j, w)).collect()),
            mode: Mode::ExactLp,
            certificate: Certificate::HullIntersection { subsets: 1 },
        });
    }
    let count = binomial(n, f);
    if count > subset_cap as u128 {
        return Err(Error::SubsetCap { subsets: count, cap: subset_cap });
    }
    let subsets = combinations(n, n - f);
    let size = n - f;
    let norm = Normalizer::new(pts);
    let scaled: Vec<Vec<f64>> = pts.iter().map(|p| norm.apply(p)).collect();

    // variables: the point (m, free) then one weight block per subset
    let cols = m + subsets.len() * size;
    let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); m];
    bounds.resize(cols, (0.0, f64::INFINITY));
    let mut rows = Vec::with_capacity(subsets.len() * (m + 1));
    for (s, subset) in subsets.iter().enumerate() {
        let base = m + s * size;
        rows.push(Row { terms: (0..size).map(|k| (base + k, 1.0)).collect(), rhs: 1.0 });
        for c in 0..m {
            let mut terms: Vec<(usize, f64)> = subset.iter().enumerate().map(|(k, &j)| (base + k, scaled[j][c])).collect();
            terms.push((c, -1.0));
            rows.push(Row { terms, rhs: 0.0 });
        }
    }
    let x = match solve_sparse(&bounds, &rows) {
        Feasibility::Feasible(x) => x,
        Feasibility::Infeasible { reason } => {
            return Err(Error::Internal(format!("leave-f-out hull intersection reported empty ({reason})")))
        }
    };
    let x = &x[m..];
    let weights = sparse_weights(&x[..size], |k| subsets[0][k]);
    let mut point = vec![0.0; m];
    for &(j, w) in &weights {
        for (a, v) in point.iter_mut().zip(&pts[j]) {
            *a += w * v;
        }
    }
    let tol = HULL_TOL * (1.0 / norm.inv_scale).max(1.0);
    for (s, subset) in subsets.iter().enumerate().skip(1) {
        let w = sparse_weights(&x[s * size..(s + 1) * size], |k| subset[k]);
        if w.is_empty() || residual_inf(&point, pts, &w) > tol {
            return Err(Error::Internal(format!("subset {s} certificate does not reproduce the point")));
        }
    }
    Ok(SafePointResult {
        point,
        weights: Some(weights),
        mode: Mode::ExactLp,
        certificate: Certificate::HullIntersection { subsets: subsets.len() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[[f64; 2]]) -> Vec<Vec<f64>> {
        v.iter().map(|p| p.to_vec()).collect()
    }

    const SQUARE: [[f64; 2]; 4] = [[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]];

    #[test]
    fn depth_examples() {
        let line = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert_eq!(tukey_depth(&[1.0], &line).unwrap(), 2);
        assert_eq!(tukey_depth(&[5.0], &line).unwrap(), 0);
        let sq = pts(&SQUARE);
        assert_eq!(tukey_depth(&[0.0, 0.0], &sq).unwrap(), 2);
        assert_eq!(tukey_depth(&[10.0, 10.0], &sq).unwrap(), 0);
        assert_eq!(tukey_depth(&[1.0, 1.0], &sq).unwrap(), 1);
        assert!(matches!(
            tukey_depth(&[0.0, 0.0, 0.0], &[vec![0.0, 0.0, 0.0]]),
            Err(Error::UnsupportedDimension(3))
        ));
    }

    #[test]
    fn median_examples() {
        assert_eq!(safe_point_1d(&[1.0, 2.0, 100.0], 1).unwrap().point, vec![2.0]);
        assert_eq!(safe_point_1d(&[5.0], 0).unwrap().point, vec![5.0]);
        assert_eq!(safe_point_1d(&[0.0, 0.0, 0.0, 10.0], 1).unwrap().point, vec![0.0]);
        assert_eq!(safe_point_1d(&[4.0, 1.0, 3.0, 2.0], 1).unwrap().point, vec![2.0]);
        assert!(matches!(safe_point_1d(&[1.0, 2.0], 1), Err(Error::Resilience(_))));
    }

    #[test]
    fn centerpoint_examples() {
        let sq = PointSet::new(pts(&SQUARE), 1);
        let r = centerpoint_2d(&sq).unwrap();
        assert_eq!(r.mode, Mode::Exact2d);
        assert!(tukey_depth(&r.point, &sq.points).unwrap() >= 2);
        assert!(r.weight_residual(&sq.points).unwrap() < 1e-9);

        let single = PointSet::new(vec![vec![3.0, -2.0]], 0);
        assert_eq!(centerpoint_2d(&single).unwrap().point, vec![3.0, -2.0]);

        let collinear = PointSet::new(pts(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]), 1);
        let r = centerpoint_2d(&collinear).unwrap();
        assert!(r.point[0] >= 1.0 - 1e-12 && r.point[0] <= 2.0 + 1e-12);
        assert!((r.point[0] - r.point[1]).abs() < 1e-12);
    }

    #[test]
    fn lp_examples() {
        let r = safe_point_lp(&PointSet::new(vec![vec![1.0], vec![2.0], vec![100.0]], 1), 5000).unwrap();
        assert!((r.point[0] - 2.0).abs() < 1e-9);

        let r = safe_point_lp(&PointSet::new(pts(&SQUARE), 1), 5000).unwrap();
        assert!(r.point[0].abs() < 1e-9 && r.point[1].abs() < 1e-9, "{:?}", r.point);

        let tri = PointSet::new(pts(&[[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]]), 0);
        let r = safe_point_lp(&tri, 5000).unwrap();
        assert!(in_hull(&r.point, &tri.points));

        let big = PointSet::new((0..40).map(|i| vec![i as f64, (i * i) as f64]).collect(), 13);
        assert!(matches!(safe_point_lp(&big, 5000), Err(Error::SubsetCap { .. })));
    }

    #[test]
    fn coordinate_wise_examples() {
        let p = PointSet::new(pts(&[[0.0, 10.0], [10.0, 0.0], [5.0, 5.0]]), 1);
        assert_eq!(coordinate_wise(&p).unwrap().point, vec![5.0, 5.0]);
        let same = PointSet::new(vec![vec![1.5, -2.0]; 5], 2);
        assert_eq!(coordinate_wise(&same).unwrap().point, vec![1.5, -2.0]);
        let one_d = [3.0, -1.0, 7.0, 2.0, 2.5];
        let cw = coordinate_wise(&PointSet::new(one_d.iter().map(|&v| vec![v]).collect(), 2)).unwrap();
        assert_eq!(cw.point, safe_point_1d(&one_d, 2).unwrap().point);
    }

    #[test]
    fn coordinate_wise_can_leave_the_honest_hull() {
        // honest points on the anti-diagonal; one adversary at the origin side
        let honest = pts(&[[0.0, 1.0], [1.0, 0.0], [0.5, 0.5]]);
        let mut all = honest.clone();
        all.push(vec![0.0, 0.0]);
        let cw = coordinate_wise(&PointSet::new(all, 1)).unwrap();
        assert_eq!(cw.point, vec![0.0, 0.0]);
        assert!(!in_hull(&cw.point, &honest));
    }

    #[test]
    fn hull_membership() {
        let tri = pts(&[[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]]);
        assert!(in_hull(&[0.0, 0.0], &tri));
        assert!(in_hull(&[4.0 / 3.0, 4.0 / 3.0], &tri));
        assert!(in_hull(&[2.0, 2.0], &tri));
        assert!(!in_hull(&[5.0, 5.0], &tri));
        assert!(!in_hull(&[2.0, 2.0 + 1e-6], &tri));
    }

    #[test]
    fn combinations_enumerate() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(binomial(13, 1), 13);
        assert_eq!(binomial(10, 3), 120);
    }
}
