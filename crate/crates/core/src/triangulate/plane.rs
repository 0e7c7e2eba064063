//! Direct selection of the epipolar plane.
//!
//! In the epipole-aligned frame every epipolar plane contains the X axis, so
//! the pencil is parameterised by a single scalar λ with normal `(0, 1, λ)`.
//! When the first ray lies closer to the XY plane than to the XZ plane
//! (`|v₂| > |v₃|`) the two basis normals are swapped, giving `(0, λ, 1)`;
//! this keeps λ near `[-1, 1]`.
//!
//! Writing `pᵢ + λ qᵢ` for the (unnormalised) plane distance of ray i,
//! `(p, q) = (v₂, v₃)` normally and `(v₃, v₂)` with swapped axes, the two
//! costs are
//!
//! ```text
//! s(λ)  = ((p + λq)² + (p′ + λq′)²) / (1 + λ²) = (a + bλ + cλ²) / (1 + λ²)
//! s₂(λ) = (|p + λq| + |p′ + λq′|) / √(1 + λ²)
//! ```

use crate::geometry::{StereoFrame, Vec3};

use super::{
    finish_with_midpoint, Correspondence, PlaneFit, PlaneParam, TriangulationError,
    TriangulationResult,
};

/// Relative size below which the leading coefficient of the sum-of-magnitudes
/// quadratic is treated as zero.
const ABS_LINEAR_THRESHOLD: f64 = 1e-14;

/// Working rays in the epipole-aligned frame and the swap decision.
#[inline]
pub(crate) fn working_rays(c: &Correspondence, frame: &StereoFrame) -> (Vec3, Vec3, bool) {
    let v = frame.align_first(c.u.dir());
    let v2 = frame.align_second(c.u2.dir());
    (v, v2, v.y.abs() > v.z.abs())
}

/// `(p, q)` pairs such that the plane distance of `v` is `p + λ q`.
#[inline]
fn pencil_coords(v: &Vec3, swapped: bool) -> (f64, f64) {
    if swapped {
        (v.z, v.y)
    } else {
        (v.y, v.z)
    }
}

/// `(a + bλ + cλ²) / (1 + λ²)`, evaluated without overflow for large |λ|.
#[inline]
fn rational_cost(a: f64, b: f64, c: f64, lambda: f64) -> f64 {
    if lambda.abs() <= 1.0 {
        (a + lambda * (b + lambda * c)) / (1.0 + lambda * lambda)
    } else {
        let inv = 1.0 / lambda;
        (c + inv * (b + inv * a)) / (1.0 + inv * inv)
    }
}

/// Minimiser of `(a + bλ + cλ²)/(1 + λ²)`.
///
/// Stationary points are the roots of `bλ² + 2(a − c)λ − b`, i.e.
/// `((c − a) ± √((a − c)² + b²)) / b`. Both roots are formed without
/// cancellation (one of them via the reciprocal form) and the one with the
/// smaller cost is returned. With `b = 0` the derivative is linear and the
/// root is `λ = 0` unless `a = c`, where every plane costs the same.
pub(crate) fn sum_of_squares_root(a: f64, b: f64, c: f64) -> Option<f64> {
    let h = c - a;
    if b == 0.0 {
        return if h != 0.0 { Some(0.0) } else { None };
    }
    // a, c ≤ 2 and |b| ≤ 4 for unit rays, so the plain square root cannot overflow.
    let disc = (h * h + b * b).sqrt();
    let minus = if h > 0.0 {
        -b / (h + disc)
    } else {
        (h - disc) / b
    };
    let plus = if h < 0.0 {
        -b / (h - disc)
    } else {
        (h + disc) / b
    };
    let best = if rational_cost(a, b, c, plus) < rational_cost(a, b, c, minus) {
        plus
    } else {
        minus
    };
    best.is_finite().then_some(best)
}

/// Closed-form minimiser of the summed squared distances of both rays to
/// the epipolar plane, with both rays orthogonally projected onto it.
pub fn optimise_sph_quad(
    c: &Correspondence,
    frame: &StereoFrame,
) -> Result<PlaneFit, TriangulationError> {
    let (v, v2, swapped) = working_rays(c, frame);
    let (p, q) = pencil_coords(&v, swapped);
    let (p2, q2) = pencil_coords(&v2, swapped);
    let a = p * p + p2 * p2;
    let b = 2.0 * (p * q + p2 * q2);
    let cc = q * q + q2 * q2;
    let lambda = sum_of_squares_root(a, b, cc).ok_or(TriangulationError::DegenerateNoSolution(
        "cost is constant over the pencil of planes",
    ))?;
    Ok(fit(
        v,
        v2,
        PlaneParam {
            lambda,
            axis_swapped: swapped,
        },
    ))
}

#[inline]
fn abs_cost(p: f64, q: f64, p2: f64, q2: f64, lambda: f64) -> f64 {
    if lambda.abs() <= 1.0 {
        ((p + lambda * q).abs() + (p2 + lambda * q2).abs()) / (1.0 + lambda * lambda).sqrt()
    } else {
        let inv = 1.0 / lambda;
        ((p * inv + q).abs() + (p2 * inv + q2).abs()) / (1.0 + inv * inv).sqrt()
    }
}

/// Minimiser of the summed absolute distances of both rays to the epipolar
/// plane.
///
/// Candidates are the stationary points of `s₂`, the roots of
/// `(p² − p′²)λ² + 2(p′q′ − pq)λ + (q² − q′²) = 0`, namely
/// `((pq − p′q′) ± (p′q − pq′)) / (p² − p′²)`, together with the two planes
/// passing exactly through one of the rays. Between those two kinks `s₂` is
/// a positive sinusoid in the plane angle and therefore concave, so its
/// minimum always sits on a kink; the stationary points alone can be maxima.
/// The candidate with the smallest `s₂` wins.
pub fn optimise_sph_abs(
    c: &Correspondence,
    frame: &StereoFrame,
) -> Result<PlaneFit, TriangulationError> {
    let (v, v2, swapped) = working_rays(c, frame);
    let (p, q) = pencil_coords(&v, swapped);
    let (p2, q2) = pencil_coords(&v2, swapped);

    let mut candidates = [f64::NAN; 4];
    let lead = p * p - p2 * p2;
    let n0 = p * q - p2 * q2;
    let n1 = p2 * q - p * q2;
    let scale = p * p + p2 * p2 + q * q + q2 * q2;
    if lead.abs() > ABS_LINEAR_THRESHOLD * scale {
        candidates[0] = (n0 + n1) / lead;
        candidates[1] = (n0 - n1) / lead;
    } else if n0.abs() > ABS_LINEAR_THRESHOLD * scale {
        candidates[0] = (q2 * q2 - q * q) / (-2.0 * n0);
    }
    if q != 0.0 {
        candidates[2] = -p / q;
    }
    if q2 != 0.0 {
        candidates[3] = -p2 / q2;
    }

    let mut best: Option<(f64, f64)> = None;
    for &lambda in candidates.iter().filter(|l| l.is_finite()) {
        let cost = abs_cost(p, q, p2, q2, lambda);
        if best.is_none_or(|(_, b)| cost < b) {
            best = Some((lambda, cost));
        }
    }
    let (lambda, _) = best.ok_or(TriangulationError::DegenerateNoSolution(
        "both rays lie on the baseline",
    ))?;
    Ok(fit(
        v,
        v2,
        PlaneParam {
            lambda,
            axis_swapped: swapped,
        },
    ))
}

#[inline]
fn fit(v: Vec3, v2: Vec3, plane: PlaneParam) -> PlaneFit {
    PlaneFit {
        plane,
        observed: v,
        observed2: v2,
        corrected: plane.project(&v),
        corrected2: plane.project(&v2),
        iterations: 0,
        converged: true,
    }
}

pub fn triangulate_sph_quad(
    c: &Correspondence,
    frame: &StereoFrame,
) -> Result<TriangulationResult, TriangulationError> {
    finish_with_midpoint(&optimise_sph_quad(c, frame)?, frame)
}

pub fn triangulate_sph_abs(
    c: &Correspondence,
    frame: &StereoFrame,
) -> Result<TriangulationResult, TriangulationError> {
    finish_with_midpoint(&optimise_sph_abs(c, frame)?, frame)
}
