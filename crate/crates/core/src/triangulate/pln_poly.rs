//! Optimal two-view correction on the z = 1 image plane.
//!
//! Both points are moved to the origin, the epipoles are rotated onto the x
//! axis, and the pencil of epipolar lines is parameterised by `t`. The
//! summed squared point-to-line distance
//!
//! ```text
//! s(t) = t² / (1 + f²t²) + (ct + d)² / ((at + b)² + f′²(ct + d)²)
//! ```
//!
//! is stationary at the real roots of a degree-six polynomial; those and
//! `t = ∞` are compared directly.

use nalgebra::{DMatrix, Matrix3, Vector2, Vector3};

use crate::geometry::{StereoFrame, Vec3};

use super::{
    finish_with_midpoint, plane::working_rays, Correspondence, PlaneFit, PlaneParam,
    TriangulationError, TriangulationResult,
};

/// Coefficients smaller than this fraction of the largest one are dropped
/// before root finding.
const COEFF_THRESHOLD: f64 = 1e-15;

/// Squared distance from a point to its epipole below which the line pencil
/// through it is undefined.
const EPIPOLE_THRESHOLD: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlnPolyFit {
    /// Corrected points on the z = 1 plane of each camera.
    pub points: Vector2<f64>,
    pub points2: Vector2<f64>,
    /// Summed squared image-plane distance to the observed points.
    pub cost: f64,
    /// Sphere-side view of the correction in the epipole-aligned frame.
    pub fit: PlaneFit,
}

/// Polynomial with ascending coefficients.
#[derive(Debug, Clone, Copy)]
struct Poly {
    c: [f64; 7],
    len: usize,
}

impl Poly {
    fn new(coeffs: &[f64]) -> Self {
        let mut c = [0.0; 7];
        c[..coeffs.len()].copy_from_slice(coeffs);
        Poly {
            c,
            len: coeffs.len(),
        }
    }

    fn mul(&self, o: &Poly) -> Poly {
        let mut c = [0.0; 7];
        for i in 0..self.len {
            for j in 0..o.len {
                c[i + j] += self.c[i] * o.c[j];
            }
        }
        Poly {
            c,
            len: self.len + o.len - 1,
        }
    }

    fn scale(&self, k: f64) -> Poly {
        let mut p = *self;
        p.c.iter_mut().for_each(|x| *x *= k);
        p
    }

    fn add(&self, o: &Poly) -> Poly {
        let len = self.len.max(o.len);
        let mut c = [0.0; 7];
        for (i, x) in c.iter_mut().enumerate().take(len) {
            *x = self.c[i] + o.c[i];
        }
        Poly { c, len }
    }

    fn eval(&self, t: f64) -> (f64, f64) {
        let mut v = 0.0;
        let mut dv = 0.0;
        for &k in self.c[..self.len].iter().rev() {
            dv = dv * t + v;
            v = v * t + k;
        }
        (v, dv)
    }

    /// Real parts of all roots, Newton-polished.
    fn real_roots(&self) -> Vec<f64> {
        let max = self.c[..self.len]
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        if max == 0.0 {
            return Vec::new();
        }
        let mut deg = self.len - 1;
        while deg > 0 && self.c[deg].abs() <= COEFF_THRESHOLD * max {
            deg -= 1;
        }
        if deg == 0 {
            return Vec::new();
        }
        let lead = self.c[deg];
        let mut companion = DMatrix::<f64>::zeros(deg, deg);
        for i in 1..deg {
            companion[(i, i - 1)] = 1.0;
        }
        for i in 0..deg {
            companion[(i, deg - 1)] = -self.c[i] / lead;
        }
        companion
            .complex_eigenvalues()
            .iter()
            .map(|z| self.polish(z.re))
            .collect()
    }

    fn polish(&self, mut t: f64) -> f64 {
        let (mut g, _) = self.eval(t);
        for _ in 0..3 {
            let (_, dg) = self.eval(t);
            let next = t - g / dg;
            let (gn, _) = self.eval(next);
            if !next.is_finite() || gn.abs() >= g.abs() {
                break;
            }
            t = next;
            g = gn;
        }
        t
    }
}

/// Translation moving `p` to the origin and rotation taking the epipole
/// onto the positive x axis. Returns `(T⁻¹, R, f)` with `R T e ∝ (1, 0, f)`.
fn normalising_transform(
    p: &Vector2<f64>,
    epipole: &Vec3,
) -> Result<(Matrix3<f64>, Matrix3<f64>, f64), TriangulationError> {
    let t = Matrix3::new(1.0, 0.0, -p.x, 0.0, 1.0, -p.y, 0.0, 0.0, 1.0);
    let t_inv = Matrix3::new(1.0, 0.0, p.x, 0.0, 1.0, p.y, 0.0, 0.0, 1.0);
    let e = t * epipole;
    let n2 = e.x * e.x + e.y * e.y;
    if n2 <= EPIPOLE_THRESHOLD * e.z * e.z {
        return Err(TriangulationError::DegenerateNoSolution(
            "image point coincides with the epipole",
        ));
    }
    let n = n2.sqrt();
    let (cs, sn) = (e.x / n, e.y / n);
    let r = Matrix3::new(cs, sn, 0.0, -sn, cs, 0.0, 0.0, 0.0, 1.0);
    Ok((t_inv, r, e.z / n))
}

fn to_plane(v: &Vec3) -> Result<Vector2<f64>, TriangulationError> {
    if v.z > 0.0 {
        Ok(Vector2::new(v.x / v.z, v.y / v.z))
    } else {
        Err(TriangulationError::NotRepresentable([v.x, v.y, v.z]))
    }
}

/// Closest point to the origin of the homogeneous line `l`.
#[inline]
fn foot_of_origin(l: &Vector3<f64>) -> Vector3<f64> {
    Vector3::new(-l.x * l.z, -l.y * l.z, l.x * l.x + l.y * l.y)
}

pub fn optimise_pln_poly(
    c: &Correspondence,
    frame: &StereoFrame,
) -> Result<PlnPolyFit, TriangulationError> {
    let x1 = to_plane(c.u.dir())?;
    let x2 = to_plane(c.u2.dir())?;

    let r1 = frame.pose.orientation.matrix();
    let r2 = frame.pose2.orientation.matrix();
    let r21 = r2 * r1.transpose();
    let t21 = r2 * (frame.pose.position - frame.pose2.position);
    let essential = t21.cross_matrix() * r21;
    let e1 = r1 * frame.baseline;
    let e2 = t21;

    let (tr1_inv, rot1, f) = normalising_transform(&x1, &e1)?;
    let (tr2_inv, rot2, f2) = normalising_transform(&x2, &e2)?;
    let m = rot2 * tr2_inv.transpose() * essential * tr1_inv * rot1.transpose();
    let (a, b, cc, d) = (m[(1, 1)], m[(1, 2)], m[(2, 1)], m[(2, 2)]);

    let lin_a = Poly::new(&[b, a]);
    let lin_c = Poly::new(&[d, cc]);
    let denom = lin_a.mul(&lin_a).add(&lin_c.mul(&lin_c).scale(f2 * f2));
    let quart = Poly::new(&[1.0, 0.0, f * f]);
    let g = Poly::new(&[0.0, 1.0]).mul(&denom).mul(&denom).add(
        &quart
            .mul(&quart)
            .mul(&lin_a)
            .mul(&lin_c)
            .scale(b * cc - a * d),
    );

    let cost = |t: f64| {
        let at = a * t + b;
        let ct = cc * t + d;
        t * t / (1.0 + f * f * t * t) + ct * ct / (at * at + f2 * f2 * ct * ct)
    };
    let mut best: Option<(f64, f64)> = None;
    for t in g.real_roots() {
        let s = cost(t);
        if s.is_finite() && best.is_none_or(|(_, bs)| s < bs) {
            best = Some((t, s));
        }
    }
    let at_infinity = 1.0 / (f * f) + cc * cc / (a * a + f2 * f2 * cc * cc);
    let (l1, l2, s) = match best {
        Some((t, s)) if !(at_infinity < s) => (
            Vector3::new(t * f, 1.0, -t),
            Vector3::new(-f2 * (cc * t + d), a * t + b, cc * t + d),
            s,
        ),
        _ if at_infinity.is_finite() => (
            Vector3::new(f, 0.0, -1.0),
            Vector3::new(-f2 * cc, a, cc),
            at_infinity,
        ),
        _ => {
            return Err(TriangulationError::DegenerateNoSolution(
                "no finite epipolar line in the pencil",
            ))
        }
    };

    let h1 = tr1_inv * rot1.transpose() * foot_of_origin(&l1);
    let h2 = tr2_inv * rot2.transpose() * foot_of_origin(&l2);
    if !(h1.z != 0.0 && h2.z != 0.0) {
        return Err(TriangulationError::DegenerateNoSolution(
            "corrected point is at infinity",
        ));
    }
    let p1 = Vector2::new(h1.x / h1.z, h1.y / h1.z);
    let p2 = Vector2::new(h2.x / h2.z, h2.y / h2.z);

    let (v, v2, swapped) = working_rays(c, frame);
    let w = frame.align_first(&Vec3::new(p1.x, p1.y, 1.0).normalize());
    let w2 = frame.align_second(&Vec3::new(p2.x, p2.y, 1.0).normalize());
    let n = Vec3::x().cross(&w);
    let n2 = Vec3::x().cross(&w2);
    let normal = if n.dot(&n2) >= 0.0 { n + n2 } else { n - n2 };
    let lambda = if swapped {
        normal.y / normal.z
    } else {
        normal.z / normal.y
    };
    if !lambda.is_finite() {
        return Err(TriangulationError::DegenerateNoSolution(
            "corrected plane is outside the parameterised pencil",
        ));
    }
    let plane = PlaneParam {
        lambda,
        axis_swapped: swapped,
    };
    Ok(PlnPolyFit {
        points: p1,
        points2: p2,
        cost: s,
        fit: PlaneFit {
            plane,
            observed: v,
            observed2: v2,
            corrected: plane.project(&w).normalize(),
            corrected2: plane.project(&w2).normalize(),
            iterations: 0,
            converged: true,
        },
    })
}

pub fn triangulate_pln_poly(
    c: &Correspondence,
    frame: &StereoFrame,
) -> Result<TriangulationResult, TriangulationError> {
    finish_with_midpoint(&optimise_pln_poly(c, frame)?.fit, frame)
}
