//! The closed-form plane choices against brute-force searches over the
//! pencil of epipolar planes.

mod support;

use proptest::prelude::*;
use sphtri::synthetic::{
    generate_scene, make_correspondences, noise_rng, perturb_on_sphere, Channel, NoiseDistribution,
    NoiseSpec, SceneConfig,
};
use sphtri::triangulate::{
    optimise_fw, optimise_sph_abs, optimise_sph_quad, FwOptions, PlaneFit, PlaneParam,
};
use sphtri::{make_stereo_frame, Correspondence, Method, StereoFrame, Vec3};
use support::{config, Config};

/// Squared and absolute ray-to-plane distance sums for the plane through
/// the X axis with unit normal `(0, cos θ, sin θ)`.
fn costs_at_angle(v: &Vec3, v2: &Vec3, theta: f64) -> (f64, f64) {
    let n = Vec3::new(0.0, theta.cos(), theta.sin());
    let (d, d2) = (v.dot(&n), v2.dot(&n));
    (d * d + d2 * d2, d.abs() + d2.abs())
}

fn costs_of(fit: &PlaneFit) -> (f64, f64) {
    let n = fit.plane.normal().normalize();
    let (d, d2) = (fit.observed.dot(&n), fit.observed2.dot(&n));
    (d * d + d2 * d2, d.abs() + d2.abs())
}

/// Minima of both costs over every epipolar plane, sampled by normal angle.
fn brute_force_minima(v: &Vec3, v2: &Vec3) -> (f64, f64) {
    const STEPS: u32 = 200_000;
    (0..STEPS)
        .map(|i| {
            costs_at_angle(
                v,
                v2,
                std::f64::consts::PI * f64::from(i) / f64::from(STEPS),
            )
        })
        .fold((f64::INFINITY, f64::INFINITY), |(a, b), (s, s2)| {
            (a.min(s), b.min(s2))
        })
}

fn noisy(cfg: &Config, sigma: f64, seed: u64) -> Correspondence {
    let c = cfg.exact();
    let mut rng = noise_rng(seed, 0);
    Correspondence::new(
        perturb_on_sphere(&c.u, NoiseDistribution::Gaussian, sigma, &mut rng),
        perturb_on_sphere(&c.u2, NoiseDistribution::Gaussian, sigma, &mut rng),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn closed_form_planes_are_global_minima(cfg in config(), sigma in 0.0f64..0.2, seed: u64) {
        let c = noisy(&cfg, sigma, seed);
        let quad = optimise_sph_quad(&c, &cfg.frame).unwrap();
        let abs = optimise_sph_abs(&c, &cfg.frame).unwrap();
        let (best_s, best_s2) = brute_force_minima(&quad.observed, &quad.observed2);
        prop_assert!(costs_of(&quad).0 <= best_s + 1e-10, "{} > {}", costs_of(&quad).0, best_s);
        prop_assert!(costs_of(&abs).1 <= best_s2 + 1e-10, "{} > {}", costs_of(&abs).1, best_s2);
    }

    #[test]
    fn corrected_rays_lie_on_the_chosen_plane(cfg in config(), sigma in 0.0f64..0.5, seed: u64) {
        let c = noisy(&cfg, sigma, seed);
        for m in [Method::SphQuad, Method::SphAbs, Method::Fw] {
            let fit = m.optimise(&c, &cfg.frame).unwrap().unwrap();
            if !fit.converged {
                continue;
            }
            let n = fit.plane.normal().normalize();
            prop_assert!(fit.corrected.dot(&n).abs() < 1e-10, "{}", m);
            prop_assert!(fit.corrected2.dot(&n).abs() < 1e-10, "{}", m);
            // Every epipolar plane contains the baseline.
            prop_assert!(n.x.abs() < 1e-15, "{}", m);
        }
    }

    #[test]
    fn iterative_correction_finds_the_same_plane(cfg in config(), sigma in 0.0f64..0.01, seed: u64) {
        let c = noisy(&cfg, sigma, seed);
        let quad = optimise_sph_quad(&c, &cfg.frame).unwrap();
        let fw = optimise_fw(&c, &cfg.frame, &FwOptions::default()).unwrap();
        prop_assert!(fw.converged);
        let (nq, nf) = (quad.plane.normal().normalize(), fw.plane.normal().normalize());
        // Planes agree up to the normal's sign.
        prop_assert!(nq.cross(&nf).norm() < 1e-6, "{:e}", nq.cross(&nf).norm());
    }
}

/// Golden-section refinement of a minimum bracketed by `[lo, hi]`.
fn refine(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-13 {
        let a = hi - ratio * (hi - lo);
        let b = lo + ratio * (hi - lo);
        if f(a) <= f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn one_exact_ray_sum_of_magnitudes_matches_refined_grid() {
    let scene = generate_scene(&SceneConfig::near(5)).unwrap();
    let frame = make_stereo_frame(scene.pose, scene.pose2).unwrap();
    let mut rng = noise_rng(5, 1);
    for point in scene.points.iter().step_by(7) {
        let exact = Correspondence::new(
            frame.pose.project_to_sphere(point).unwrap(),
            frame.pose2.project_to_sphere(point).unwrap(),
        );
        let c = Correspondence::new(
            perturb_on_sphere(&exact.u, NoiseDistribution::Gaussian, 0.01, &mut rng),
            exact.u2,
        );
        let fit = optimise_sph_abs(&c, &frame).unwrap();
        let (p, q, p2, q2) = if fit.plane.axis_swapped {
            (
                fit.observed.z,
                fit.observed.y,
                fit.observed2.z,
                fit.observed2.y,
            )
        } else {
            (
                fit.observed.y,
                fit.observed.z,
                fit.observed2.y,
                fit.observed2.z,
            )
        };
        let s2 = |l: f64| ((p + l * q).abs() + (p2 + l * q2).abs()) / (1.0 + l * l).sqrt();
        let step = 1e-5;
        let grid_best = (0..=400_000)
            .map(|i| -2.0 + f64::from(i) * step)
            .min_by(|a, b| s2(*a).total_cmp(&s2(*b)))
            .unwrap();
        let argmin = refine(s2, grid_best - step, grid_best + step);
        assert!(
            (fit.plane.lambda - argmin).abs() < 1e-9,
            "λ̂ = {}, refined grid argmin = {argmin}",
            fit.plane.lambda
        );
        // The minimum sits on a plane through one of the two rays.
        let n = fit.plane.normal().normalize();
        let on_kink = fit.observed.dot(&n).abs().min(fit.observed2.dot(&n).abs());
        assert!(on_kink < 1e-12, "{on_kink:e}");
    }
}

fn noisy_batch(seed: u64, sigma: f64) -> (StereoFrame, Vec<Correspondence>) {
    let cfg = SceneConfig {
        spacing: 0.5,
        ..SceneConfig::near(seed)
    };
    let scene = generate_scene(&cfg).unwrap();
    let frame = make_stereo_frame(scene.pose, scene.pose2).unwrap();
    let noise = NoiseSpec {
        channel: Channel::Sphere,
        distribution: NoiseDistribution::Gaussian,
        sigma,
    };
    let set = make_correspondences(&scene, None, &noise, &mut noise_rng(seed, 0)).unwrap();
    (
        frame,
        set.items.iter().map(|it| it.correspondence).collect(),
    )
}

fn fraction_in_unit_range(sigma: f64, optimise: Optimiser) -> (usize, usize) {
    let (frame, batch) = noisy_batch(3, sigma);
    let inside = batch
        .iter()
        .filter(|c| optimise(c, &frame).unwrap().plane.lambda.abs() <= 1.1)
        .count();
    (inside, batch.len())
}

type Optimiser = fn(&Correspondence, &StereoFrame) -> Result<PlaneFit, sphtri::TriangulationError>;

#[test]
fn pencil_parameter_stays_near_the_unit_range() {
    for sigma in [0.0, 0.001, 0.01] {
        for optimise in [optimise_sph_quad as Optimiser, optimise_sph_abs] {
            let (inside, n) = fraction_in_unit_range(sigma, optimise);
            assert!(
                inside as f64 >= 0.99 * n as f64,
                "σ = {sigma}: {inside} of {n}"
            );
        }
    }
}

/// At σ = 0.1 on near points, plane-angle noise of several degrees moves
/// about 3% of the pencil parameters past 1.1 (94-98% inside, depending on
/// the scene), so the 99% bound does not hold there.
#[test]
#[ignore = "known deviation: the 99% bound fails at large noise"]
fn pencil_parameter_stays_near_the_unit_range_at_large_noise() {
    for optimise in [optimise_sph_quad as Optimiser, optimise_sph_abs] {
        let (inside, n) = fraction_in_unit_range(0.1, optimise);
        assert!(inside as f64 >= 0.99 * n as f64, "{inside} of {n}");
    }
}

#[test]
fn iterative_and_closed_form_corrections_agree_on_batches() {
    for (sigma, max_mean_d, max_residual_gap) in [(0.001, 1e-4, 1e-6), (0.1, 1e-2, 1e-3)] {
        let (frame, batch) = noisy_batch(8, sigma);
        let n = batch.len() as f64;
        let (mut d, mut rq, mut rf) = (0.0, 0.0, 0.0);
        for c in &batch {
            let quad = optimise_sph_quad(c, &frame).unwrap();
            let fw = optimise_fw(c, &frame, &FwOptions::default()).unwrap();
            d += (quad.corrected - fw.corrected).norm() / n;
            rq += quad.residual() / n;
            rf += fw.residual() / n;
        }
        assert!(d < max_mean_d, "σ = {sigma}: mean d = {d:e}");
        assert!(
            (rq - rf).abs() < max_residual_gap,
            "σ = {sigma}: {rq} vs {rf}"
        );
    }
}

fn unit(v: Vec3) -> sphtri::UnitRay {
    sphtri::UnitRay::new(v).unwrap()
}

fn unit_vec() -> impl Strategy<Value = Vec3> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_map(|(x, y, z)| Vec3::new(x, y, z))
        .prop_filter("too short", |v| v.norm() > 0.1)
}

proptest! {
    #[test]
    fn exchanging_the_second_and_third_axes_mirrors_the_result(v in unit_vec(), v2 in unit_vec()) {
        // With the baseline on the X axis the working rays are the inputs.
        let frame = sphtri::geometry::make_similarity_frame(
            sphtri::Rotation::identity(),
            sphtri::UnitRay::x_axis(),
        );
        let mirror = |v: &Vec3| Vec3::new(v.x, v.z, v.y);
        prop_assume!(v.y.abs() != v.z.abs());
        let c = Correspondence::new(unit(v), unit(v2));
        let m = Correspondence::new(unit(mirror(&v)), unit(mirror(&v2)));
        for optimise in [optimise_sph_quad as Optimiser, optimise_sph_abs] {
            let (a, b) = (optimise(&c, &frame), optimise(&m, &frame));
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    // Normalising the mirrored input may differ in the last bit.
                    let tol = 1e-14 * (1.0 + a.plane.lambda.abs());
                    prop_assert!((a.plane.lambda - b.plane.lambda).abs() <= tol);
                    prop_assert_ne!(a.plane.axis_swapped, b.plane.axis_swapped);
                }
                (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
            }
        }
    }

    #[test]
    fn small_noise_matches_the_geodesic_optimum(cfg in config(), sigma in 0.0f64..3e-4, seed: u64) {
        let c = noisy(&cfg, sigma, seed);
        prop_assume!(c.u.angle_to(&cfg.exact().u) < 1e-3 && c.u2.angle_to(&cfg.exact().u2) < 1e-3);
        let quad = optimise_sph_quad(&c, &cfg.frame).unwrap();
        let (v, v2) = (quad.observed, quad.observed2);
        // Summed squared angles between each ray and the plane.
        let geodesic = |l: f64| {
            let n = PlaneParam { lambda: l, ..quad.plane }.normal().normalize();
            v.dot(&n).asin().powi(2) + v2.dot(&n).asin().powi(2)
        };
        let step = 1e-5;
        let grid_best = (0..=400_000)
            .map(|i| -2.0 + f64::from(i) * step)
            .min_by(|a, b| geodesic(*a).total_cmp(&geodesic(*b)))
            .unwrap();
        let argmin = refine(geodesic, grid_best - step, grid_best + step);
        prop_assert!((argmin - quad.plane.lambda).abs() < 1e-5, "{} vs {argmin}", quad.plane.lambda);
    }
}
