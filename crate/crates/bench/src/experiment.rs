use std::hint::black_box;
use std::time::{Duration, Instant};

use sphtri::dataset::{load_dataset, ResultRecord};
use sphtri::synthetic::{generate_scene, make_correspondences, noise_rng, Channel, NoiseSpec};
use sphtri::{
    make_stereo_frame, Correspondence, Method, Status, StereoFrame, TriangulationError,
    TriangulationResult, Vec3,
};

use crate::descriptor::ExperimentDescriptor;
use crate::metrics::{evaluate, mean, median, Outcome};
use crate::report::SummaryRow;
use crate::BenchError;

/// Which per-point quantity fills the `s2` columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualKind {
    /// Distance of the reprojected point to the observed rays.
    Reprojection,
    /// Length of the ray corrections made by the method.
    Correction,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub rows: Vec<SummaryRow>,
    pub records: Vec<ResultRecord>,
    /// Synthetic points that could not be observed in both views.
    pub dropped: usize,
}

#[derive(Debug, Clone, Default)]
struct Accumulator {
    s2: Vec<f64>,
    p2: Vec<f64>,
    r3: Vec<f64>,
    d: Vec<f64>,
    failures: usize,
    p2_excluded: usize,
    elapsed: Duration,
    timed: usize,
}

impl Accumulator {
    fn row(&self, method: Method, channel: &str, sigma: Option<f64>) -> SummaryRow {
        SummaryRow {
            method: method.name().to_string(),
            channel: channel.to_string(),
            sigma,
            n: self.s2.len(),
            mean_s2: mean(&self.s2),
            median_s2: median(&self.s2),
            mean_p2: mean(&self.p2),
            median_p2: median(&self.p2),
            mean_r3: mean(&self.r3),
            median_r3: median(&self.r3),
            mean_d_ref: mean(&self.d),
            max_d_ref: self.d.iter().copied().reduce(f64::max),
            runtime_us: (self.timed > 0)
                .then(|| self.elapsed.as_secs_f64() * 1e6 / self.timed as f64),
            failures: self.failures,
            p2_excluded: self.p2_excluded,
        }
    }
}

pub fn status_label(outcome: &Result<TriangulationResult, TriangulationError>) -> &'static str {
    match outcome {
        Ok(r) => match r.status {
            Status::Ok => "ok",
            Status::BehindBothCameras => "behind_both_cameras",
            Status::NotConverged => "not_converged",
        },
        Err(TriangulationError::DegenerateNoSolution(_)) => "degenerate",
        Err(TriangulationError::NotRepresentable(_)) => "not_representable",
        Err(TriangulationError::TooFewObservations(_)) => "too_few_observations",
    }
}

/// One correspondence to triangulate, with its geometry and optional truth.
struct Sample<'a> {
    id: u64,
    c: Correspondence,
    frame: &'a StereoFrame,
    truth: Option<Vec3>,
}

/// Runs every method over `samples`, updating the accumulators in
/// `accs` (indexed like `methods`) and appending per-point records.
fn run_methods(
    samples: &[Sample<'_>],
    methods: &[Method],
    reference: Method,
    kind: ResidualKind,
    accs: &mut [Accumulator],
    records: &mut Vec<ResultRecord>,
) {
    let mut outcomes: Vec<Vec<Outcome>> = Vec::with_capacity(methods.len());
    for (m, acc) in methods.iter().zip(accs.iter_mut()) {
        let start = Instant::now();
        let raw: Vec<_> = samples
            .iter()
            .map(|s| black_box(m.triangulate(&s.c, s.frame)))
            .collect();
        acc.elapsed += start.elapsed();
        acc.timed += samples.len();
        outcomes.push(
            raw.into_iter()
                .zip(samples)
                .map(|(r, s)| evaluate(r, &s.c, s.frame, s.truth.as_ref()))
                .collect(),
        );
    }
    let ref_idx = methods
        .iter()
        .position(|m| *m == reference)
        .expect("reference method is always run");

    for (mi, m) in methods.iter().enumerate() {
        let acc = &mut accs[mi];
        for (pi, s) in samples.iter().enumerate() {
            let outcome = &outcomes[mi][pi];
            let (status, s2, p2, r3) = match outcome {
                Ok((r, pm)) => {
                    let s2 = match kind {
                        ResidualKind::Reprojection => pm.s2,
                        ResidualKind::Correction => pm.correction,
                    };
                    acc.s2.push(s2);
                    match pm.p2 {
                        Some(p) => acc.p2.push(p),
                        None => acc.p2_excluded += 1,
                    }
                    if let Some(e) = pm.r3 {
                        acc.r3.push(e);
                    }
                    if let Ok((_, refm)) = &outcomes[ref_idx][pi] {
                        acc.d.push((pm.corrected - refm.corrected).norm());
                    }
                    (status_label(&Ok(*r)), Some(s2), pm.p2, pm.r3)
                }
                Err(e) => {
                    acc.failures += 1;
                    (status_label(&Err(e.clone())), None, None, None)
                }
            };
            records.push(ResultRecord {
                method: m.name().to_string(),
                point_id: s.id,
                residual_s2: s2,
                residual_p2: p2,
                error_r3: r3,
                status: status.to_string(),
            });
        }
    }
}

/// Generates scenes, perturbs them at every `σ`, triangulates with every
/// method and aggregates one row per `(σ, method)`.
pub fn run_synthetic_experiment(
    desc: &ExperimentDescriptor,
    kind: ResidualKind,
) -> Result<Report, BenchError> {
    desc.validate()?;
    let methods = desc.methods_with_reference();
    let camera = desc.image_camera();
    let mut accs = vec![vec![Accumulator::default(); methods.len()]; desc.sigmas.len()];
    let mut report = Report::default();

    for trial in 0..desc.trials {
        let mut cfg = desc.scene.clone();
        cfg.seed = desc.seed.wrapping_add(trial as u64);
        let scene = generate_scene(&cfg).map_err(|e| BenchError::Config(e.to_string()))?;
        let frame = make_stereo_frame(scene.pose, scene.pose2)
            .map_err(|e| BenchError::Config(e.to_string()))?;
        let offset = trial as u64 * scene.points.len() as u64;
        for (si, &sigma) in desc.sigmas.iter().enumerate() {
            let noise = NoiseSpec {
                channel: desc.noise.channel,
                distribution: desc.noise.distribution,
                sigma,
            };
            let mut rng = noise_rng(cfg.seed, si as u64);
            let set = make_correspondences(&scene, camera.as_ref(), &noise, &mut rng)
                .map_err(|e| BenchError::Config(e.to_string()))?;
            report.dropped += set.dropped.len();
            let samples: Vec<Sample<'_>> = set
                .items
                .iter()
                .map(|it| Sample {
                    id: offset + it.index as u64,
                    c: it.correspondence,
                    frame: &frame,
                    truth: Some(it.point),
                })
                .collect();
            run_methods(
                &samples,
                &methods,
                desc.reference_method,
                kind,
                &mut accs[si],
                &mut report.records,
            );
        }
    }

    let channel = desc.noise.channel.name();
    for (si, &sigma) in desc.sigmas.iter().enumerate() {
        for m in &desc.methods {
            let mi = methods.iter().position(|x| x == m).expect("method was run");
            report.rows.push(accs[si][mi].row(*m, channel, Some(sigma)));
        }
    }
    report
        .records
        .retain(|r| desc.methods.iter().any(|m| m.name() == r.method));
    Ok(report)
}

/// Triangulates every correspondence of the descriptor's dataset.
pub fn run_real_experiment(desc: &ExperimentDescriptor) -> Result<Report, BenchError> {
    desc.validate()?;
    let path = desc
        .dataset
        .as_ref()
        .ok_or_else(|| BenchError::Config("the real experiment needs a dataset path".into()))?;
    let dataset = load_dataset(path)?;
    let methods = desc.methods_with_reference();
    let mut accs = vec![Accumulator::default(); methods.len()];
    let mut report = Report::default();

    let mut frames = Vec::with_capacity(dataset.records.len());
    for (i, rec) in dataset.records.iter().enumerate() {
        let (pa, pb) = dataset.poses(i);
        let frame = make_stereo_frame(pa, pb).map_err(|e| {
            BenchError::Dataset(sphtri::dataset::DatasetError::Schema {
                location: format!("point {}", rec.point_id),
                message: e.to_string(),
            })
        })?;
        frames.push(frame);
    }
    let samples: Vec<Sample<'_>> = dataset
        .records
        .iter()
        .zip(&dataset.rays)
        .zip(&frames)
        .map(|((rec, c), frame)| Sample {
            id: rec.point_id,
            c: *c,
            frame,
            truth: rec.ground_truth,
        })
        .collect();
    run_methods(
        &samples,
        &methods,
        desc.reference_method,
        ResidualKind::Reprojection,
        &mut accs,
        &mut report.records,
    );
    for m in &desc.methods {
        let mi = methods.iter().position(|x| x == m).expect("method was run");
        report.rows.push(accs[mi].row(*m, "dataset", None));
    }
    report
        .records
        .retain(|r| desc.methods.iter().any(|m| m.name() == r.method));
    Ok(report)
}

fn median_duration(mut times: Vec<Duration>) -> Duration {
    times.sort();
    times[times.len() / 2]
}

/// Times one pass of `f` over the batch after a warm-up pass and returns
/// the median per-point time in microseconds.
fn time_per_point<F: FnMut(&Correspondence)>(
    batch: &[Correspondence],
    repetitions: usize,
    mut f: F,
) -> f64 {
    batch.iter().for_each(&mut f);
    let times = (0..repetitions)
        .map(|_| {
            let start = Instant::now();
            batch.iter().for_each(&mut f);
            start.elapsed()
        })
        .collect();
    median_duration(times).as_secs_f64() * 1e6 / batch.len() as f64
}

/// Single-threaded per-point timings of the full triangulation and, for
/// methods that correct rays, of the correction alone (`<method>:opt`).
pub fn run_runtime_benchmark(desc: &ExperimentDescriptor) -> Result<Vec<SummaryRow>, BenchError> {
    desc.validate()?;
    let mut cfg = desc.scene.clone();
    cfg.seed = desc.seed;
    let scene = generate_scene(&cfg).map_err(|e| BenchError::Config(e.to_string()))?;
    let frame = make_stereo_frame(scene.pose, scene.pose2)
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let sigma = desc.sigmas[0];
    let noise = NoiseSpec {
        channel: Channel::Sphere,
        distribution: desc.noise.distribution,
        sigma,
    };
    let set = make_correspondences(&scene, None, &noise, &mut noise_rng(cfg.seed, 0))
        .map_err(|e| BenchError::Config(e.to_string()))?;
    if set.items.is_empty() {
        return Err(BenchError::Config(
            "scene produced no correspondences".into(),
        ));
    }
    let batch: Vec<Correspondence> = set
        .items
        .iter()
        .cycle()
        .take(desc.runtime.points)
        .map(|it| it.correspondence)
        .collect();

    let mut rows = Vec::new();
    for m in &desc.methods {
        let full = time_per_point(&batch, desc.runtime.repetitions, |c| {
            let _ = black_box(m.triangulate(black_box(c), &frame));
        });
        rows.push(SummaryRow::timing(
            m.name().to_string(),
            sigma,
            batch.len(),
            full,
        ));
        if m.optimises_rays() {
            let opt = time_per_point(&batch, desc.runtime.repetitions, |c| {
                let _ = black_box(m.optimise(black_box(c), &frame));
            });
            rows.push(SummaryRow::timing(
                format!("{}:opt", m.name()),
                sigma,
                batch.len(),
                opt,
            ));
        }
    }
    Ok(rows)
}
