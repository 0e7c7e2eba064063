//! Loading correspondence datasets and persisting per-point results.
//!
//! A dataset directory holds two files:
//!
//! * `calibration.json`: the camera model and one pose per image,
//!   `{"camera": {...}, "images": {"<id>": {"rotation": [9 row-major], "translation": [3]}}}`,
//!   where a world point maps to camera coordinates as `R x + t`.
//! * `correspondences.csv`: header `point_id,image_a,ua,va,image_b,ub,vb`
//!   optionally followed by ground truth columns `gx,gy,gz`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::camera::{Camera, CameraModel, PixelPoint};
use crate::geometry::{CameraPose, Rotation, Vec3};
use crate::synthetic::{CorrespondenceSet, Scene};
use crate::triangulate::Correspondence;

pub const CALIBRATION_FILE: &str = "calibration.json";
pub const CORRESPONDENCE_FILE: &str = "correspondences.csv";

const HEADER: [&str; 7] = ["point_id", "image_a", "ua", "va", "image_b", "ub", "vb"];
const GROUND_TRUTH_HEADER: [&str; 3] = ["gx", "gy", "gz"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("{location}: {message}")]
    Schema { location: String, message: String },
    #[error("point {point_id}: pixel ({u}, {v}) lies outside image '{image}'")]
    Bounds {
        point_id: u64,
        image: String,
        u: f64,
        v: f64,
    },
    #[error("point {point_id}: pixel in image '{image}' cannot be unprojected: {message}")]
    Model {
        point_id: u64,
        image: String,
        message: String,
    },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl DatasetError {
    fn schema(location: impl Into<String>, message: impl ToString) -> Self {
        DatasetError::Schema {
            location: location.into(),
            message: message.to_string(),
        }
    }

    fn io(path: &Path, err: impl ToString) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImagePose {
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl ImagePose {
    pub fn from_pose(pose: &CameraPose) -> Self {
        let t = -(pose.orientation.apply(&pose.position));
        ImagePose {
            rotation: pose.orientation.to_row_array(),
            translation: [t.x, t.y, t.z],
        }
    }

    pub fn to_pose(&self) -> Result<CameraPose, crate::geometry::GeometryError> {
        let r = Rotation::from_row_slice(&self.rotation)?;
        let t = Vec3::from(self.translation);
        Ok(CameraPose::new(r, -r.apply_transpose(&t)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationFile {
    camera: Camera,
    images: BTreeMap<String, ImagePose>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceRecord {
    pub point_id: u64,
    pub image_a: String,
    pub pixel_a: PixelPoint,
    pub image_b: String,
    pub pixel_b: PixelPoint,
    pub ground_truth: Option<Vec3>,
}

/// A validated dataset. `rays[i]` is the unprojection of `records[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub camera: Camera,
    pub images: BTreeMap<String, ImagePose>,
    pub records: Vec<CorrespondenceRecord>,
    pub rays: Vec<Correspondence>,
}

impl Dataset {
    /// Poses of the two images of record `i`.
    pub fn poses(&self, i: usize) -> (CameraPose, CameraPose) {
        let r = &self.records[i];
        let pose = |id: &str| {
            self.images[id]
                .to_pose()
                .expect("poses are validated on construction")
        };
        (pose(&r.image_a), pose(&r.image_b))
    }
}

/// Validates records against the calibration and unprojects every pixel.
pub fn build_dataset(
    camera: Camera,
    images: BTreeMap<String, ImagePose>,
    records: Vec<CorrespondenceRecord>,
) -> Result<Dataset, DatasetError> {
    camera
        .validate()
        .map_err(|e| DatasetError::schema("camera", e))?;
    for (id, pose) in &images {
        pose.to_pose()
            .map_err(|e| DatasetError::schema(format!("image '{id}'"), e))?;
    }
    let mut rays = Vec::with_capacity(records.len());
    for r in &records {
        let unproject = |image: &str, px: &PixelPoint| {
            if !images.contains_key(image) {
                return Err(DatasetError::schema(
                    format!("point {}", r.point_id),
                    format!("unknown image '{image}'"),
                ));
            }
            if !(px.u.is_finite() && px.v.is_finite() && camera.in_image(px)) {
                return Err(DatasetError::Bounds {
                    point_id: r.point_id,
                    image: image.to_string(),
                    u: px.u,
                    v: px.v,
                });
            }
            camera.unproject(px).map_err(|e| DatasetError::Model {
                point_id: r.point_id,
                image: image.to_string(),
                message: e.to_string(),
            })
        };
        let u = unproject(&r.image_a, &r.pixel_a)?;
        let u2 = unproject(&r.image_b, &r.pixel_b)?;
        rays.push(Correspondence::new(u, u2));
    }
    Ok(Dataset {
        camera,
        images,
        records,
        rays,
    })
}

fn read_to_string(path: &Path) -> Result<String, DatasetError> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| DatasetError::io(path, e))?;
    Ok(s)
}

fn parse_field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    line: u64,
) -> Result<T, DatasetError> {
    let raw = rec.get(idx).unwrap_or("");
    raw.trim().parse().map_err(|_| {
        DatasetError::schema(
            format!("line {line}"),
            format!("cannot parse column '{}' from '{raw}'", column_name(idx)),
        )
    })
}

fn column_name(idx: usize) -> &'static str {
    HEADER
        .iter()
        .chain(GROUND_TRUTH_HEADER.iter())
        .nth(idx)
        .copied()
        .unwrap_or("?")
}

fn parse_correspondences(path: &Path) -> Result<Vec<CorrespondenceRecord>, DatasetError> {
    let location = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| DatasetError::io(path, e))?;
    let header = reader
        .headers()
        .map_err(|e| DatasetError::schema(&location, e))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    let with_truth = if names == HEADER {
        false
    } else if names.len() == 10 && names[..7] == HEADER && names[7..] == GROUND_TRUTH_HEADER {
        true
    } else {
        return Err(DatasetError::schema(
            &location,
            format!("unexpected header '{}'", names.join(",")),
        ));
    };

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| DatasetError::schema(&location, e))?;
        let line = row.position().map_or(0, |p| p.line());
        let point_id = parse_field(&row, 0, line)?;
        let ground_truth = if with_truth {
            Some(Vec3::new(
                parse_field(&row, 7, line)?,
                parse_field(&row, 8, line)?,
                parse_field(&row, 9, line)?,
            ))
        } else {
            None
        };
        records.push(CorrespondenceRecord {
            point_id,
            image_a: row[1].to_string(),
            pixel_a: PixelPoint::new(parse_field(&row, 2, line)?, parse_field(&row, 3, line)?),
            image_b: row[4].to_string(),
            pixel_b: PixelPoint::new(parse_field(&row, 5, line)?, parse_field(&row, 6, line)?),
            ground_truth,
        });
    }
    Ok(records)
}

/// Loads and validates a calibration file and a correspondence file.
pub fn load_dataset_files(
    calibration: &Path,
    correspondences: &Path,
) -> Result<Dataset, DatasetError> {
    let text = read_to_string(calibration)?;
    let calib: CalibrationFile = serde_json::from_str(&text)
        .map_err(|e| DatasetError::schema(calibration.display().to_string(), e))?;
    let records = parse_correspondences(correspondences)?;
    build_dataset(calib.camera, calib.images, records)
}

/// Loads the dataset stored in directory `dir`.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let dir = dir.as_ref();
    load_dataset_files(&dir.join(CALIBRATION_FILE), &dir.join(CORRESPONDENCE_FILE))
}

/// Shortest representation that parses back to the same value.
pub fn format_float(x: f64) -> String {
    let mut buf = format!("{x:?}");
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

/// Writes `dataset` into directory `dir`, creating it if needed.
pub fn write_dataset(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<(), DatasetError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
    let calib = CalibrationFile {
        camera: dataset.camera,
        images: dataset.images.clone(),
    };
    let json = serde_json::to_string_pretty(&calib).expect("calibration serialises");
    let path = dir.join(CALIBRATION_FILE);
    std::fs::write(&path, json + "\n").map_err(|e| DatasetError::io(&path, e))?;

    let path = dir.join(CORRESPONDENCE_FILE);
    let with_truth = dataset.records.iter().any(|r| r.ground_truth.is_some());
    let mut out = String::new();
    out.push_str(&HEADER.join(","));
    if with_truth {
        out.push(',');
        out.push_str(&GROUND_TRUTH_HEADER.join(","));
    }
    out.push('\n');
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    for r in &dataset.records {
        let mut fields = vec![
            r.point_id.to_string(),
            r.image_a.clone(),
            format_float(r.pixel_a.u),
            format_float(r.pixel_a.v),
            r.image_b.clone(),
            format_float(r.pixel_b.u),
            format_float(r.pixel_b.v),
        ];
        if with_truth {
            let g = r.ground_truth.ok_or_else(|| {
                DatasetError::schema(
                    format!("point {}", r.point_id),
                    "ground truth must be given for every record or none",
                )
            })?;
            fields.extend(g.iter().map(|&x| format_float(x)));
        }
        w.write_record(&fields)
            .map_err(|e| DatasetError::io(&path, e))?;
    }
    let body = w.into_inner().map_err(|e| DatasetError::io(&path, e))?;
    out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
    std::fs::write(&path, out).map_err(|e| DatasetError::io(&path, e))
}

/// Packs image-channel synthetic correspondences into a dataset with images
/// `cam0` and `cam1` and ground truth attached.
pub fn dataset_from_synthetic(
    camera: &Camera,
    scene: &Scene,
    set: &CorrespondenceSet,
) -> Result<Dataset, DatasetError> {
    let images = BTreeMap::from([
        ("cam0".to_string(), ImagePose::from_pose(&scene.pose)),
        ("cam1".to_string(), ImagePose::from_pose(&scene.pose2)),
    ]);
    let records = set
        .items
        .iter()
        .map(|item| {
            let (pa, pb) = item.pixels.ok_or_else(|| {
                DatasetError::schema(
                    format!("point {}", item.index),
                    "sphere-channel correspondences have no pixels",
                )
            })?;
            Ok(CorrespondenceRecord {
                point_id: item.index as u64,
                image_a: "cam0".into(),
                pixel_a: pa,
                image_b: "cam1".into(),
                pixel_b: pb,
                ground_truth: Some(item.point),
            })
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    build_dataset(*camera, images, records)
}

/// One per-point outcome of a triangulation method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub method: String,
    pub point_id: u64,
    pub residual_s2: Option<f64>,
    pub residual_p2: Option<f64>,
    pub error_r3: Option<f64>,
    pub status: String,
}

pub const RESULT_HEADER: &str = "method,point_id,residual_s2,residual_p2,error_r3,status";

pub fn write_results_to<W: Write>(records: &[ResultRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(RESULT_HEADER.split(','))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_results(records: &[ResultRecord], path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
    write_results_to(records, std::io::BufWriter::new(file)).map_err(|e| DatasetError::io(path, e))
}

pub fn load_results(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>, DatasetError> {
    let path = path.as_ref();
    let location = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| DatasetError::io(path, e))?;
    let header = reader
        .headers()
        .map_err(|e| DatasetError::schema(&location, e))?;
    if header.iter().collect::<Vec<_>>().join(",") != RESULT_HEADER {
        return Err(DatasetError::schema(&location, "unexpected result header"));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(|e| DatasetError::schema(&location, e)))
        .collect()
}
