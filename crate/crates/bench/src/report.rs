use std::io::Write;

use sphtri::dataset::format_float;

pub const SUMMARY_HEADER: &str = "method,channel,sigma,n,mean_s2,median_s2,mean_p2,median_p2,mean_r3,median_r3,mean_d_ref,max_d_ref,runtime_us";

/// Aggregate statistics of one method under one noise setting.
///
/// Empty statistics (no samples, or not applicable) are written as empty
/// CSV fields.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SummaryRow {
    pub method: String,
    pub channel: String,
    pub sigma: Option<f64>,
    pub n: usize,
    pub mean_s2: Option<f64>,
    pub median_s2: Option<f64>,
    pub mean_p2: Option<f64>,
    pub median_p2: Option<f64>,
    pub mean_r3: Option<f64>,
    pub median_r3: Option<f64>,
    pub mean_d_ref: Option<f64>,
    pub max_d_ref: Option<f64>,
    pub runtime_us: Option<f64>,
    /// Points the method failed on; not part of the CSV.
    pub failures: usize,
    /// Points left out of the P² statistics; not part of the CSV.
    pub p2_excluded: usize,
}

impl SummaryRow {
    pub fn timing(method: String, sigma: f64, n: usize, runtime_us: f64) -> Self {
        SummaryRow {
            method,
            channel: "sphere".into(),
            sigma: Some(sigma),
            n,
            runtime_us: Some(runtime_us),
            ..Default::default()
        }
    }

    fn fields(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(format_float).unwrap_or_default();
        vec![
            self.method.clone(),
            self.channel.clone(),
            opt(self.sigma),
            self.n.to_string(),
            opt(self.mean_s2),
            opt(self.median_s2),
            opt(self.mean_p2),
            opt(self.median_p2),
            opt(self.mean_r3),
            opt(self.median_r3),
            opt(self.mean_d_ref),
            opt(self.max_d_ref),
            opt(self.runtime_us),
        ]
    }
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(SUMMARY_HEADER.split(','))?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}
