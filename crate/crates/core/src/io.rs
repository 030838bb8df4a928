//! Run configuration, the constants ledger, and CSV/PGM serialization.

use std::io::Write;

use image::codecs::pnm::{PnmDecoder, PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageDecoder, ImageEncoder};

use serde::{Deserialize, Serialize};

use crate::dynamics::{GrayImage, OrbitStep};
use crate::error::{Error, Result};
use crate::hair::{ConvergenceReport, HairSample};
use crate::kernel::{self, KernelKind, KernelProps, KernelSpec};
use crate::linalg::Vector;
use crate::map::Calibration;
use crate::sampling::SampledConstants;

pub const DEFAULT_SEED: u64 = 20_240_611;

fn default_dimension() -> usize {
    3
}
fn default_kernel() -> KernelKind {
    KernelKind::LinfRadial
}
fn default_alpha() -> f64 {
    0.5
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "default_kernel")]
    pub kernel: KernelKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Points per axis for calibration; chosen from the dimension when absent.
    #[serde(default)]
    pub grid_n: Option<usize>,
    #[serde(default)]
    pub a_override: Option<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dimension: default_dimension(),
            kernel: default_kernel(),
            alpha: default_alpha(),
            grid_n: None,
            a_override: None,
            seed: default_seed(),
        }
    }
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Keeps the calibration grid near `2 * 10^4` points.
    pub fn grid(&self) -> usize {
        self.grid_n.unwrap_or(match self.dimension {
            0..=3 => 128,
            4 => 32,
            _ => 16,
        })
    }

    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.kernel, self.dimension)
    }

    pub fn calibrate(&self) -> Result<Calibration> {
        Calibration::calibrate_with(self.kernel_spec()?, self.alpha, self.grid(), self.a_override)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimates {
    pub lipschitz: f64,
    pub holder_exponent: f64,
    pub holder_constant: f64,
}

/// Serialized constants of a calibration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub dimension: usize,
    pub kernel: KernelKind,
    pub alpha: f64,
    #[serde(rename = "K_min")]
    pub k_min: f64,
    #[serde(rename = "K_max")]
    pub k_max: f64,
    pub m: f64,
    #[serde(rename = "M")]
    pub m_upper: f64,
    pub a: f64,
    pub v: Vec<f64>,
    pub xi: Vec<f64>,
    pub grid_n: usize,
    pub margins: Margins,
    pub kernel_estimates: KernelEstimates,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampled: Option<SampledConstants>,
}

impl Ledger {
    pub fn from_calibration(cal: &Calibration, sampled: Option<SampledConstants>) -> Self {
        Ledger {
            dimension: cal.dimension(),
            kernel: cal.kernel.kind,
            alpha: cal.alpha,
            k_min: cal.k_min,
            k_max: cal.k_max,
            m: cal.m,
            m_upper: cal.m_upper,
            a: cal.a,
            v: cal.props.north_preimage.clone(),
            xi: cal.xi.as_slice().to_vec(),
            grid_n: cal.grid_n,
            margins: Margins {
                estimate: kernel::ESTIMATE_MARGIN,
            },
            kernel_estimates: KernelEstimates {
                lipschitz: cal.props.lipschitz,
                holder_exponent: cal.props.holder_exponent,
                holder_constant: cal.props.holder_constant,
            },
            sampled,
        }
    }

    /// Rebuilds a calibration and checks its defining inequalities.
    pub fn to_calibration(&self) -> Result<Calibration> {
        let kernel = KernelSpec::new(self.kernel, self.dimension)?;
        if self.v.len() != self.dimension - 1 || self.xi.len() != self.dimension {
            return Err(Error::Ledger("v or xi has the wrong length".into()));
        }
        let cal = Calibration {
            kernel,
            props: KernelProps {
                lipschitz: self.kernel_estimates.lipschitz,
                holder_exponent: self.kernel_estimates.holder_exponent,
                holder_constant: self.kernel_estimates.holder_constant,
                north_preimage: self.v.clone(),
            },
            alpha: self.alpha,
            k_min: self.k_min,
            k_max: self.k_max,
            m: self.m,
            m_upper: self.m_upper,
            a: self.a,
            grid_n: self.grid_n,
            xi: Vector::from_column_slice(&self.xi),
        };
        cal.validate()?;
        Ok(cal)
    }

    pub fn to_json_string(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Full-precision float: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn coord_header(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("{prefix}{i}")).collect()
}

fn floats(xs: &[f64]) -> impl Iterator<Item = String> + '_ {
    xs.iter().map(|x| fmt_f64(*x))
}

fn table<F>(header: Vec<String>, fill: F) -> String
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    // writing into memory cannot fail
    w.write_record(&header).expect("in-memory csv");
    fill(&mut w).expect("in-memory csv");
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv output is UTF-8")
}

pub fn hair_csv(samples: &[HairSample], d: usize) -> String {
    let mut header = vec!["t".to_string()];
    header.extend(coord_header("x", d));
    header.extend(coord_header("dx", d));
    header.extend(["k", "c0_err", "c1_err", "flags"].map(String::from));
    table(header, |w| {
        for s in samples {
            let mut rec = vec![fmt_f64(s.t)];
            rec.extend(floats(s.point.as_slice()));
            rec.extend(floats(s.tangent.as_slice()));
            rec.extend([s.k.to_string(), fmt_f64(s.c0_err), fmt_f64(s.c1_err), s.flags().join("|")]);
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

pub fn convergence_csv(report: &ConvergenceReport) -> String {
    table(["k", "c0", "c1"].map(String::from).to_vec(), |w| {
        for r in &report.rows {
            w.write_record([r.k.to_string(), fmt_f64(r.c0), fmt_f64(r.c1)])?;
        }
        Ok(())
    })
}

pub fn orbit_csv(steps: &[OrbitStep], d: usize) -> String {
    let mut header = vec!["step".to_string()];
    header.extend(coord_header("x", d));
    header.extend(["height", "tract_r", "omega"].map(String::from));
    table(header, |w| {
        for s in steps {
            let mut rec = vec![s.step.to_string()];
            rec.extend(floats(s.point.as_slice()));
            rec.push(fmt_f64(s.point[d - 1]));
            rec.push(s.tract.as_ref().map(|r| r.to_string()).unwrap_or_default());
            rec.push(u8::from(s.omega).to_string());
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

/// Header and rows of a comma-separated table.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.is_empty() {
            return Err(Error::Parse("empty table".into()));
        }
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<csv::Result<Vec<Vec<String>>>>()?;
        Ok(CsvTable { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn float(&self, row: usize, name: &str) -> Result<f64> {
        let c = self
            .column(name)
            .ok_or_else(|| Error::Parse(format!("no column '{name}'")))?;
        self.rows[row][c]
            .parse()
            .map_err(|e| Error::Parse(format!("column '{name}': {e}")))
    }
}

/// Binary graymap, maxval 255.
pub fn write_pgm<W: Write>(img: &GrayImage, w: W) -> Result<()> {
    let enc = PnmEncoder::new(w).with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
    enc.write_image(&img.pixels, img.width as u32, img.height as u32, ExtendedColorType::L8)?;
    Ok(())
}

pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let dec = PnmDecoder::new(bytes)?;
    let h = dec.header();
    if dec.subtype() != PnmSubtype::Graymap(SampleEncoding::Binary) || h.maximal_sample() != 255 {
        return Err(Error::Parse("PGM: expected binary graymap with maxval 255".into()));
    }
    let (width, height) = (h.width() as usize, h.height() as usize);
    let mut pixels = vec![0u8; dec.total_bytes() as usize];
    dec.read_image(&mut pixels)?;
    Ok(GrayImage {
        width,
        height,
        pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeIndex;

    #[test]
    fn config_defaults_and_rejection() {
        let c = RunConfig::from_json_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.grid(), 128);
        let c = RunConfig::from_json_str(r#"{"dimension":4,"kernel":"linf_radial","alpha":0.25}"#).unwrap();
        assert_eq!(c.dimension, 4);
        assert!(RunConfig::from_json_str(r#"{"dimension":3,"bogus":1}"#).is_err());
    }

    #[test]
    fn ledger_round_trip_and_corruption() {
        let cal = RunConfig {
            grid_n: Some(32),
            ..RunConfig::default()
        }
        .calibrate()
        .unwrap();
        let ledger = Ledger::from_calibration(&cal, None);
        let text = ledger.to_json_string().unwrap();
        let back = Ledger::from_json_str(&text).unwrap();
        assert_eq!(back, ledger);
        back.to_calibration().unwrap();
        let mut broken = ledger.clone();
        broken.m = broken.m_upper + 1.0;
        assert!(matches!(broken.to_calibration(), Err(Error::Ledger(_))));
    }

    #[test]
    fn floats_round_trip_through_text() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn orbit_table_round_trip() {
        let steps = vec![OrbitStep {
            step: 0,
            point: Vector::from_vec(vec![0.25, -4.0, 3.5]),
            tract: Some(LatticeIndex::new(vec![0, -2])),
            omega: true,
        }];
        let text = orbit_csv(&steps, 3);
        let t = CsvTable::parse(&text).unwrap();
        assert_eq!(t.header, vec!["step", "x1", "x2", "x3", "height", "tract_r", "omega"]);
        assert_eq!(t.float(0, "x2").unwrap(), -4.0);
        assert_eq!(t.rows[0][5], "0;-2");
        assert!(!text.contains('\r'));
    }

    #[test]
    fn pgm_round_trip() {
        let img = GrayImage {
            width: 3,
            height: 2,
            pixels: vec![0, 10, 255, 32, 9, 13],
        };
        let mut buf = Vec::new();
        write_pgm(&img, &mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n3 2 255\n") && buf.len() == 11 + 6);
        assert_eq!(read_pgm(&buf).unwrap(), img);
        assert!(read_pgm(b"P2\n1 1\n255\n\0").is_err());
    }
}
