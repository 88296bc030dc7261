use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::SweepConfig;
use crate::error::{Error, Result};

/// One ε of a sweep. Absent metrics are NaN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub eps: f64,
    pub h: f64,
    pub thickness: f64,
    pub hausdorff_max: f64,
    pub radius_err_max: f64,
    pub t_gen: f64,
    pub t_gen_theory: f64,
    pub v_err: f64,
    pub drift: f64,
    pub rect_ok: f64,
    pub thickness_slope: f64,
    pub error_slope: f64,
}

pub const COLUMNS: [&str; 12] = [
    "eps",
    "h",
    "thickness",
    "hausdorff_max",
    "radius_err_max",
    "t_gen",
    "t_gen_theory",
    "v_err",
    "drift",
    "rect_ok",
    "thickness_slope",
    "error_slope",
];

impl SweepRecord {
    pub fn empty(eps: f64, h: f64) -> Self {
        SweepRecord {
            eps,
            h,
            thickness: f64::NAN,
            hausdorff_max: f64::NAN,
            radius_err_max: f64::NAN,
            t_gen: f64::NAN,
            t_gen_theory: f64::NAN,
            v_err: f64::NAN,
            drift: f64::NAN,
            rect_ok: f64::NAN,
            thickness_slope: f64::NAN,
            error_slope: f64::NAN,
        }
    }

    fn values(&self) -> [f64; 12] {
        [
            self.eps,
            self.h,
            self.thickness,
            self.hausdorff_max,
            self.radius_err_max,
            self.t_gen,
            self.t_gen_theory,
            self.v_err,
            self.drift,
            self.rect_ok,
            self.thickness_slope,
            self.error_slope,
        ]
    }

    fn from_values(v: &[f64]) -> Self {
        SweepRecord {
            eps: v[0],
            h: v[1],
            thickness: v[2],
            hausdorff_max: v[3],
            radius_err_max: v[4],
            t_gen: v[5],
            t_gen_theory: v[6],
            v_err: v[7],
            drift: v[8],
            rect_ok: v[9],
            thickness_slope: v[10],
            error_slope: v[11],
        }
    }
}

/// 17 significant digits, which round-trips every f64.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.16e}")
    }
}

/// CSV with a header row and any numeric table.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let line: Vec<String> = r.iter().map(|&x| fmt_num(x)).collect();
        writeln!(s, "{}", line.join(",")).expect("writing to a String");
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn records_to_csv(records: &[SweepRecord]) -> String {
    let mut s = COLUMNS.join(",");
    s.push('\n');
    for r in records {
        let line: Vec<String> = r.values().iter().map(|&x| fmt_num(x)).collect();
        writeln!(s, "{}", line.join(",")).expect("writing to a String");
    }
    s
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
    if header != COLUMNS.join(",") {
        return Err(Error::Parse(format!("unexpected header '{header}'")));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let v: Vec<f64> = l
                .split(',')
                .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("'{f}': {e}"))))
                .collect::<Result<_>>()?;
            if v.len() != COLUMNS.len() {
                return Err(Error::Parse(format!("{} fields, expected {}", v.len(), COLUMNS.len())));
            }
            Ok(SweepRecord::from_values(&v))
        })
        .collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'a str,
    version: &'a str,
    columns: &'a [&'a str],
    config: &'a SweepConfig,
    records: usize,
}

/// Writes `path` (CSV) and the manifest next to it with a `.json` extension;
/// returns the manifest path.
pub fn export(records: &[SweepRecord], cfg: &SweepConfig, path: &Path) -> Result<PathBuf> {
    std::fs::write(path, records_to_csv(records))?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        columns: &COLUMNS,
        config: cfg,
        records: records.len(),
    };
    let mpath = path.with_extension("json");
    std::fs::write(&mpath, serde_json::to_string_pretty(&manifest)?)?;
    Ok(mpath)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_and_single() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        let cfg = SweepConfig::default();
        let m = export(&[], &cfg, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(parse_csv(&text).unwrap().is_empty());
        let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(m).unwrap()).unwrap();
        assert_eq!(manifest["config"]["scenario"], "1d-generation");
        let mut r = SweepRecord::empty(0.02, 0.005);
        r.thickness = 0.0833;
        export(&[r.clone()], &cfg, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 2);
        let back = parse_csv(&text).unwrap();
        assert_eq!(back[0].thickness.to_bits(), r.thickness.to_bits());
        assert!(back[0].v_err.is_nan());
        assert!(export(&[], &cfg, &dir.path().join("missing/x.csv")).is_err());
    }

    #[test]
    fn deterministic_bytes() {
        let r = SweepRecord { hausdorff_max: 1.0 / 3.0, ..SweepRecord::empty(0.04, 0.01) };
        assert_eq!(records_to_csv(&[r.clone()]), records_to_csv(&[r]));
    }

    proptest! {
        #[test]
        fn round_trip_bit_exact(xs in proptest::collection::vec(-1e300f64..1e300, 12)) {
            let r = SweepRecord::from_values(&xs);
            let back = parse_csv(&records_to_csv(&[r])).unwrap();
            for (a, b) in back[0].values().iter().zip(&xs) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
