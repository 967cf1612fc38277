//! On-disk formats: dataset bundles, run records, and PPM rendering.
//!
//! A dataset bundle is a directory with a `meta.json` and one CSV per field.
//! Each CSV holds `ny` rows of `nx` comma-separated values; row 0 is the
//! bottom edge of the domain. Values are printed as `{:.16e}` (17
//! significant digits), which round-trips `f64` exactly.

use crate::fem::PhantomSpec;
use crate::grid::{BoundarySpec, GridGeom, Scales, ScalarField, StrainField, StressField};
use crate::loss::LossBreakdown;
use crate::train::{Aggregate, EpochLog, RunRecord};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Bumped on any incompatible change to the bundle layout.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseMeta {
    pub level: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub format_version: u32,
    pub nx: usize,
    pub ny: usize,
    pub length_x: f64,
    pub length_y: f64,
    pub scales: Scales,
    pub boundary: BoundarySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantom: Option<PhantomSpec>,
}

/// A generated dataset: measured strains plus optional ground truth.
#[derive(Debug, Clone)]
pub struct FieldBundle {
    pub meta: BundleMeta,
    pub strain: StrainField<f64>,
    pub truth_e: Option<ScalarField<f64>>,
    pub truth_nu: Option<ScalarField<f64>>,
    pub truth_stress: Option<StressField<f64>>,
}

impl FieldBundle {
    pub fn geom(&self) -> GridGeom {
        self.strain.geom()
    }

    /// Writes the bundle into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(&self.meta)?;
        fs::write(dir.join("meta.json"), json + "\n")?;
        write_field_csv(&dir.join("strain_xx.csv"), &self.strain.xx)?;
        write_field_csv(&dir.join("strain_yy.csv"), &self.strain.yy)?;
        write_field_csv(&dir.join("strain_xy.csv"), &self.strain.xy)?;
        if let Some(f) = &self.truth_e {
            write_field_csv(&dir.join("truth_E.csv"), f)?;
        }
        if let Some(f) = &self.truth_nu {
            write_field_csv(&dir.join("truth_nu.csv"), f)?;
        }
        if let Some(s) = &self.truth_stress {
            write_field_csv(&dir.join("truth_stress_xx.csv"), &s.xx)?;
            write_field_csv(&dir.join("truth_stress_yy.csv"), &s.yy)?;
            write_field_csv(&dir.join("truth_stress_xy.csv"), &s.xy)?;
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let raw = fs::read_to_string(dir.join("meta.json"))
            .map_err(|e| Error::format(format!("cannot read {}: {e}", dir.join("meta.json").display())))?;
        let meta: BundleMeta = serde_json::from_str(&raw)?;
        if meta.format_version != FORMAT_VERSION {
            return Err(Error::format(format!(
                "bundle format version {} is not supported (expected {FORMAT_VERSION})",
                meta.format_version
            )));
        }
        let geom = GridGeom::new(meta.nx, meta.ny, meta.length_x, meta.length_y)?;
        let read_opt = |name: &str| -> Result<Option<ScalarField<f64>>> {
            let p = dir.join(name);
            if p.exists() {
                Ok(Some(read_field_csv(&p, geom)?))
            } else {
                Ok(None)
            }
        };
        let strain = StrainField::new(
            read_field_csv(&dir.join("strain_xx.csv"), geom)?,
            read_field_csv(&dir.join("strain_yy.csv"), geom)?,
            read_field_csv(&dir.join("strain_xy.csv"), geom)?,
        )?;
        let truth_stress = match (
            read_opt("truth_stress_xx.csv")?,
            read_opt("truth_stress_yy.csv")?,
            read_opt("truth_stress_xy.csv")?,
        ) {
            (Some(xx), Some(yy), Some(xy)) => Some(StressField::new(xx, yy, xy)?),
            (None, None, None) => None,
            _ => return Err(Error::format("incomplete truth stress triple in bundle")),
        };
        Ok(FieldBundle {
            meta,
            strain,
            truth_e: read_opt("truth_E.csv")?,
            truth_nu: read_opt("truth_nu.csv")?,
            truth_stress,
        })
    }
}

/// Writes one grid field: `ny` rows of `nx` values, row 0 = bottom.
pub fn write_field_csv(path: &Path, field: &ScalarField<f64>) -> Result<()> {
    let geom = field.geom();
    let mut w = BufWriter::new(fs::File::create(path)?);
    for j in 0..geom.ny {
        let row = &field.values()[j * geom.nx..(j + 1) * geom.nx];
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                write!(w, ",")?;
            }
            write!(w, "{v:.16e}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field_csv(path: &Path, geom: GridGeom) -> Result<ScalarField<f64>> {
    let f = fs::File::open(path)
        .map_err(|e| Error::format(format!("cannot open {}: {e}", path.display())))?;
    let mut values = Vec::with_capacity(geom.len());
    let mut rows = 0usize;
    for (lineno, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut cols = 0usize;
        for tok in line.split(',') {
            let v: f64 = tok.trim().parse().map_err(|_| {
                Error::format(format!("{}:{}: bad number {tok:?}", path.display(), lineno + 1))
            })?;
            values.push(v);
            cols += 1;
        }
        if cols != geom.nx {
            return Err(Error::format(format!(
                "{}:{}: {cols} columns, expected {}",
                path.display(),
                lineno + 1,
                geom.nx
            )));
        }
        rows += 1;
    }
    if rows != geom.ny {
        return Err(Error::format(format!(
            "{}: {rows} rows, expected {}",
            path.display(),
            geom.ny
        )));
    }
    ScalarField::new(geom, values)
}

fn write_loss_csv(path: &Path, log: &[EpochLog]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "epoch,equilibrium,constitutive,boundary,total,err_E,err_nu")?;
    for l in log {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            l.epoch,
            l.loss.equilibrium,
            l.loss.constitutive,
            l.loss.boundary,
            l.loss.total,
            opt(l.err_e),
            opt(l.err_nu)
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_loss_csv(path: &Path) -> Result<Vec<EpochLog>> {
    let f = fs::File::open(path)
        .map_err(|e| Error::format(format!("cannot open {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if lineno == 0 || line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(Error::format(format!("{}:{}: bad loss row", path.display(), lineno + 1)));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::format(format!("{}:{}: bad number {s:?}", path.display(), lineno + 1)))
        };
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        out.push(EpochLog {
            epoch: cols[0]
                .parse()
                .map_err(|_| Error::format(format!("{}:{}: bad epoch", path.display(), lineno + 1)))?,
            loss: LossBreakdown {
                equilibrium: num(cols[1])?,
                constitutive: num(cols[2])?,
                boundary: num(cols[3])?,
                total: num(cols[4])?,
            },
            err_e: opt(cols[5])?,
            err_nu: opt(cols[6])?,
        });
    }
    Ok(out)
}

fn write_rows_csv(path: &Path, rows: &[&[f64]]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for row in rows {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                write!(w, ",")?;
            }
            write!(w, "{v:.16e}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one run into `dir/run-<seed>/`: the recovered maps, the loss
/// trace, and (when present) predicted stresses and weight fields.
pub fn write_run(dir: &Path, run: &RunRecord) -> Result<()> {
    let rd = dir.join(format!("run-{}", run.seed));
    fs::create_dir_all(&rd)?;
    write_field_csv(&rd.join("est_E.csv"), &run.est_e)?;
    write_field_csv(&rd.join("est_nu.csv"), &run.est_nu)?;
    write_loss_csv(&rd.join("losses.csv"), &run.log)?;
    let geom = run.est_e.geom();
    let mask: Vec<f64> = run.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    write_field_csv(&rd.join("mask.csv"), &ScalarField::new(geom, mask)?)?;
    if let Some(s) = &run.est_stress {
        write_field_csv(&rd.join("est_stress_xx.csv"), &s.xx)?;
        write_field_csv(&rd.join("est_stress_yy.csv"), &s.yy)?;
        write_field_csv(&rd.join("est_stress_xy.csv"), &s.xy)?;
    }
    if let Some(w) = &run.weights {
        let (h, wd) = (geom.ny, geom.nx);
        let grid = |v: &[f64], cols: usize| -> Vec<Vec<f64>> {
            v.chunks(cols).map(|c| c.to_vec()).collect()
        };
        let write_grid = |name: &str, rows: Vec<Vec<f64>>| -> Result<()> {
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            write_rows_csv(&rd.join(name), &refs)
        };
        write_grid("psi_constitutive.csv", grid(&w.psi_c, wd))?;
        if let Some(pe) = &w.psi_e {
            write_grid("psi_equilibrium.csv", grid(pe, wd))?;
        }
        write_grid("psi_top_bottom.csv", grid(&w.psi_tb, wd))?;
        write_grid("psi_sides.csv", grid(&w.psi_sides, h - 2))?;
    }
    Ok(())
}

/// Summary statistics of an aggregate, written as `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub runs: usize,
    pub final_err_e: Vec<Option<f64>>,
    pub final_err_nu: Vec<Option<f64>>,
    pub median_err_e: Option<f64>,
    pub median_err_nu: Option<f64>,
}

/// Writes cross-run aggregates into `dir/aggregate/`.
pub fn write_aggregate(dir: &Path, agg: &Aggregate) -> Result<()> {
    let ad = dir.join("aggregate");
    fs::create_dir_all(&ad)?;
    write_field_csv(&ad.join("mean_E.csv"), &agg.mean_e)?;
    write_field_csv(&ad.join("mean_nu.csv"), &agg.mean_nu)?;
    let mut w = BufWriter::new(fs::File::create(ad.join("loss_curve.csv"))?);
    writeln!(w, "epoch,total_mean,total_std")?;
    for k in 0..agg.epochs.len() {
        writeln!(w, "{},{:.16e},{:.16e}", agg.epochs[k], agg.loss_mean[k], agg.loss_std[k])?;
    }
    w.flush()?;
    let med = |v: &[Option<f64>]| -> Option<f64> {
        let vals: Vec<f64> = v.iter().flatten().copied().collect();
        if vals.len() == v.len() && !vals.is_empty() {
            Some(crate::train::median(&vals))
        } else {
            None
        }
    };
    let summary = AggregateSummary {
        runs: agg.final_err_e.len(),
        median_err_e: med(&agg.final_err_e),
        median_err_nu: med(&agg.final_err_nu),
        final_err_e: agg.final_err_e.clone(),
        final_err_nu: agg.final_err_nu.clone(),
    };
    fs::write(ad.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(())
}

/// Renders a field as a binary grayscale PPM (`P6`). The image is written
/// top row first; each byte is `round(255 (v - min) / (max - min))` with
/// values clamped into `[min, max]`. Without an explicit range the field's
/// own min/max is used, and a constant field maps to 0 everywhere.
pub fn render_ppm(path: &Path, field: &ScalarField<f64>, range: Option<(f64, f64)>) -> Result<()> {
    let geom = field.geom();
    let (auto_lo, auto_hi) = field
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !auto_lo.is_finite() || !auto_hi.is_finite() {
        return Err(Error::numerical("cannot render a field with non-finite values"));
    }
    let (lo, hi) = range.unwrap_or((auto_lo, auto_hi));
    if lo > hi {
        return Err(Error::invalid("render range min exceeds max"));
    }
    let span = hi - lo;
    if span == 0.0 && auto_hi > auto_lo {
        return Err(Error::invalid("degenerate render range for a non-constant field"));
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    write!(w, "P6\n{} {}\n255\n", geom.nx, geom.ny)?;
    let mut buf = Vec::with_capacity(3 * geom.len());
    for j in (0..geom.ny).rev() {
        for i in 0..geom.nx {
            let v = field.at(i, j).clamp(lo, hi.max(lo));
            let byte = if span == 0.0 {
                0u8
            } else {
                (255.0 * (v - lo) / span).round() as u8
            };
            buf.extend_from_slice(&[byte, byte, byte]);
        }
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::EdgeSpec;

    fn tmpdir(name: &str) -> std::path::PathBuf {
        let d = std::env::temp_dir().join(format!("elastinv-io-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        fs::create_dir_all(&d).unwrap();
        d
    }

    fn sample_bundle() -> FieldBundle {
        let geom = GridGeom::new(7, 5, 1.4, 1.0).unwrap();
        let f = |k: u64| {
            ScalarField::from_fn(geom, move |i, j| {
                // Awkward values exercise the round-trip.
                ((i * 31 + j * 17 + k as usize) as f64).sqrt() * 1.234e-3 - 7e-4
            })
        };
        FieldBundle {
            meta: BundleMeta {
                format_version: FORMAT_VERSION,
                nx: 7,
                ny: 5,
                length_x: 1.4,
                length_y: 1.0,
                scales: Scales { l0: 1.2, sigma0: 60.0 },
                boundary: BoundarySpec {
                    bottom: EdgeSpec::traction(60.0, 0.0),
                    top: EdgeSpec::traction(60.0, 0.0),
                    left: EdgeSpec::traction(0.0, 0.0),
                    right: EdgeSpec::traction(0.0, 0.0),
                },
                noise: Some(NoiseMeta { level: 0.01, seed: 42 }),
                phantom: None,
            },
            strain: StrainField::new(f(0), f(1), f(2)).unwrap(),
            truth_e: Some(f(3)),
            truth_nu: Some(f(4)),
            truth_stress: Some(StressField::new(f(5), f(6), f(7)).unwrap()),
        }
    }

    #[test]
    fn bundle_round_trip_is_exact() {
        let d = tmpdir("bundle");
        let b = sample_bundle();
        b.write(&d).unwrap();
        let r = FieldBundle::read(&d).unwrap();
        assert_eq!(r.meta, b.meta);
        assert_eq!(r.strain.xx.values(), b.strain.xx.values());
        assert_eq!(r.strain.xy.values(), b.strain.xy.values());
        assert_eq!(r.truth_e.unwrap().values(), b.truth_e.as_ref().unwrap().values());
        assert_eq!(
            r.truth_stress.unwrap().xy.values(),
            b.truth_stress.as_ref().unwrap().xy.values()
        );
        fs::remove_dir_all(&d).unwrap();
    }

    #[test]
    fn version_guard_fails_loudly() {
        let d = tmpdir("version");
        let mut b = sample_bundle();
        b.meta.format_version = FORMAT_VERSION + 1;
        b.write(&d).unwrap();
        let err = FieldBundle::read(&d).unwrap_err();
        assert!(err.to_string().contains("format version"));
        fs::remove_dir_all(&d).unwrap();
    }

    #[test]
    fn malformed_csv_is_an_error() {
        let d = tmpdir("malformed");
        let b = sample_bundle();
        b.write(&d).unwrap();
        fs::write(d.join("strain_yy.csv"), "1.0,2.0\n").unwrap();
        assert!(FieldBundle::read(&d).is_err());
        fs::write(d.join("strain_yy.csv"), "not,a,number,at,all,x,y\n").unwrap();
        assert!(FieldBundle::read(&d).is_err());
        fs::remove_dir_all(&d).unwrap();
    }

    #[test]
    fn loss_csv_round_trip() {
        let d = tmpdir("loss");
        let log = vec![
            EpochLog {
                epoch: 0,
                loss: LossBreakdown { equilibrium: 1.5e-3, constitutive: 2.0e-4, boundary: 0.25, total: 0.2517 },
                err_e: Some(0.4),
                err_nu: None,
            },
            EpochLog {
                epoch: 1,
                loss: LossBreakdown { equilibrium: 1.0e-3, constitutive: 1.0e-4, boundary: 0.2, total: 0.2011 },
                err_e: None,
                err_nu: Some(0.1),
            },
        ];
        let p = d.join("losses.csv");
        write_loss_csv(&p, &log).unwrap();
        let r = read_loss_csv(&p).unwrap();
        assert_eq!(r, log);
        fs::remove_dir_all(&d).unwrap();
    }

    #[test]
    fn ppm_bytes_are_exact() {
        let d = tmpdir("ppm");
        let geom = GridGeom::new(3, 2, 1.0, 1.0).unwrap();
        // Row 0 (bottom): 0, 5, 10; row 1 (top): 2.5, 7.5, 10.
        let f = ScalarField::new(geom, vec![0.0, 5.0, 10.0, 2.5, 7.5, 10.0]).unwrap();
        let p = d.join("f.ppm");
        render_ppm(&p, &f, None).unwrap();
        let bytes = fs::read(&p).unwrap();
        let header = b"P6\n3 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        let px = &bytes[header.len()..];
        // Top row first: 2.5 -> 64, 7.5 -> 191, 10 -> 255; then 0, 128, 255.
        let expect = [64u8, 191, 255, 0, 128, 255];
        let got: Vec<u8> = px.chunks(3).map(|c| c[0]).collect();
        assert_eq!(got, expect);
        assert!(px.chunks(3).all(|c| c[0] == c[1] && c[1] == c[2]));

        // Constant field renders as zeros.
        let c = ScalarField::constant(geom, 3.0);
        render_ppm(&p, &c, None).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert!(bytes[header.len()..].iter().all(|&b| b == 0));
        fs::remove_dir_all(&d).unwrap();
    }
}
