//! CSV and JSON artifacts with their readers.
//!
//! Floats are written in scientific notation with 17 significant digits, so
//! every value reads back bit-for-bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::cascade::CascadePath;
use crate::precision::{EquilibriumPoint, InvestmentRegion};
use crate::welfare::{AggregateWelfare, TableComparison};

pub const PROFILE_HEADER: [&str; 6] = ["mu", "k", "rho_star", "invests", "net_value", "s_star"];
pub const REGION_HEADER: [&str; 6] = ["k", "cost_f", "n_intervals", "interval", "mu_lo", "mu_hi"];
pub const CURVE_HEADER: [&str; 5] = ["lambda", "k", "avg", "min", "max"];
pub const TABLE_HEADER: [&str; 8] = ["k", "avg", "min", "max", "paper_avg", "paper_min", "paper_max", "delta"];
pub const PATH_HEADER: [&str; 11] = [
    "path_id",
    "step",
    "theta",
    "mu_before",
    "p1_empirical",
    "invested",
    "rho",
    "signal",
    "cutoff",
    "action",
    "mu_after",
];

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub mu: f64,
    pub k: f64,
    pub rho_star: f64,
    pub invests: bool,
    pub net_value: f64,
    pub s_star: f64,
}

impl From<&EquilibriumPoint> for ProfileRow {
    fn from(p: &EquilibriumPoint) -> Self {
        Self {
            mu: p.mu,
            k: p.k,
            rho_star: p.rho_star,
            invests: p.invests,
            net_value: p.net_value_of_information,
            s_star: p.s_star,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub k: f64,
    pub cost_f: f64,
    pub n_intervals: usize,
    pub interval: Option<usize>,
    pub mu_lo: Option<f64>,
    pub mu_hi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub lambda: f64,
    pub k: f64,
    pub avg: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub path_id: usize,
    pub step: usize,
    pub theta: u8,
    pub mu_before: f64,
    pub p1_empirical: f64,
    pub invested: bool,
    pub rho: f64,
    pub signal: Option<f64>,
    pub cutoff: f64,
    pub action: u8,
    pub mu_after: f64,
}

pub fn region_rows(regions: &[InvestmentRegion]) -> Vec<RegionRow> {
    let mut rows = Vec::new();
    for r in regions {
        let n = r.intervals.len();
        if n == 0 {
            rows.push(RegionRow {
                k: r.k,
                cost_f: r.cost_f,
                n_intervals: 0,
                interval: None,
                mu_lo: None,
                mu_hi: None,
            });
        }
        for (i, &(lo, hi)) in r.intervals.iter().enumerate() {
            rows.push(RegionRow {
                k: r.k,
                cost_f: r.cost_f,
                n_intervals: n,
                interval: Some(i),
                mu_lo: Some(lo),
                mu_hi: Some(hi),
            });
        }
    }
    rows
}

pub fn curve_rows(curves: &[Vec<AggregateWelfare>]) -> Vec<CurveRow> {
    curves
        .iter()
        .flatten()
        .map(|a| CurveRow {
            lambda: a.lambda,
            k: a.k,
            avg: a.average,
            min: a.min,
            max: a.max,
        })
        .collect()
}

pub fn path_rows(path_id: usize, path: &CascadePath) -> impl Iterator<Item = PathRow> + '_ {
    path.steps.iter().map(move |s| PathRow {
        path_id,
        step: s.index,
        theta: path.theta,
        mu_before: s.mu_before,
        p1_empirical: s.p1_empirical,
        invested: s.invested,
        rho: s.rho,
        signal: s.signal,
        cutoff: s.cutoff,
        action: s.action,
        mu_after: s.mu_after,
    })
}

fn writer<W: Write>(out: W, header: &[&str]) -> csv::Result<csv::Writer<W>> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    Ok(w)
}

pub fn write_profile<W: Write>(out: W, rows: &[ProfileRow]) -> csv::Result<()> {
    let mut w = writer(out, &PROFILE_HEADER)?;
    for r in rows {
        w.write_record([
            fmt_f64(r.mu),
            fmt_f64(r.k),
            fmt_f64(r.rho_star),
            r.invests.to_string(),
            fmt_f64(r.net_value),
            fmt_f64(r.s_star),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_regions<W: Write>(out: W, rows: &[RegionRow]) -> csv::Result<()> {
    let mut w = writer(out, &REGION_HEADER)?;
    for r in rows {
        w.write_record([
            fmt_f64(r.k),
            fmt_f64(r.cost_f),
            r.n_intervals.to_string(),
            r.interval.map(|i| i.to_string()).unwrap_or_default(),
            fmt_opt(r.mu_lo),
            fmt_opt(r.mu_hi),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curves<W: Write>(out: W, rows: &[CurveRow]) -> csv::Result<()> {
    let mut w = writer(out, &CURVE_HEADER)?;
    for r in rows {
        w.write_record([r.lambda, r.k, r.avg, r.min, r.max].map(fmt_f64))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table<W: Write>(out: W, rows: &[TableComparison]) -> csv::Result<()> {
    let mut w = writer(out, &TABLE_HEADER)?;
    for r in rows {
        w.write_record([r.k, r.avg, r.min, r.max, r.paper_avg, r.paper_min, r.paper_max, r.delta].map(fmt_f64))?;
    }
    w.flush()?;
    Ok(())
}

/// Streams path rows; the writer is reused across paths.
pub struct PathWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> PathWriter<W> {
    pub fn new(out: W) -> csv::Result<Self> {
        Ok(Self {
            inner: writer(out, &PATH_HEADER)?,
        })
    }

    pub fn write_path(&mut self, path_id: usize, path: &CascadePath) -> csv::Result<()> {
        for r in path_rows(path_id, path) {
            self.inner.write_record([
                r.path_id.to_string(),
                r.step.to_string(),
                r.theta.to_string(),
                fmt_f64(r.mu_before),
                fmt_f64(r.p1_empirical),
                r.invested.to_string(),
                fmt_f64(r.rho),
                fmt_opt(r.signal),
                fmt_f64(r.cutoff),
                r.action.to_string(),
                fmt_f64(r.mu_after),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> csv::Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R, header: &[&str]) -> csv::Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(input);
    let found = r.headers()?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("unexpected header {:?}, expected {:?}", found, header),
        )));
    }
    r.deserialize().collect()
}

pub fn read_profile<R: Read>(input: R) -> csv::Result<Vec<ProfileRow>> {
    read_rows(input, &PROFILE_HEADER)
}

pub fn read_regions<R: Read>(input: R) -> csv::Result<Vec<RegionRow>> {
    read_rows(input, &REGION_HEADER)
}

pub fn read_curves<R: Read>(input: R) -> csv::Result<Vec<CurveRow>> {
    read_rows(input, &CURVE_HEADER)
}

pub fn read_table<R: Read>(input: R) -> csv::Result<Vec<TableComparison>> {
    read_rows(input, &TABLE_HEADER)
}

pub fn read_paths<R: Read>(input: R) -> csv::Result<Vec<PathRow>> {
    read_rows(input, &PATH_HEADER)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            0.0,
            f64::MAX,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn profile_round_trip_with_infinite_threshold() {
        let rows = vec![
            ProfileRow {
                mu: 0.02,
                k: 0.1,
                rho_star: 0.0,
                invests: false,
                net_value: 1.0 / 7.0,
                s_star: f64::NEG_INFINITY,
            },
            ProfileRow {
                mu: 0.5,
                k: 0.1,
                rho_star: 0.294_981_2,
                invests: true,
                net_value: 0.08,
                s_star: 0.5,
            },
        ];
        let mut buf = Vec::new();
        write_profile(&mut buf, &rows).unwrap();
        assert!(buf.starts_with(b"mu,k,rho_star,invests,net_value,s_star\n"));
        assert_eq!(read_profile(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn region_rows_cover_empty_regions() {
        let empty = InvestmentRegion::from_mask(0.2, 0.16, vec![0.4, 0.5], vec![false, false]);
        let split = InvestmentRegion::from_mask(0.2, 0.06, vec![0.3, 0.4, 0.5], vec![true, false, true]);
        let rows = region_rows(&[empty, split]);
        assert_eq!(rows.len(), 3);
        let mut buf = Vec::new();
        write_regions(&mut buf, &rows).unwrap();
        assert_eq!(read_regions(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(read_profile(&b"mu,k\n0.1,0.2\n"[..]).is_err());
    }
}
