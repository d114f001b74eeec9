//! Plot-ready data files, derived from results rows only.

use std::collections::BTreeSet;
use std::fmt::{self, Write};

use crate::protocol::Variant;
use crate::sim::metrics::nan_mean;
use crate::sim::ResultRow;

pub const FIGURE_NAMES: [&str; 5] = [
    "fig2_wasted_capacity",
    "fig3_noncorrupted_kbits",
    "fig4_wasted_energy",
    "fig5_security_energy",
    "fig6_download_energy",
];

const DEFAULT_PCTS: [f64; 7] = [0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0];
const DEFAULT_SIZES: [u64; 5] = [5_000, 50_000, 500_000, 40_000_000, 80_000_000];
const TRUST_VARIANTS: [Variant; 3] = [Variant::D2d, Variant::Sd2d, Variant::Std2d];

#[derive(Debug, Clone, Copy)]
pub struct FigureRequest {
    pub ref_file_bits: u64,
    pub ref_malicious_pct: f64,
}

impl Default for FigureRequest {
    fn default() -> Self {
        Self {
            ref_file_bits: 500_000,
            ref_malicious_pct: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct FigureError {
    pub figure: String,
    /// Absent `(variant, axis value)` cells.
    pub missing: Vec<String>,
}

impl fmt::Display for FigureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: results do not cover {} cell(s): {}",
            self.figure,
            self.missing.len(),
            self.missing.join(", ")
        )
    }
}

fn pct_key(p: f64) -> i64 {
    (p * 1e6).round() as i64
}

fn stats(values: &[f64]) -> (f64, f64, usize) {
    let defined: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    let n = defined.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let m = nan_mean(defined.iter().copied());
    let var = if n > 1 {
        defined.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    (m, var.sqrt(), n)
}

#[derive(Clone, Copy)]
enum Axis {
    MaliciousPct,
    FileBits,
}

struct Series {
    variant: Variant,
    label: &'static str,
    value: fn(&ResultRow) -> f64,
}

struct Spec {
    name: &'static str,
    title: &'static str,
    axis: Axis,
    series: Vec<Series>,
}

fn render(rows: &[ResultRow], spec: &Spec, req: &FigureRequest) -> Result<String, FigureError> {
    let at_ref = |r: &&ResultRow| match spec.axis {
        Axis::MaliciousPct => r.file_bits == req.ref_file_bits,
        Axis::FileBits => pct_key(r.malicious_pct) == pct_key(req.ref_malicious_pct),
    };
    let x_of = |r: &ResultRow| match spec.axis {
        Axis::MaliciousPct => pct_key(r.malicious_pct),
        Axis::FileBits => r.file_bits as i64,
    };
    let relevant: Vec<&ResultRow> = rows.iter().filter(at_ref).collect();
    let mut xs: BTreeSet<i64> = relevant.iter().map(|r| x_of(r)).collect();
    if xs.is_empty() {
        xs = match spec.axis {
            Axis::MaliciousPct => DEFAULT_PCTS.iter().map(|&p| pct_key(p)).collect(),
            Axis::FileBits => DEFAULT_SIZES.iter().map(|&b| b as i64).collect(),
        };
    }
    let show_x = |x: i64| match spec.axis {
        Axis::MaliciousPct => format!("{}", x as f64 / 1e6),
        Axis::FileBits => x.to_string(),
    };

    let mut missing = Vec::new();
    let mut table: Vec<(i64, Vec<(f64, f64, usize)>)> = Vec::new();
    for &x in &xs {
        let mut cells = Vec::new();
        for s in &spec.series {
            let vals: Vec<f64> = relevant
                .iter()
                .filter(|r| r.variant == s.variant && x_of(r) == x)
                .map(|r| (s.value)(r))
                .collect();
            if vals.is_empty() {
                let cell = format!("({}, {})", s.variant, show_x(x));
                if !missing.contains(&cell) {
                    missing.push(cell);
                }
            }
            cells.push(stats(&vals));
        }
        table.push((x, cells));
    }
    if !missing.is_empty() {
        return Err(FigureError {
            figure: spec.name.to_string(),
            missing,
        });
    }

    let mut out = String::new();
    let reference = match spec.axis {
        Axis::MaliciousPct => format!("file_bits={}", req.ref_file_bits),
        Axis::FileBits => format!("malicious_pct={}", req.ref_malicious_pct),
    };
    let _ = writeln!(out, "# {} ({})", spec.title, reference);
    let mut header = vec![match spec.axis {
        Axis::MaliciousPct => "malicious_pct".to_string(),
        Axis::FileBits => "file_bits".to_string(),
    }];
    for s in &spec.series {
        header.push(format!("{}_mean", s.label));
        header.push(format!("{}_std", s.label));
        header.push(format!("{}_n", s.label));
    }
    let _ = writeln!(out, "{}", header.join(" "));
    for (x, cells) in table {
        let mut line = show_x(x);
        for (m, sd, n) in cells {
            let _ = write!(line, " {m:.6} {sd:.6} {n}");
        }
        let _ = writeln!(out, "{line}");
    }
    Ok(out)
}

fn specs() -> Vec<Spec> {
    let per_variant = |value: fn(&ResultRow) -> f64| {
        TRUST_VARIANTS
            .iter()
            .map(|&v| Series {
                variant: v,
                label: v.name(),
                value,
            })
            .collect::<Vec<_>>()
    };
    vec![
        Spec {
            name: FIGURE_NAMES[0],
            title: "wasted sidelink capacity (%) vs malicious devices (%)",
            axis: Axis::MaliciousPct,
            series: per_variant(|r| r.wasted_capacity_pct),
        },
        Spec {
            name: FIGURE_NAMES[1],
            title: "mean non-corrupted received kbit vs malicious devices (%)",
            axis: Axis::MaliciousPct,
            series: per_variant(|r| r.mean_noncorrupted_kbits),
        },
        Spec {
            name: FIGURE_NAMES[2],
            title: "wasted energy fraction vs malicious devices (%)",
            axis: Axis::MaliciousPct,
            series: per_variant(|r| r.wasted_energy_frac),
        },
        Spec {
            name: FIGURE_NAMES[3],
            title: "security energy share (%) per role vs file size (bits), std2d",
            axis: Axis::FileBits,
            series: vec![
                Series {
                    variant: Variant::Std2d,
                    label: "relay",
                    value: |r| r.relay_sec_pct,
                },
                Series {
                    variant: Variant::Std2d,
                    label: "receiver",
                    value: |r| r.receiver_sec_pct,
                },
            ],
        },
        Spec {
            name: FIGURE_NAMES[4],
            title: "download energy per cell-edge device (J) vs file size (bits)",
            axis: Axis::FileBits,
            series: vec![
                Series {
                    variant: Variant::Std2d,
                    label: "std2d",
                    value: |r| r.download_energy_j,
                },
                Series {
                    variant: Variant::Unicast,
                    label: "unicast",
                    value: |r| r.download_energy_j,
                },
            ],
        },
    ]
}

/// Every figure, each either rendered or with its missing cells.
pub fn figure_files(
    rows: &[ResultRow],
    req: &FigureRequest,
) -> Vec<(&'static str, Result<String, FigureError>)> {
    specs()
        .iter()
        .map(|s| (s.name, render(rows, s, req)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(variant: Variant, pct: f64, bits: u64, seed: u64) -> ResultRow {
        ResultRow {
            seed,
            variant,
            malicious_pct: pct,
            file_bits: bits,
            wasted_capacity_pct: pct / 2.0,
            mean_noncorrupted_kbits: 100.0,
            wasted_energy_frac: 0.1,
            relay_sec_pct: 1.0,
            receiver_sec_pct: 2.0,
            download_energy_j: 0.5,
            fallback_flag: false,
        }
    }

    #[test]
    fn stats_sample_std() {
        let (m, sd, n) = stats(&[1.0, 3.0, f64::NAN]);
        assert_eq!((m, n), (2.0, 2));
        assert!((sd - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn missing_variant_listed() {
        let rows: Vec<ResultRow> = [0.0, 10.0]
            .into_iter()
            .flat_map(|p| [row(Variant::D2d, p, 500_000, 1), row(Variant::Std2d, p, 500_000, 1)])
            .collect();
        let figs = figure_files(&rows, &FigureRequest::default());
        let err = figs[0].1.clone().unwrap_err();
        assert_eq!(err.missing, vec!["(sd2d, 0)", "(sd2d, 10)"]);
    }

    #[test]
    fn means_aggregate_seeds() {
        let rows = vec![
            row(Variant::Std2d, 0.0, 5_000, 1),
            row(Variant::Std2d, 0.0, 5_000, 2),
            row(Variant::Unicast, 0.0, 5_000, 1),
        ];
        let figs = figure_files(&rows, &FigureRequest::default());
        let fig6 = figs[4].1.clone().unwrap();
        let data: Vec<&str> = fig6.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data[0], "file_bits std2d_mean std2d_std std2d_n unicast_mean unicast_std unicast_n");
        assert_eq!(data[1], "5000 0.500000 0.000000 2 0.500000 0.000000 1");
    }
}
