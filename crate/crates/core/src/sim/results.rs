use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::protocol::Variant;

/// One row of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub variant: Variant,
    pub malicious_pct: f64,
    pub file_bits: u64,
    pub wasted_capacity_pct: f64,
    pub mean_noncorrupted_kbits: f64,
    pub wasted_energy_frac: f64,
    pub relay_sec_pct: f64,
    pub receiver_sec_pct: f64,
    pub download_energy_j: f64,
    pub fallback_flag: bool,
}

pub const RESULT_COLUMNS: [&str; 11] = [
    "seed",
    "variant",
    "malicious_pct",
    "file_bits",
    "wasted_capacity_pct",
    "mean_noncorrupted_kbits",
    "wasted_energy_frac",
    "relay_sec_pct",
    "receiver_sec_pct",
    "download_energy_j",
    "fallback_flag",
];

pub fn write_results<W: Write>(rows: &[ResultRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(RESULT_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(input: R) -> csv::Result<Vec<ResultRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn results_to_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_results(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ResultRow {
        ResultRow {
            seed: 3,
            variant: Variant::Std2d,
            malicious_pct: 60.0,
            file_bits: 500_000,
            wasted_capacity_pct: 1.5,
            mean_noncorrupted_kbits: 498.2,
            wasted_energy_frac: 0.31,
            relay_sec_pct: 4.0,
            receiver_sec_pct: 40.0,
            download_energy_j: 0.02,
            fallback_flag: false,
        }
    }

    #[test]
    fn header_matches_columns() {
        let text = results_to_string(&[row()]);
        assert_eq!(text.lines().next().unwrap(), RESULT_COLUMNS.join(","));
        assert!(text.lines().nth(1).unwrap().starts_with("3,std2d,60.0,500000,"));
        assert_eq!(results_to_string(&[]).trim_end(), RESULT_COLUMNS.join(","));
    }

    #[test]
    fn roundtrip() {
        let text = results_to_string(&[row(), row()]);
        assert_eq!(read_results(text.as_bytes()).unwrap(), vec![row(), row()]);
    }
}
