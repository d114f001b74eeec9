//! Message trace: one record per delivered message.
//!
//! CSV columns: `time_tti,source,destination,variant,size_bits`. Endpoints are
//! `henb` or `dev<N>`; `variant` is the message name (`Page`, `RachReport`,
//! ...); `size_bits` is the full on-air size.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::message::MessageKind;
use super::phase::sub_procedure_of;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time_tti: u64,
    pub source: String,
    pub destination: String,
    pub variant: String,
    pub size_bits: u64,
}

pub fn write_csv<W: Write>(records: &[TraceRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(["time_tti", "source", "destination", "variant", "size_bits"])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> csv::Result<Vec<TraceRecord>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConformanceIssue {
    pub row: usize,
    pub message: String,
}

/// Checks a trace without simulator state: times never go backwards, every
/// variant is known, no public-key-bearing message travels device to device,
/// and each device sees sub-procedures in non-decreasing order.
pub fn check_conformance(records: &[TraceRecord]) -> Vec<ConformanceIssue> {
    let mut issues = Vec::new();
    let mut last_time = 0u64;
    let mut progress: BTreeMap<&str, u8> = BTreeMap::new();
    for (row, r) in records.iter().enumerate() {
        if r.time_tti < last_time {
            issues.push(ConformanceIssue {
                row,
                message: format!("time {} before {}", r.time_tti, last_time),
            });
        }
        last_time = last_time.max(r.time_tti);
        let Some(kind) = MessageKind::from_name(&r.variant) else {
            issues.push(ConformanceIssue {
                row,
                message: format!("unknown variant {:?}", r.variant),
            });
            continue;
        };
        let d2d = r.source != "henb" && r.destination != "henb";
        if d2d != (kind == MessageKind::SidelinkData) {
            issues.push(ConformanceIssue {
                row,
                message: format!("{} from {} to {}", r.variant, r.source, r.destination),
            });
        }
        let rank = sub_procedure_of(kind).rank();
        for end in [&r.source, &r.destination] {
            if end == "henb" {
                continue;
            }
            let p = progress.entry(end.as_str()).or_insert(0);
            if rank < *p {
                issues.push(ConformanceIssue {
                    row,
                    message: format!("{end} saw {} after a later sub-procedure", r.variant),
                });
            }
            *p = (*p).max(rank);
        }
    }
    issues
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: u64, s: &str, d: &str, v: &str) -> TraceRecord {
        TraceRecord {
            time_tti: t,
            source: s.into(),
            destination: d.into(),
            variant: v.into(),
            size_bits: 8,
        }
    }

    #[test]
    fn csv_roundtrip() {
        let rows = vec![rec(1, "henb", "dev1", "Page"), rec(3, "dev1", "henb", "RachReport")];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time_tti,source,destination,variant,size_bits\n"));
        assert_eq!(read_csv(&buf[..]).unwrap(), rows);
        let mut empty = Vec::new();
        write_csv(&[], &mut empty).unwrap();
        assert_eq!(read_csv(&empty[..]).unwrap(), vec![]);
    }

    #[test]
    fn conformance_flags_disorder() {
        let good = vec![
            rec(1, "henb", "dev1", "Page"),
            rec(3, "dev1", "henb", "RachReport"),
            rec(90, "henb", "dev1", "MulticastData"),
            rec(120, "dev1", "dev2", "SidelinkData"),
        ];
        assert!(check_conformance(&good).is_empty());
        let mut bad = good.clone();
        bad.push(rec(130, "dev1", "henb", "RachReport"));
        bad.push(rec(131, "dev1", "dev2", "PublicKeyResponse"));
        bad.push(rec(100, "henb", "dev3", "Bogus"));
        assert_eq!(check_conformance(&bad).len(), 4);
    }
}
