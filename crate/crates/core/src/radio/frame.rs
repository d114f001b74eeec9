use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RadioError;
use crate::ids::Tti;

pub const SUBFRAMES_PER_FRAME: usize = 10;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Downlink,
    Uplink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SubframeKind {
    Downlink,
    Special,
    Uplink,
}

impl SubframeKind {
    fn letter(self) -> char {
        match self {
            SubframeKind::Downlink => 'D',
            SubframeKind::Special => 'S',
            SubframeKind::Uplink => 'U',
        }
    }
}

/// TDD subframe layout. Uplink subframes carry sidelink traffic; the special
/// subframe carries downlink at a reduced capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FrameConfigRepr", into = "FrameConfigRepr")]
pub struct FrameConfig {
    pattern: [SubframeKind; SUBFRAMES_PER_FRAME],
    special_capacity: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameConfigRepr {
    #[serde(default = "default_pattern")]
    pattern: String,
    #[serde(default = "default_special")]
    special_capacity: f64,
}

fn default_pattern() -> String {
    "DSUUUDDDDD".into()
}

fn default_special() -> f64 {
    0.5
}

impl TryFrom<FrameConfigRepr> for FrameConfig {
    type Error = RadioError;

    fn try_from(r: FrameConfigRepr) -> Result<Self, Self::Error> {
        FrameConfig::new(&r.pattern, r.special_capacity)
    }
}

impl From<FrameConfig> for FrameConfigRepr {
    fn from(f: FrameConfig) -> Self {
        Self {
            pattern: f.pattern_string(),
            special_capacity: f.special_capacity,
        }
    }
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self::tdd_config3()
    }
}

impl FromStr for FrameConfig {
    type Err = RadioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s, default_special())
    }
}

impl fmt::Display for FrameConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pattern_string())
    }
}

impl FrameConfig {
    pub fn tdd_config3() -> Self {
        Self::new("DSUUUDDDDD", 0.5).expect("static pattern")
    }

    pub fn new(pattern: &str, special_capacity: f64) -> Result<Self, RadioError> {
        let kinds: Vec<SubframeKind> = pattern
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '-')
            .map(|c| match c.to_ascii_uppercase() {
                'D' => Ok(SubframeKind::Downlink),
                'S' => Ok(SubframeKind::Special),
                'U' => Ok(SubframeKind::Uplink),
                other => Err(RadioError::Frame(format!("unknown subframe letter {other:?}"))),
            })
            .collect::<Result<_, _>>()?;
        let pattern: [SubframeKind; SUBFRAMES_PER_FRAME] = kinds
            .try_into()
            .map_err(|v: Vec<_>| RadioError::Frame(format!("pattern has {} subframes, need 10", v.len())))?;
        if !(0.0..=1.0).contains(&special_capacity) {
            return Err(RadioError::Frame(format!(
                "special_capacity {special_capacity} outside [0,1]"
            )));
        }
        let f = Self {
            pattern,
            special_capacity,
        };
        for dir in [Direction::Downlink, Direction::Uplink] {
            if f.frame_capacity(dir) <= 0.0 {
                return Err(RadioError::Frame(format!("pattern has no {dir:?} capacity")));
            }
        }
        Ok(f)
    }

    pub fn pattern(&self) -> &[SubframeKind; SUBFRAMES_PER_FRAME] {
        &self.pattern
    }

    pub fn pattern_string(&self) -> String {
        self.pattern.iter().map(|k| k.letter()).collect()
    }

    pub fn special_capacity(&self) -> f64 {
        self.special_capacity
    }

    pub fn kind_at(&self, t: Tti) -> SubframeKind {
        self.pattern[(t.0 % SUBFRAMES_PER_FRAME as u64) as usize]
    }

    /// Fraction of a full TTI usable in direction `dir` at subframe `idx`.
    pub fn capacity(&self, idx: usize, dir: Direction) -> f64 {
        match (self.pattern[idx % SUBFRAMES_PER_FRAME], dir) {
            (SubframeKind::Downlink, Direction::Downlink) => 1.0,
            (SubframeKind::Special, Direction::Downlink) => self.special_capacity,
            (SubframeKind::Uplink, Direction::Uplink) => 1.0,
            _ => 0.0,
        }
    }

    pub fn frame_capacity(&self, dir: Direction) -> f64 {
        (0..SUBFRAMES_PER_FRAME).map(|i| self.capacity(i, dir)).sum()
    }

    pub fn subframes(&self, dir: Direction) -> Vec<usize> {
        (0..SUBFRAMES_PER_FRAME)
            .filter(|&i| self.capacity(i, dir) > 0.0)
            .collect()
    }

    /// TTIs elapsed from a frame start until `bits` have been carried.
    pub fn airtime(&self, bits: u64, rate: f64, dir: Direction) -> Result<u64, RadioError> {
        self.airtime_from(bits, rate, dir, Tti::ZERO)
    }

    /// TTIs elapsed from `start` until `bits` have been carried at `rate`
    /// bits/s, counting capacity only in subframes of direction `dir`.
    pub fn airtime_from(
        &self,
        bits: u64,
        rate: f64,
        dir: Direction,
        start: Tti,
    ) -> Result<u64, RadioError> {
        if bits == 0 {
            return Ok(0);
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(RadioError::Unreachable);
        }
        Ok(self.units_airtime(bits as f64 / (rate / 1000.0), dir, start))
    }

    /// Like `airtime_from` with the demand given in full-TTI units.
    pub(crate) fn units_airtime(&self, mut need: f64, dir: Direction, start: Tti) -> u64 {
        let mut t = start.0;
        let tol = EPS * need.max(1.0);
        while !t.is_multiple_of(SUBFRAMES_PER_FRAME as u64) {
            need -= self.capacity(t as usize % SUBFRAMES_PER_FRAME, dir);
            t += 1;
            if need <= tol {
                return t - start.0;
            }
        }
        let per_frame = self.frame_capacity(dir);
        let frames = ((need - tol) / per_frame).floor().max(0.0);
        need -= frames * per_frame;
        t += frames as u64 * SUBFRAMES_PER_FRAME as u64;
        loop {
            need -= self.capacity(t as usize % SUBFRAMES_PER_FRAME, dir);
            t += 1;
            if need <= tol {
                return t - start.0;
            }
        }
    }

    /// Per-TTI bits of a transmission starting at `start`, one item for every
    /// TTI up to and including the last one carrying data.
    pub fn occupancy(&self, bits: u64, rate: f64, dir: Direction, start: Tti) -> Occupancy<'_> {
        Occupancy {
            frame: self,
            dir,
            per_tti: rate / 1000.0,
            remaining: bits as f64,
            t: start.0,
        }
    }
}

pub struct Occupancy<'a> {
    frame: &'a FrameConfig,
    dir: Direction,
    per_tti: f64,
    remaining: f64,
    t: u64,
}

impl Iterator for Occupancy<'_> {
    type Item = (Tti, f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining <= EPS * self.remaining.max(1.0) || self.per_tti <= 0.0 {
            return None;
        }
        let cap = self.frame.capacity(self.t as usize % SUBFRAMES_PER_FRAME, self.dir) * self.per_tti;
        let carried = cap.min(self.remaining);
        self.remaining -= carried;
        if self.remaining <= EPS * (self.per_tti).max(1.0) {
            self.remaining = 0.0;
        }
        let t = Tti(self.t);
        self.t += 1;
        Some((t, carried))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config3_layout() {
        let f = FrameConfig::tdd_config3();
        assert_eq!(f.to_string(), "DSUUUDDDDD");
        assert_eq!(f.subframes(Direction::Uplink), vec![2, 3, 4]);
        assert_eq!(f.frame_capacity(Direction::Downlink), 6.5);
        assert_eq!(f.frame_capacity(Direction::Uplink), 3.0);
    }

    #[test]
    fn airtime_examples() {
        let f = FrameConfig::tdd_config3();
        assert_eq!(f.airtime(0, 1000.0, Direction::Downlink).unwrap(), 0);
        assert_eq!(f.airtime(1, 1000.0, Direction::Downlink).unwrap(), 1);
        let three = f.airtime(3, 1000.0, Direction::Uplink).unwrap();
        assert_eq!(three, 5);
        assert!(three <= 10);
        assert_eq!(f.airtime(4, 1000.0, Direction::Uplink).unwrap(), 13);
        assert!(matches!(
            f.airtime(4, 0.0, Direction::Uplink),
            Err(RadioError::Unreachable)
        ));
    }

    #[test]
    fn special_subframe_half() {
        let f = FrameConfig::tdd_config3();
        // D carries 1, S carries 0.5, then U U U, then D.
        assert_eq!(f.airtime(1500, 1_000_000.0, Direction::Downlink).unwrap(), 2);
        assert_eq!(f.airtime(1501, 1_000_000.0, Direction::Downlink).unwrap(), 6);
    }

    #[test]
    fn bad_patterns() {
        assert!(FrameConfig::new("DSUUUDDDD", 0.5).is_err());
        assert!(FrameConfig::new("DDDDDDDDDD", 0.5).is_err());
        assert!(FrameConfig::new("DSUUUDDDDX", 0.5).is_err());
        assert!(FrameConfig::new("DSUUUDDDDD", 1.5).is_err());
        assert!("D-S-U-U-U-D-D-D-D-D".parse::<FrameConfig>().is_ok());
    }

    #[test]
    fn occupancy_agrees_with_airtime() {
        let f = FrameConfig::tdd_config3();
        for bits in [1u64, 999, 1000, 1001, 12_345, 77_777] {
            for start in [0u64, 3, 7, 19] {
                for dir in [Direction::Downlink, Direction::Uplink] {
                    let occ: Vec<_> = f.occupancy(bits, 1000.0, dir, Tti(start)).collect();
                    let total: f64 = occ.iter().map(|(_, b)| b).sum();
                    assert!((total - bits as f64).abs() < 1e-6);
                    let last = occ.iter().rev().find(|(_, b)| *b > 0.0).unwrap().0;
                    assert_eq!(
                        last.0 + 1 - start,
                        f.airtime_from(bits, 1000.0, dir, Tti(start)).unwrap()
                    );
                }
            }
        }
    }
}
