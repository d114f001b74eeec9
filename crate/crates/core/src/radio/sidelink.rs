use std::collections::BTreeMap;

use super::frame::{Direction, FrameConfig, SUBFRAMES_PER_FRAME};
use super::rates::{d2d_rate, SpectralTable};
use super::RadioError;
use crate::ids::Tti;

const FRAME: u64 = SUBFRAMES_PER_FRAME as u64;

#[derive(Debug, Clone)]
struct Transfer {
    id: u64,
    cqi: u8,
    remaining: f64,
}

/// Fluid model of the inband sidelink: at every frame the RB pool is split
/// evenly (floor division) across active transfers and data moves only in
/// uplink subframes. When more transfers than RBs are active, the oldest
/// ones get one RB each and the rest wait.
#[derive(Debug, Clone)]
pub struct SidelinkScheduler {
    frame: FrameConfig,
    table: SpectralTable,
    total_rbs: u32,
    clock: u64,
    active: Vec<Transfer>,
    planned: BTreeMap<u64, Tti>,
}

impl SidelinkScheduler {
    pub fn new(frame: FrameConfig, table: SpectralTable, total_rbs: u32) -> Self {
        Self {
            frame,
            table,
            total_rbs,
            clock: 0,
            active: Vec::new(),
            planned: BTreeMap::new(),
        }
    }

    pub fn active_len(&self) -> usize {
        self.active.len()
    }

    /// Queue `bits` for transfer `id`; it joins the allocation at the next
    /// frame boundary. Returns the refreshed completion plan.
    pub fn add(&mut self, now: Tti, id: u64, cqi: u8, bits: u64) -> Result<&BTreeMap<u64, Tti>, RadioError> {
        if d2d_rate(cqi, 1, &self.table)? <= 0.0 {
            return Err(RadioError::Unreachable);
        }
        let boundary = now.next_frame_boundary().0.max(self.clock);
        let mut active = std::mem::take(&mut self.active);
        self.run(&mut active, self.clock, Some(boundary), &mut |_, _| {});
        self.clock = boundary;
        if bits == 0 {
            self.planned.insert(id, Tti(boundary));
        } else {
            active.push(Transfer {
                id,
                cqi,
                remaining: bits as f64,
            });
        }
        self.active = active;
        self.replan();
        Ok(&self.planned)
    }

    /// Completion instant of every transfer added so far, assuming no
    /// further arrivals.
    pub fn plan(&self) -> &BTreeMap<u64, Tti> {
        &self.planned
    }

    pub fn completion(&self, id: u64) -> Option<Tti> {
        self.planned.get(&id).copied()
    }

    /// RBs each active transfer holds in the current frame.
    pub fn rbs_per_transfer(&self) -> u32 {
        share(self.total_rbs, self.active.len())
    }

    fn replan(&mut self) {
        let mut active = self.active.clone();
        let mut planned = std::mem::take(&mut self.planned);
        self.run(&mut active, self.clock, None, &mut |id, t| {
            planned.insert(id, t);
        });
        self.planned = planned;
    }

    fn per_tti(&self, cqi: u8, rbs: u32) -> f64 {
        d2d_rate(cqi, rbs, &self.table).unwrap_or(0.0) / 1000.0
    }

    fn run(
        &self,
        active: &mut Vec<Transfer>,
        mut t: u64,
        until: Option<u64>,
        done: &mut dyn FnMut(u64, Tti),
    ) {
        let ul_per_frame = self.frame.frame_capacity(Direction::Uplink);
        while !active.is_empty() && until.is_none_or(|u| t < u) {
            let served = active.len().min(self.total_rbs as usize);
            let rbs = share(self.total_rbs, active.len());
            let rates: Vec<f64> = active[..served].iter().map(|tr| self.per_tti(tr.cqi, rbs)).collect();
            let skip = active[..served]
                .iter()
                .zip(&rates)
                .map(|(tr, r)| {
                    let frame_bits = r * ul_per_frame;
                    ((tr.remaining - tol(tr.remaining)) / frame_bits).floor().max(0.0) as u64
                })
                .min()
                .unwrap_or(0);
            let skip = match until {
                Some(u) => skip.min((u - t) / FRAME),
                None => skip,
            };
            if skip > 0 {
                for (tr, r) in active[..served].iter_mut().zip(&rates) {
                    tr.remaining -= skip as f64 * r * ul_per_frame;
                }
                t += skip * FRAME;
                continue;
            }
            let mut finished = vec![false; active.len()];
            for sf in 0..SUBFRAMES_PER_FRAME {
                let cap = self.frame.capacity(sf, Direction::Uplink);
                if cap == 0.0 {
                    continue;
                }
                for (i, (tr, r)) in active[..served].iter_mut().zip(&rates).enumerate() {
                    if finished[i] {
                        continue;
                    }
                    tr.remaining -= cap * r;
                    if tr.remaining <= tol(cap * r) {
                        finished[i] = true;
                        done(tr.id, Tti(t + sf as u64 + 1));
                    }
                }
            }
            let mut i = 0;
            active.retain(|_| {
                let keep = !finished[i];
                i += 1;
                keep
            });
            t += FRAME;
        }
    }
}

fn share(total: u32, n: usize) -> u32 {
    match n {
        0 => total,
        n if n > total as usize => 1,
        n => total / n as u32,
    }
}

fn tol(scale: f64) -> f64 {
    1e-9 * scale.abs().max(1.0)
}
