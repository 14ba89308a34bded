//! Altitude-banded holding stack.
//!
//! Holding aircraft are grouped into levels by fixed-width altitude bands.
//! Level 0 is the lowest. Each nonempty level is led by the member that comes
//! first in landing-queue order. The engine keeps the stack queue-monotone:
//! every member of level `k` precedes every member of level `k + 1` in the
//! queue, so the level-0 leader is always the first holder to land.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::AgentId;
use crate::queue::LandingQueue;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StackError {
    #[error("aircraft {id} at {altitude_ft} ft is outside the holding range")]
    AltitudeOutOfRange { id: AgentId, altitude_ft: u32 },
    #[error("aircraft {0} is not a level leader")]
    NotALeader(AgentId),
    #[error("aircraft {0} is not holding")]
    NotHolding(AgentId),
    #[error("aircraft {0} is already holding")]
    AlreadyHolding(AgentId),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelGroup {
    /// Members in landing-queue order.
    pub members: Vec<AgentId>,
    pub leader: Option<AgentId>,
}

impl LevelGroup {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn non_leaders(&self) -> impl Iterator<Item = &AgentId> {
        self.members
            .iter()
            .filter(move |m| Some(*m) != self.leader.as_ref())
    }
}

/// Position of `id` in queue order; unqueued ids sort after queued ones.
fn queue_key(queue: &LandingQueue, id: &AgentId) -> (usize, AgentId) {
    (queue.position(id).unwrap_or(usize::MAX), id.clone())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldingStack {
    levels: Vec<LevelGroup>,
    altitudes: BTreeMap<AgentId, u32>,
    base_altitude_ft: u32,
    band_width_ft: u32,
}

impl HoldingStack {
    pub fn new(base_altitude_ft: u32, band_width_ft: u32) -> Self {
        assert!(band_width_ft > 0, "band width must be positive");
        HoldingStack {
            levels: Vec::new(),
            altitudes: BTreeMap::new(),
            base_altitude_ft,
            band_width_ft,
        }
    }

    pub fn levels(&self) -> &[LevelGroup] {
        &self.levels
    }

    pub fn base_altitude_ft(&self) -> u32 {
        self.base_altitude_ft
    }

    pub fn band_width_ft(&self) -> u32 {
        self.band_width_ft
    }

    pub fn is_empty(&self) -> bool {
        self.altitudes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.altitudes.len()
    }

    pub fn contains(&self, id: &AgentId) -> bool {
        self.altitudes.contains_key(id)
    }

    pub fn altitude(&self, id: &AgentId) -> Option<u32> {
        self.altitudes.get(id).copied()
    }

    /// All holders with their altitudes, ordered by id.
    pub fn altitudes(&self) -> impl Iterator<Item = (&AgentId, u32)> {
        self.altitudes.iter().map(|(id, a)| (id, *a))
    }

    pub fn level_of(&self, id: &AgentId) -> Option<usize> {
        self.levels.iter().position(|l| l.members.contains(id))
    }

    pub fn is_leader(&self, id: &AgentId) -> bool {
        self.levels.iter().any(|l| l.leader.as_ref() == Some(id))
    }

    /// Leaders of nonempty levels, lowest level first.
    pub fn leaders(&self) -> impl Iterator<Item = &AgentId> {
        self.levels.iter().filter_map(|l| l.leader.as_ref())
    }

    fn band_floor(&self, level: usize) -> u32 {
        self.base_altitude_ft + level as u32 * self.band_width_ft
    }

    /// Altitude assigned to a holder placed in `level`: mid-band.
    pub fn level_altitude(&self, level: usize) -> u32 {
        self.band_floor(level) + self.band_width_ft / 2
    }

    fn reelect(level: &mut LevelGroup, queue: &LandingQueue) {
        level.members.sort_by_key(|m| queue_key(queue, m));
        level.leader = level.members.first().cloned();
    }

    fn trim(&mut self) {
        while self.levels.last().is_some_and(|l| l.is_empty()) {
            self.levels.pop();
        }
    }

    /// Remove `id` from its level. A level left empty is deleted and every
    /// level above it moves down one band.
    fn remove_member(&mut self, level_idx: usize, id: &AgentId, queue: &LandingQueue) {
        let level = &mut self.levels[level_idx];
        level.members.retain(|m| m != id);
        self.altitudes.remove(id);
        if level.members.is_empty() {
            self.levels.remove(level_idx);
            let band = self.band_width_ft;
            for upper in &self.levels[level_idx..] {
                for m in &upper.members {
                    if let Some(alt) = self.altitudes.get_mut(m) {
                        *alt -= band;
                    }
                }
            }
            self.trim();
        } else if level.leader.as_ref() == Some(id) {
            Self::reelect(level, queue);
        }
    }

    /// Remove any holder. Returns whether it was a leader.
    pub fn remove(&mut self, id: &AgentId, queue: &LandingQueue) -> Result<bool, StackError> {
        let level = self
            .level_of(id)
            .ok_or_else(|| StackError::NotHolding(id.clone()))?;
        let was_leader = self.levels[level].leader.as_ref() == Some(id);
        self.remove_member(level, id, queue);
        Ok(was_leader)
    }

    /// Place a new holder while keeping levels queue-monotone. It joins the
    /// lowest level holding someone queued behind it; otherwise the top level
    /// if that has room, else a fresh level above.
    ///
    /// Returns the assigned level and altitude.
    pub fn join(
        &mut self,
        id: AgentId,
        queue: &LandingQueue,
        slots_per_level: usize,
        ceiling_ft: u32,
    ) -> Result<(usize, u32), StackError> {
        if self.contains(&id) {
            return Err(StackError::AlreadyHolding(id));
        }
        let key = queue_key(queue, &id);
        let behind = self.levels.iter().position(|l| {
            l.members
                .iter()
                .map(|m| queue_key(queue, m))
                .max()
                .is_some_and(|max| max > key)
        });
        let level_idx = match behind {
            Some(idx) => idx,
            None => match self.levels.iter().rposition(|l| !l.is_empty()) {
                None => 0,
                Some(top) if self.levels[top].members.len() < slots_per_level => top,
                Some(top) => top + 1,
            },
        };
        let altitude = self.level_altitude(level_idx);
        if altitude >= ceiling_ft {
            return Err(StackError::AltitudeOutOfRange {
                id,
                altitude_ft: altitude,
            });
        }
        while self.levels.len() <= level_idx {
            self.levels.push(LevelGroup::default());
        }
        self.altitudes.insert(id.clone(), altitude);
        let level = &mut self.levels[level_idx];
        level.members.push(id);
        Self::reelect(level, queue);
        Ok((level_idx, altitude))
    }

    /// Re-place a holder after its queue position changed (for example after
    /// a priority re-sequence moved it to the queue head).
    pub fn reposition(
        &mut self,
        id: &AgentId,
        queue: &LandingQueue,
        slots_per_level: usize,
        ceiling_ft: u32,
    ) -> Result<(usize, u32), StackError> {
        self.remove(id, queue)?;
        self.join(id.clone(), queue, slots_per_level, ceiling_ft)
    }

    /// Re-derive every leader from queue order. Used after the queue is
    /// re-sequenced without any holder changing level.
    pub fn reelect_all(&mut self, queue: &LandingQueue) {
        for level in &mut self.levels {
            Self::reelect(level, queue);
        }
    }

    /// Check the structural invariants against `queue`.
    pub fn check(&self, queue: &LandingQueue) -> Result<(), String> {
        let mut seen = 0usize;
        for (i, level) in self.levels.iter().enumerate() {
            seen += level.members.len();
            if level.members.is_empty() {
                if level.leader.is_some() {
                    return Err(format!("empty level {i} has a leader"));
                }
                continue;
            }
            let expected = level.members.iter().min_by_key(|m| queue_key(queue, m));
            if level.leader.as_ref() != expected {
                return Err(format!(
                    "level {i} leader {:?} is not queue-earliest {:?}",
                    level.leader, expected
                ));
            }
            let lo = self.band_floor(i);
            for m in &level.members {
                match self.altitudes.get(m) {
                    Some(&a) if a >= lo && a < lo + self.band_width_ft => {}
                    other => {
                        return Err(format!("holder {m} at {other:?} ft does not belong to level {i}"))
                    }
                }
            }
        }
        if seen != self.altitudes.len() {
            return Err(format!(
                "level membership covers {seen} holders, altitude table has {}",
                self.altitudes.len()
            ));
        }
        if let Some(l0) = self.levels.first().and_then(|l| l.leader.as_ref()) {
            let first = self.altitudes.keys().min_by_key(|m| queue_key(queue, m));
            if Some(l0) != first {
                return Err(format!(
                    "level-0 leader {l0} is not the first holder in queue order ({first:?})"
                ));
            }
        }
        Ok(())
    }
}

/// Group holding aircraft into altitude bands. Aircraft at altitude `a` land
/// in level `(a - base) / band`; each level's leader is its queue-earliest member.
pub fn group_levels(
    holding: &[(AgentId, u32)],
    queue: &LandingQueue,
    band_width_ft: u32,
    base_altitude_ft: u32,
    ceiling_ft: u32,
) -> Result<HoldingStack, StackError> {
    let mut stack = HoldingStack::new(base_altitude_ft, band_width_ft);
    for (id, alt) in holding {
        if *alt < base_altitude_ft || *alt >= ceiling_ft {
            return Err(StackError::AltitudeOutOfRange {
                id: id.clone(),
                altitude_ft: *alt,
            });
        }
        let level = ((alt - base_altitude_ft) / band_width_ft) as usize;
        while stack.levels.len() <= level {
            stack.levels.push(LevelGroup::default());
        }
        stack.levels[level].members.push(id.clone());
        stack.altitudes.insert(id.clone(), *alt);
    }
    for level in &mut stack.levels {
        HoldingStack::reelect(level, queue);
    }
    Ok(stack)
}

/// Pass leadership on when a leader leaves holding. The next member in queue
/// order takes over its level; if the level empties, all higher levels move
/// down one band.
pub fn handover_leadership(
    stack: &HoldingStack,
    departing: &AgentId,
    queue: &LandingQueue,
) -> Result<HoldingStack, StackError> {
    let level = stack
        .levels
        .iter()
        .position(|l| l.leader.as_ref() == Some(departing))
        .ok_or_else(|| StackError::NotALeader(departing.clone()))?;
    let mut next = stack.clone();
    next.remove_member(level, departing, queue);
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn queue_of(names: &[&str]) -> LandingQueue {
        let mut q = LandingQueue::new(32);
        for n in names {
            q.admit(AgentId::new(*n)).unwrap();
        }
        q
    }

    fn pairs(v: &[(&str, u32)]) -> Vec<(AgentId, u32)> {
        v.iter().map(|(n, a)| (AgentId::new(*n), *a)).collect()
    }

    fn level_names(s: &HoldingStack, i: usize) -> Vec<&str> {
        s.levels()[i].members.iter().map(|m| m.as_str()).collect()
    }

    #[test]
    fn same_band_forms_one_level_led_by_queue_earlier() {
        let q = queue_of(&["B", "A"]);
        let s = group_levels(&pairs(&[("A", 7100), ("B", 7900)]), &q, 1000, 7000, 18000).unwrap();
        assert_eq!(s.levels().len(), 1);
        assert_eq!(s.levels()[0].members.len(), 2);
        assert_eq!(s.levels()[0].leader, Some("B".into()));
    }

    #[test]
    fn three_bands_form_three_levels() {
        let q = queue_of(&["A", "B", "C"]);
        let s = group_levels(
            &pairs(&[("A", 7100), ("B", 8200), ("C", 9500)]),
            &q,
            1000,
            7000,
            18000,
        )
        .unwrap();
        assert_eq!(s.levels().len(), 3);
        for (i, n) in ["A", "B", "C"].iter().enumerate() {
            assert_eq!(s.levels()[i].leader, Some((*n).into()));
        }
    }

    #[test]
    fn out_of_range_altitudes_rejected() {
        let q = queue_of(&["A"]);
        assert!(matches!(
            group_levels(&pairs(&[("A", 6999)]), &q, 1000, 7000, 18000),
            Err(StackError::AltitudeOutOfRange { .. })
        ));
        assert!(matches!(
            group_levels(&pairs(&[("A", 18000)]), &q, 1000, 7000, 18000),
            Err(StackError::AltitudeOutOfRange { .. })
        ));
    }

    #[test]
    fn next_in_line_takes_over() {
        let q = queue_of(&["L", "M", "N"]);
        let s = group_levels(
            &pairs(&[("L", 7100), ("M", 7200), ("N", 7300)]),
            &q,
            1000,
            7000,
            18000,
        )
        .unwrap();
        let s = handover_leadership(&s, &"L".into(), &q).unwrap();
        assert_eq!(s.levels()[0].leader, Some("M".into()));
        assert_eq!(level_names(&s, 0), ["M", "N"]);
    }

    #[test]
    fn emptied_level_shifts_upper_levels_down() {
        let q = queue_of(&["L", "P", "Q", "R"]);
        let s = group_levels(
            &pairs(&[("L", 7500), ("P", 8500), ("Q", 8600), ("R", 9500)]),
            &q,
            1000,
            7000,
            18000,
        )
        .unwrap();
        let s = handover_leadership(&s, &"L".into(), &q).unwrap();
        assert_eq!(s.levels().len(), 2);
        assert_eq!(level_names(&s, 0), ["P", "Q"]);
        assert_eq!(s.levels()[0].leader, Some("P".into()));
        assert_eq!(s.altitude(&"P".into()), Some(7500));
        assert_eq!(s.altitude(&"R".into()), Some(8500));
        s.check(&q).unwrap();
    }

    #[test]
    fn sole_holder_departing_empties_stack() {
        let q = queue_of(&["L"]);
        let s = group_levels(&pairs(&[("L", 7500)]), &q, 1000, 7000, 18000).unwrap();
        let s = handover_leadership(&s, &"L".into(), &q).unwrap();
        assert!(s.is_empty());
        assert!(s.levels().is_empty());
        assert_eq!(s.leaders().count(), 0);
    }

    #[test]
    fn handover_by_non_leader_is_rejected() {
        let q = queue_of(&["L", "M"]);
        let s = group_levels(&pairs(&[("L", 7100), ("M", 7200)]), &q, 1000, 7000, 18000).unwrap();
        assert_eq!(
            handover_leadership(&s, &"M".into(), &q),
            Err(StackError::NotALeader("M".into()))
        );
    }

    #[test]
    fn join_fills_top_level_then_opens_next() {
        let q = queue_of(&["A", "B", "C"]);
        let mut s = HoldingStack::new(7000, 1000);
        assert_eq!(s.join("A".into(), &q, 2, 18000).unwrap(), (0, 7500));
        assert_eq!(s.join("B".into(), &q, 2, 18000).unwrap(), (0, 7500));
        assert_eq!(s.join("C".into(), &q, 2, 18000).unwrap(), (1, 8500));
        s.check(&q).unwrap();
    }

    #[test]
    fn join_keeps_levels_queue_monotone() {
        // B re-enters holding late but is queued ahead of C.
        let q = queue_of(&["A", "B", "C", "D"]);
        let mut s = HoldingStack::new(7000, 1000);
        s.join("A".into(), &q, 1, 18000).unwrap();
        s.join("C".into(), &q, 1, 18000).unwrap();
        s.join("D".into(), &q, 1, 18000).unwrap();
        let (lvl, _) = s.join("B".into(), &q, 1, 18000).unwrap();
        assert_eq!(lvl, 1);
        assert_eq!(s.levels()[1].leader, Some("B".into()));
        s.check(&q).unwrap();
    }

    #[test]
    fn reposition_after_promotion_moves_to_level_zero() {
        let mut q = queue_of(&["A", "B", "C"]);
        let mut s = HoldingStack::new(7000, 1000);
        for n in ["A", "B", "C"] {
            s.join(n.into(), &q, 1, 18000).unwrap();
        }
        q.promote(&"C".into()).unwrap();
        let (lvl, alt) = s.reposition(&"C".into(), &q, 1, 18000).unwrap();
        assert_eq!((lvl, alt), (0, 7500));
        assert_eq!(s.levels()[0].leader, Some("C".into()));
        s.check(&q).unwrap();
    }

    #[test]
    fn join_above_ceiling_fails() {
        let q = queue_of(&["A", "B"]);
        let mut s = HoldingStack::new(7000, 1000);
        s.join("A".into(), &q, 1, 8000).unwrap();
        assert!(matches!(
            s.join("B".into(), &q, 1, 8000),
            Err(StackError::AltitudeOutOfRange { .. })
        ));
    }
}
