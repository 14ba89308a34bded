//! The shared landing queue with a bounded buffer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::AgentId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueueError {
    #[error("landing queue buffer full ({capacity} slots)")]
    BufferFull { capacity: usize },
    #[error("aircraft {0} already queued")]
    DuplicateId(AgentId),
    #[error("aircraft {0} not in queue")]
    NotFound(AgentId),
}

/// A single queue mutation; replicas replay these by version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", content = "id", rename_all = "snake_case")]
pub enum QueueOp {
    Admit(AgentId),
    Remove(AgentId),
    Promote(AgentId),
}

impl QueueOp {
    pub fn target(&self) -> &AgentId {
        match self {
            QueueOp::Admit(id) | QueueOp::Remove(id) | QueueOp::Promote(id) => id,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            QueueOp::Admit(_) => "admit",
            QueueOp::Remove(_) => "remove",
            QueueOp::Promote(_) => "promote",
        }
    }
}

/// Ordered landing queue. Every successful mutation bumps `version`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LandingQueue {
    entries: Vec<AgentId>,
    capacity: usize,
    version: u64,
}

impl LandingQueue {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        LandingQueue {
            entries: Vec::new(),
            capacity,
            version: 0,
        }
    }

    pub fn entries(&self) -> &[AgentId] {
        &self.entries
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn head(&self) -> Option<&AgentId> {
        self.entries.first()
    }

    pub fn contains(&self, id: &AgentId) -> bool {
        self.entries.contains(id)
    }

    /// Zero-based position of `id`.
    pub fn position(&self, id: &AgentId) -> Option<usize> {
        self.entries.iter().position(|e| e == id)
    }

    /// Append `id` at the tail.
    pub fn admit(&mut self, id: AgentId) -> Result<(), QueueError> {
        if self.contains(&id) {
            return Err(QueueError::DuplicateId(id));
        }
        if self.entries.len() >= self.capacity {
            return Err(QueueError::BufferFull {
                capacity: self.capacity,
            });
        }
        self.entries.push(id);
        self.version += 1;
        Ok(())
    }

    /// Remove `id`, preserving the order of the others.
    pub fn remove(&mut self, id: &AgentId) -> Result<(), QueueError> {
        let pos = self
            .position(id)
            .ok_or_else(|| QueueError::NotFound(id.clone()))?;
        self.entries.remove(pos);
        self.version += 1;
        Ok(())
    }

    /// Move `id` to the head; everyone previously ahead of it slides back one slot.
    pub fn promote(&mut self, id: &AgentId) -> Result<(), QueueError> {
        let pos = self
            .position(id)
            .ok_or_else(|| QueueError::NotFound(id.clone()))?;
        let entry = self.entries.remove(pos);
        self.entries.insert(0, entry);
        self.version += 1;
        Ok(())
    }

    pub fn apply(&mut self, op: &QueueOp) -> Result<(), QueueError> {
        match op {
            QueueOp::Admit(id) => self.admit(id.clone()),
            QueueOp::Remove(id) => self.remove(id),
            QueueOp::Promote(id) => self.promote(id),
        }
    }

    /// Overwrite this replica with a newer snapshot. Older or equal versions are ignored.
    /// Returns whether the replica changed.
    pub fn adopt(&mut self, entries: &[AgentId], version: u64) -> bool {
        if version <= self.version {
            return false;
        }
        self.entries = entries.to_vec();
        self.version = version;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(q: &LandingQueue) -> Vec<&str> {
        q.entries().iter().map(|e| e.as_str()).collect()
    }

    fn queue_of(names: &[&str]) -> LandingQueue {
        let mut q = LandingQueue::new(12);
        for n in names {
            q.admit(AgentId::new(*n)).unwrap();
        }
        q
    }

    #[test]
    fn admit_to_empty_queue() {
        let mut q = LandingQueue::new(12);
        let v0 = q.version();
        q.admit("AC1".into()).unwrap();
        assert_eq!(ids(&q), ["AC1"]);
        assert_eq!(q.version(), v0 + 1);
    }

    #[test]
    fn admit_to_full_queue_fails() {
        let mut q = LandingQueue::new(2);
        q.admit("A".into()).unwrap();
        q.admit("B".into()).unwrap();
        let v = q.version();
        assert_eq!(
            q.admit("C".into()),
            Err(QueueError::BufferFull { capacity: 2 })
        );
        assert_eq!(q.version(), v);
    }

    #[test]
    fn admit_duplicate_fails() {
        let mut q = queue_of(&["A"]);
        assert_eq!(q.admit("A".into()), Err(QueueError::DuplicateId("A".into())));
    }

    #[test]
    fn twelve_sequential_admits_fill_buffer_with_rising_versions() {
        let mut q = LandingQueue::new(12);
        let mut last = q.version();
        for i in 0..12 {
            q.admit(AgentId::new(format!("AC{i:02}"))).unwrap();
            assert!(q.version() > last);
            last = q.version();
        }
        assert_eq!(q.len(), 12);
        assert!(q.admit("AC12".into()).is_err());
    }

    #[test]
    fn remove_head_and_middle() {
        let mut q = queue_of(&["A", "B", "C"]);
        q.remove(&"A".into()).unwrap();
        assert_eq!(ids(&q), ["B", "C"]);

        let mut q = queue_of(&["A", "B", "C"]);
        q.remove(&"B".into()).unwrap();
        assert_eq!(ids(&q), ["A", "C"]);
    }

    #[test]
    fn remove_missing_is_not_found() {
        let mut q = queue_of(&["A"]);
        assert_eq!(q.remove(&"Z".into()), Err(QueueError::NotFound("Z".into())));
    }

    #[test]
    fn remove_then_admit_goes_to_tail() {
        let mut q = queue_of(&["A", "B", "C"]);
        q.remove(&"A".into()).unwrap();
        q.admit("A".into()).unwrap();
        assert_eq!(ids(&q), ["B", "C", "A"]);
    }

    #[test]
    fn promote_shifts_earlier_entries_back() {
        let mut q = queue_of(&["A", "B", "C", "D", "E", "F"]);
        q.promote(&"E".into()).unwrap();
        assert_eq!(ids(&q), ["E", "A", "B", "C", "D", "F"]);
    }

    #[test]
    fn adopt_ignores_stale_versions() {
        let mut replica = queue_of(&["A", "B"]);
        let stale = replica.version() - 1;
        assert!(!replica.adopt(&["X".into()], stale));
        assert_eq!(ids(&replica), ["A", "B"]);
        assert!(replica.adopt(&["X".into()], 10));
        assert_eq!(replica.version(), 10);
    }
}
