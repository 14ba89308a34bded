//! Leader system: level leaders plus departures on the runway.
//!
//! Information that concerns the whole stack travels from its origin to the
//! level leaders, and each leader passes it on inside its own level. Nobody
//! talks to everybody.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::ids::AgentId;
use crate::stack::HoldingStack;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelayError {
    #[error("{0} is not a leader-system member")]
    NotAMember(AgentId),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LeaderSystem {
    pub members: BTreeSet<AgentId>,
}

impl LeaderSystem {
    /// Current membership: every level leader and every departure on the runway.
    pub fn derive<'a>(stack: &HoldingStack, departures_on_runway: impl IntoIterator<Item = &'a AgentId>) -> Self {
        let mut members: BTreeSet<AgentId> = stack.leaders().cloned().collect();
        members.extend(departures_on_runway.into_iter().cloned());
        LeaderSystem { members }
    }

    pub fn contains(&self, id: &AgentId) -> bool {
        self.members.contains(id)
    }
}

/// Deliveries needed to spread one piece of information through the stack.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelayPlan {
    /// Direct copies from the origin to level leaders.
    pub leader_copies: Vec<AgentId>,
    /// `(leader, recipient)` forwards inside each level.
    pub forwards: Vec<(AgentId, AgentId)>,
}

impl RelayPlan {
    pub fn message_count(&self) -> usize {
        self.leader_copies.len() + self.forwards.len()
    }

    /// Every aircraft that ends up with the information, origin excluded.
    pub fn reached(&self) -> BTreeSet<AgentId> {
        self.leader_copies
            .iter()
            .cloned()
            .chain(self.forwards.iter().map(|(_, r)| r.clone()))
            .collect()
    }
}

/// Plan the relay of a message originating at `origin`.
pub fn leader_relay(system: &LeaderSystem, origin: &AgentId, stack: &HoldingStack) -> Result<RelayPlan, RelayError> {
    if !system.contains(origin) {
        return Err(RelayError::NotAMember(origin.clone()));
    }
    let mut plan = RelayPlan::default();
    for level in stack.levels() {
        let Some(leader) = &level.leader else { continue };
        if leader != origin {
            plan.leader_copies.push(leader.clone());
        }
        for m in level.non_leaders() {
            if m != origin {
                plan.forwards.push((leader.clone(), m.clone()));
            }
        }
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::LandingQueue;
    use crate::stack::group_levels;

    fn stack_321() -> (HoldingStack, LandingQueue) {
        let mut q = LandingQueue::new(12);
        for n in ["A", "B", "C", "D", "E", "F"] {
            q.admit(n.into()).unwrap();
        }
        let holding: Vec<(AgentId, u32)> = vec![
            ("A".into(), 7500),
            ("B".into(), 7500),
            ("C".into(), 7500),
            ("D".into(), 8500),
            ("E".into(), 8500),
            ("F".into(), 9500),
        ];
        (group_levels(&holding, &q, 1000, 7000, 18000).unwrap(), q)
    }

    #[test]
    fn takeoff_info_reaches_everyone_with_six_messages() {
        let (stack, _) = stack_321();
        let dep: AgentId = "D9".into();
        let sys = LeaderSystem::derive(&stack, [&dep]);
        let plan = leader_relay(&sys, &dep, &stack).unwrap();
        assert_eq!(plan.leader_copies.len(), 3);
        assert_eq!(plan.forwards.len(), 3);
        assert_eq!(plan.message_count(), 6);
        let all: BTreeSet<AgentId> = ["A", "B", "C", "D", "E", "F"].iter().map(|s| (*s).into()).collect();
        assert_eq!(plan.reached(), all);
    }

    #[test]
    fn each_non_leader_gets_exactly_one_forward() {
        let (stack, _) = stack_321();
        let sys = LeaderSystem::derive(&stack, std::iter::empty());
        let plan = leader_relay(&sys, &"A".into(), &stack).unwrap();
        let mut recips: Vec<_> = plan.forwards.iter().map(|(_, r)| r.clone()).collect();
        let n = recips.len();
        recips.dedup();
        assert_eq!(recips.len(), n);
        assert_eq!(plan.reached().len(), 5);
    }

    #[test]
    fn non_member_cannot_originate() {
        let (stack, _) = stack_321();
        let sys = LeaderSystem::derive(&stack, std::iter::empty());
        assert_eq!(
            leader_relay(&sys, &"B".into(), &stack),
            Err(RelayError::NotAMember("B".into()))
        );
    }
}
