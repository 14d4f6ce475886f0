use std::fmt;

use serde::{Deserialize, Serialize};

pub const N_ACTIONS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Noop,
    Expand,
    Contract,
    Migrate,
}

/// A scheduling decision. Ids: 0 = noop, 1–5 expand, 6–10 contract,
/// 11–15 migrate, each at levels 1–5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    /// 1..=5; 0 for noop.
    pub level: u8,
}

impl Action {
    pub const NOOP: Action = Action {
        kind: ActionKind::Noop,
        level: 0,
    };

    pub fn new(kind: ActionKind, level: u8) -> Option<Action> {
        match kind {
            ActionKind::Noop if level == 0 => Some(Action::NOOP),
            ActionKind::Noop => None,
            _ if (1..=5).contains(&level) => Some(Action { kind, level }),
            _ => None,
        }
    }

    pub fn expand(level: u8) -> Action {
        Action::new(ActionKind::Expand, level).expect("level in 1..=5")
    }

    pub fn contract(level: u8) -> Action {
        Action::new(ActionKind::Contract, level).expect("level in 1..=5")
    }

    pub fn migrate(level: u8) -> Action {
        Action::new(ActionKind::Migrate, level).expect("level in 1..=5")
    }

    pub fn id(self) -> usize {
        let base = match self.kind {
            ActionKind::Noop => return 0,
            ActionKind::Expand => 0,
            ActionKind::Contract => 5,
            ActionKind::Migrate => 10,
        };
        base + self.level as usize
    }

    pub fn from_id(id: usize) -> Option<Action> {
        let level = ((id + 4) % 5 + 1) as u8;
        match id {
            0 => Some(Action::NOOP),
            1..=5 => Some(Action::expand(level)),
            6..=10 => Some(Action::contract(level)),
            11..=15 => Some(Action::migrate(level)),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ActionKind::Noop => write!(f, "noop"),
            k => write!(f, "{}{}", format!("{k:?}").to_lowercase(), self.level),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_a_bijection() {
        let mut seen = std::collections::HashSet::new();
        for id in 0..N_ACTIONS {
            let a = Action::from_id(id).unwrap();
            assert_eq!(a.id(), id);
            assert!(seen.insert(a));
        }
        assert!(Action::from_id(N_ACTIONS).is_none());
        assert_eq!(Action::expand(1).id(), 1);
        assert_eq!(Action::contract(5).id(), 10);
        assert_eq!(Action::migrate(1).id(), 11);
        assert!(Action::new(ActionKind::Expand, 6).is_none());
        assert_eq!(Action::migrate(3).to_string(), "migrate3");
    }
}
