use std::fmt;

use crate::market_data::LobSnapshot;

use super::ExchangeError;

/// Number of discrete actions.
pub const N_ACTIONS: usize = 17;

// (bid level, ask level) for action ids 2..=16.
const QUOTE_LEVELS: [(usize, usize); 15] = [
    (0, 4),
    (0, 9),
    (0, 14),
    (4, 0),
    (4, 4),
    (4, 9),
    (4, 14),
    (9, 0),
    (9, 4),
    (9, 9),
    (9, 14),
    (14, 0),
    (14, 4),
    (14, 9),
    (14, 14),
];

/// An action id in `1..=17`: 1 holds, 2..=16 quote at fixed depths, 17
/// flattens the inventory with market orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action(u8);

impl Action {
    pub const NO_ACTION: Action = Action(1);
    pub const FLATTEN: Action = Action(17);

    pub fn new(id: u8) -> Result<Self, ExchangeError> {
        if (1..=N_ACTIONS as u8).contains(&id) {
            Ok(Self(id))
        } else {
            Err(ExchangeError::UnknownAction(id))
        }
    }

    /// From a zero-based policy output index.
    pub fn from_index(index: usize) -> Result<Self, ExchangeError> {
        u8::try_from(index + 1)
            .map_err(|_| ExchangeError::UnknownAction(u8::MAX))
            .and_then(Self::new)
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn all() -> impl Iterator<Item = Action> {
        (1..=N_ACTIONS as u8).map(Action)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A resolved quote: book depth and the price found there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuoteTarget {
    pub level: usize,
    pub price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Instruction {
    /// Leave open orders as they are.
    Hold,
    Quote {
        bid: QuoteTarget,
        ask: QuoteTarget,
    },
    /// Cancel both orders and close every lot at market.
    Flatten,
}

/// Bid and ask depths for a quoting action.
pub fn quote_levels(action: Action) -> Option<(usize, usize)> {
    match action.0 {
        2..=16 => Some(QUOTE_LEVELS[action.0 as usize - 2]),
        _ => None,
    }
}

/// Resolves an action against the current book.
pub fn decode_action(action: Action, snapshot: &LobSnapshot) -> Instruction {
    match quote_levels(action) {
        Some((b, a)) => {
            let b = b.min(snapshot.bids.len() - 1);
            let a = a.min(snapshot.asks.len() - 1);
            Instruction::Quote {
                bid: QuoteTarget {
                    level: b,
                    price: snapshot.bids[b].price,
                },
                ask: QuoteTarget {
                    level: a,
                    price: snapshot.asks[a].price,
                },
            }
        }
        None if action == Action::FLATTEN => Instruction::Flatten,
        None => Instruction::Hold,
    }
}
