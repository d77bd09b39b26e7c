use crate::exchange::{Action, ExchangeState, Side, N_ACTIONS};

/// Length of the agent state vector.
pub const AGENT_DIM: usize = 7 + N_ACTIONS;

/// `(Ex - κ) / (κ + Sz)` with all three in the same unit.
pub fn order_completion(executed: f64, queue: f64, size: f64) -> f64 {
    let d = queue + size;
    if d > 0.0 {
        ((executed - queue) / d).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

/// Agent state: net inventory ratio, realized PnL over the daily target,
/// unrealized PnL, order distances to the midpoint (bid, ask), order
/// completion (bid, ask), and a one-hot of the last action.
pub fn agent_state(ex: &ExchangeState, mid: f64, last_action: Option<Action>, rho: f64) -> [f64; AGENT_DIM] {
    let mut v = [0.0; AGENT_DIM];
    v[0] = ex.net_lots() / ex.config().max_inventory as f64;
    v[1] = ex.realized_pnl() / rho;
    v[2] = ex.unrealized_pnl(mid);
    for (k, side) in [Side::Bid, Side::Ask].into_iter().enumerate() {
        if let Some(o) = ex.open_order(side) {
            v[3 + k] = o.price / mid - 1.0;
            // queue is a notional, so compare fills and size in notional too
            v[5 + k] = order_completion(o.executed * o.price, o.queue_ahead, o.size * o.price);
        }
    }
    if let Some(a) = last_action {
        v[7 + a.index()] = 1.0;
    }
    v
}
