use super::*;
use proptest::prelude::*;

fn book(best_bid: f64, best_ask: f64, qty: f64) -> LobSnapshot {
    LobSnapshot::ladder(1_000, best_bid, best_ask, 0.5, qty)
}

fn state() -> ExchangeState {
    ExchangeState::new(ExchangeConfig::default())
}

#[test]
fn new_bid_queues_behind_level_notional() {
    let mut ex = state();
    let s = book(10_000.0, 10_000.5, 5.0);
    assert_eq!(ex.place_or_modify(Side::Bid, 0, &s), Ok(None));
    let o = ex.open_order(Side::Bid).unwrap();
    assert_eq!(o.queue_ahead, 50_000.0);
    assert_eq!(o.executed, 0.0);
    assert_eq!(o.price, 10_000.0);
}

#[test]
fn level_out_of_range() {
    let mut ex = state();
    let s = book(10_000.0, 10_000.5, 5.0);
    assert_eq!(
        ex.place_or_modify(Side::Ask, 20, &s),
        Err(ExchangeError::LevelOutOfRange(20))
    );
}

#[test]
fn queue_depletes_before_fill() {
    let mut ex = state();
    let mut s = book(10_000.0, 10_000.5, 0.5);
    ex.place_or_modify(Side::Bid, 0, &s).unwrap();
    assert_eq!(ex.open_order(Side::Bid).unwrap().queue_ahead, 5_000.0);
    s.market_notional[BID][0] = 3_000.0;
    assert!(ex.match_step(&s).is_empty());
    let o = ex.open_order(Side::Bid).unwrap();
    assert_eq!(o.queue_ahead, 2_000.0);
    assert_eq!(o.executed, 0.0);
}

#[test]
fn repost_same_price_keeps_priority() {
    let mut ex = state();
    let mut s = book(10_000.0, 10_000.5, 0.5);
    ex.place_or_modify(Side::Bid, 0, &s).unwrap();
    s.market_notional[BID][0] = 3_000.0;
    ex.match_step(&s);
    s.bids[0].qty = 9.0;
    ex.place_or_modify(Side::Bid, 0, &s).unwrap();
    assert_eq!(ex.open_order(Side::Bid).unwrap().queue_ahead, 2_000.0);
}

#[test]
fn empty_queue_full_fill_creates_lot() {
    let mut ex = state();
    let mut s = book(10_000.0, 10_000.5, 1.0);
    s.bids[0].qty = 0.0;
    ex.place_or_modify(Side::Bid, 0, &s).unwrap();
    assert_eq!(ex.open_order(Side::Bid).unwrap().queue_ahead, 0.0);
    s.market_notional[BID][0] = 10_000.0;
    let fills = ex.match_step(&s);
    assert_eq!(fills.len(), 1);
    let f = &fills[0];
    assert_eq!(
        (f.side, f.role, f.qty, f.price),
        (TradeSide::Buy, Role::Maker, 1.0, 10_000.0)
    );
    assert_eq!(f.fee, -0.00025);
    assert_eq!(f.rpnl, 0.0);
    assert!(ex.open_order(Side::Bid).is_none());
    assert_eq!(ex.long_lots(), 1.0);
    assert_eq!(ex.lots(LotSide::Long)[0].entry_fee, -0.00025);
    assert_eq!(ex.executions_this_step(), 1);
}

#[test]
fn no_flow_no_change() {
    let mut ex = state();
    let s = book(10_000.0, 10_000.5, 1.0);
    ex.place_or_modify(Side::Bid, 0, &s).unwrap();
    ex.place_or_modify(Side::Ask, 0, &s).unwrap();
    let before = ex.clone();
    assert!(ex.match_step(&s).is_empty());
    assert_eq!(ex.open_order(Side::Bid), before.open_order(Side::Bid));
    assert_eq!(ex.open_order(Side::Ask), before.open_order(Side::Ask));
}

#[test]
fn flow_beyond_order_price_does_not_count() {
    let mut ex = state();
    let mut s = book(10_000.0, 10_000.5, 0.0);
    ex.place_or_modify(Side::Bid, 4, &s).unwrap();
    // sells only at level 0, above the resting bid at level 4
    s.market_notional[BID][0] = 1e6;
    assert!(ex.match_step(&s).is_empty());
    s.market_notional[BID][6] = 1e6;
    assert_eq!(ex.match_step(&s).len(), 1);
}

#[test]
fn moving_partial_fill_books_units_and_resets_queue() {
    let mut ex = state();
    let mut s = book(10_000.0, 10_000.5, 0.0);
    ex.place_or_modify(Side::Bid, 0, &s).unwrap();
    s.market_notional[BID][0] = 4_000.0;
    assert!(ex.match_step(&s).is_empty());
    assert_eq!(ex.open_order(Side::Bid).unwrap().executed, 0.4);

    let mut s2 = book(10_000.0, 10_000.5, 3.0);
    s2.market_notional = [[0.0; LEVELS]; 2];
    let f = ex.place_or_modify(Side::Bid, 4, &s2).unwrap().expect("partial booked");
    assert_eq!((f.qty, f.price, f.role), (0.4, 10_000.0, Role::Maker));
    let o = ex.open_order(Side::Bid).unwrap();
    assert_eq!(o.executed, 0.0);
    assert_eq!(o.price, 9_998.0);
    assert_eq!(o.queue_ahead, 9_998.0 * 3.0);
    assert!((ex.long_lots() - 0.4).abs() < 1e-12);
}

#[test]
fn maker_round_trip_ten_bp() {
    let mut ex = state();
    ex.execute(TradeSide::Buy, 10_000.0, 1.0, Role::Maker, 0);
    ex.begin_snapshot();
    let f = ex.execute(TradeSide::Sell, 10_010.0, 1.0, Role::Maker, 1);
    assert_eq!(ex.step_realized(), 0.0015);
    assert_eq!(f.rpnl, 0.0015);
    assert!(ex.is_flat());
}

#[test]
fn short_cover_same_price_earns_rebates() {
    let mut ex = state();
    ex.execute(TradeSide::Sell, 10_000.0, 1.0, Role::Maker, 0);
    ex.begin_snapshot();
    ex.execute(TradeSide::Buy, 10_000.0, 1.0, Role::Maker, 1);
    assert_eq!(ex.step_realized(), 0.0005);
}

#[test]
fn opening_trade_realizes_nothing() {
    let mut ex = state();
    let f = ex.execute(TradeSide::Buy, 10_000.0, 1.0, Role::Maker, 0);
    assert_eq!(f.rpnl, 0.0);
    assert_eq!(ex.step_realized(), 0.0);
    assert_eq!(ex.lots(LotSide::Long).len(), 1);
}

#[test]
fn flatten_flat_is_noop() {
    let mut ex = state();
    assert!(ex.flatten_all(&book(9_999.5, 10_000.0, 1.0)).is_empty());
    assert_eq!(ex.fees_paid(), 0.0);
}

#[test]
fn flatten_applies_recursive_slippage() {
    let mut ex = state();
    ex.execute(TradeSide::Buy, 9_990.0, 1.0, Role::Maker, 0);
    ex.execute(TradeSide::Buy, 9_995.0, 1.0, Role::Maker, 0);
    let s = book(9_999.75, 10_000.25, 1.0);
    assert_eq!(s.midpoint(), 10_000.0);
    let fills = ex.flatten_all(&s);
    let prices: Vec<f64> = fills.iter().map(|f| f.price).collect();
    assert_eq!(prices, vec![9_999.0, 9_998.000_1]);
    assert!(fills.iter().all(|f| f.role == Role::Taker && f.side == TradeSide::Sell));
    assert!(ex.is_flat());
}

#[test]
fn flatten_short_slips_upward() {
    let mut ex = state();
    ex.execute(TradeSide::Sell, 10_000.0, 1.0, Role::Maker, 0);
    ex.execute(TradeSide::Sell, 10_000.0, 1.0, Role::Maker, 0);
    let fills = ex.flatten_all(&book(9_999.75, 10_000.25, 1.0));
    assert_eq!(fills[0].price, 10_000.0 * 1.0001);
    assert_eq!(fills[1].price, 10_000.0 * 1.0001 * 1.0001);
}

#[test]
fn immediate_flatten_of_one_lot() {
    let mut ex = state();
    ex.execute(TradeSide::Buy, 10_000.0, 1.0, Role::Maker, 0);
    ex.begin_snapshot();
    ex.flatten_all(&book(9_999.75, 10_000.25, 1.0));
    assert_eq!(ex.step_realized(), -0.0006);
}

#[test]
fn flatten_cancels_orders_and_books_partials() {
    let mut ex = state();
    let mut s = book(10_000.0, 10_000.5, 0.0);
    ex.place_or_modify(Side::Ask, 0, &s).unwrap();
    ex.place_or_modify(Side::Bid, 0, &s).unwrap();
    s.market_notional[ASK][0] = 5_000.25;
    ex.match_step(&s);
    let fills = ex.flatten_all(&s);
    assert_eq!(fills.len(), 2);
    assert_eq!(fills[0].role, Role::Maker);
    assert_eq!(fills[1].role, Role::Taker);
    assert!(ex.open_order(Side::Bid).is_none() && ex.open_order(Side::Ask).is_none());
    assert!(ex.is_flat());
}

#[test]
fn quoting_suppressed_at_capacity() {
    let mut ex = state();
    for _ in 0..10 {
        ex.execute(TradeSide::Buy, 100.0, 1.0, Role::Maker, 0);
    }
    let s = book(100.0, 100.5, 1.0);
    assert!(ex.at_capacity(Side::Bid));
    assert!(!ex.at_capacity(Side::Ask));
    ex.apply_action(Action::new(6).unwrap(), &s);
    assert!(ex.open_order(Side::Bid).is_none());
    assert!(ex.open_order(Side::Ask).is_some());
}

#[test]
fn unrealized_pnl_nets_sides() {
    let mut ex = state();
    assert_eq!(ex.unrealized_pnl(100.0), 0.0);
    ex.execute(TradeSide::Buy, 100.0, 1.0, Role::Maker, 0);
    ex.execute(TradeSide::Buy, 102.0, 1.0, Role::Maker, 0);
    assert!((ex.unrealized_pnl(103.0) - (103.0 / 101.0 - 1.0)).abs() < 1e-15);
}

#[test]
fn flatten_action_through_apply() {
    let mut ex = state();
    ex.execute(TradeSide::Sell, 100.0, 1.0, Role::Maker, 0);
    let fills = ex.apply_action(Action::FLATTEN, &book(99.75, 100.25, 1.0));
    assert_eq!(fills.len(), 1);
    assert_eq!(fills[0].action_id, 17);
    assert!(ex.is_flat());
}

/// Straight-line FIFO matcher over (side, price, qty, role) tuples.
fn brute_force_fifo(fills: &[(TradeSide, f64, f64, Role)], cfg: &ExchangeConfig) -> Vec<f64> {
    // (+1 long / -1 short, entry price, qty, entry fee)
    let mut book: Vec<(i8, f64, f64, f64)> = Vec::new();
    let mut out = Vec::new();
    for &(side, price, qty, role) in fills {
        let sign: i8 = if side == TradeSide::Buy { 1 } else { -1 };
        let fee_x = cfg.fees.rate(role);
        let mut left = qty;
        let mut pnl = 0.0;
        while left > 1e-12 && !book.is_empty() && book[0].0 != sign {
            let (s, e, q, fee_e) = book[0];
            let m = if q < left { q } else { left };
            let gross = if s == 1 { price / e - 1.0 } else { e / price - 1.0 };
            pnl += m / cfg.order_size * (gross - fee_e - fee_x);
            left -= m;
            if q - m <= 1e-12 {
                book.remove(0);
            } else {
                book[0].2 = q - m;
            }
        }
        if left > 1e-12 {
            book.push((sign, price, left, fee_x));
        }
        out.push(pnl);
    }
    out
}

fn fill_strategy() -> impl Strategy<Value = Vec<(TradeSide, f64, f64, Role)>> {
    proptest::collection::vec(
        (
            prop_oneof![Just(TradeSide::Buy), Just(TradeSide::Sell)],
            9_000.0f64..11_000.0,
            prop_oneof![Just(1.0), Just(0.5), Just(0.25), Just(2.0)],
            prop_oneof![Just(Role::Maker), Just(Role::Taker)],
        ),
        1..60,
    )
}

proptest! {
    #[test]
    fn fifo_matches_brute_force(fills in fill_strategy()) {
        let cfg = ExchangeConfig::default();
        let mut ex = ExchangeState::new(cfg);
        let expected = brute_force_fifo(&fills, &cfg);
        for (i, &(side, price, qty, role)) in fills.iter().enumerate() {
            let f = ex.execute(side, price, qty, role, i as i64);
            prop_assert!((f.rpnl - expected[i]).abs() < 1e-12, "fill {}: {} vs {}", i, f.rpnl, expected[i]);
            prop_assert!(ex.long.is_empty() || ex.short.is_empty());
        }
        let total: f64 = expected.iter().sum();
        prop_assert!((ex.realized_pnl() - total).abs() < 1e-10);
    }

    #[test]
    fn queue_never_grows_between_placements(flows in proptest::collection::vec(0.0f64..20_000.0, 1..40)) {
        let mut ex = state();
        let mut s = book(10_000.0, 10_000.5, 3.0);
        ex.place_or_modify(Side::Bid, 0, &s).unwrap();
        let mut prev = ex.open_order(Side::Bid).unwrap().queue_ahead;
        for f in flows {
            s.market_notional[BID][0] = f;
            ex.match_step(&s);
            match ex.open_order(Side::Bid) {
                Some(o) => {
                    prop_assert!(o.queue_ahead <= prev);
                    prop_assert!(o.executed >= 0.0 && o.executed <= o.size);
                    prev = o.queue_ahead;
                }
                None => break,
            }
        }
    }

    #[test]
    fn inventory_capped_under_random_actions(
        actions in proptest::collection::vec(1u8..=17, 1..200),
        flow in 0.0f64..40_000.0,
    ) {
        let mut ex = state();
        let mut s = book(10_000.0, 10_000.5, 0.2);
        for id in actions {
            ex.begin_snapshot();
            ex.apply_action(Action::new(id).unwrap(), &s);
            s.market_notional[BID][0] = flow;
            s.market_notional[ASK][2] = flow * 0.3;
            ex.match_step(&s);
            prop_assert!(ex.net_lots().abs() <= 10.0 + 1e-9);
            prop_assert!(ex.long.is_empty() || ex.short.is_empty());
        }
    }
}
