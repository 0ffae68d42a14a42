//! Randomized event sequences against the bond ledger.

use std::collections::HashMap;

use bonded_mining::protocol::{BondState, BondedNetwork, NetworkParams, ProtocolEvent};
use bonded_mining::validity::ValidityParams;
use bonded_mining::Error;
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Op {
    Bond {
        miner: u32,
        commitment: f64,
    },
    Mine {
        miner: u32,
        dt: f64,
        report: f64,
        proposed: f64,
    },
    Divest {
        miner: u32,
    },
    Tick {
        dt: f64,
    },
    Resize {
        miner: u32,
        long: bool,
    },
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        1 => (0u32..6, 1.0f64..100.0).prop_map(|(miner, commitment)| Op::Bond { miner, commitment }),
        12 => (0u32..6, 1.0f64..3000.0, 0.0f64..2.5, 0.2f64..3.0).prop_map(|(miner, dt, report, proposed)| {
            Op::Mine { miner, dt, report, proposed }
        }),
        1 => (0u32..6).prop_map(|miner| Op::Divest { miner }),
        1 => (1.0f64..2e5).prop_map(|dt| Op::Tick { dt }),
        1 => (0u32..6, any::<bool>()).prop_map(|(miner, long)| Op::Resize { miner, long }),
    ]
}

fn window(long: bool) -> ValidityParams {
    if long {
        ValidityParams::new(2, 8, 1e-4, 1e-4).unwrap()
    } else {
        ValidityParams::new(1, 4, 1e-4, 1e-4).unwrap()
    }
}

/// The edge set written out independently of the implementation.
fn legal(from: BondState, to: BondState) -> bool {
    use BondState::*;
    [
        (Bootstrapping, FullyBonded),
        (FullyBonded, Bootstrapping),
        (Bootstrapping, Abandoned),
        (FullyBonded, Abandoned),
        (Abandoned, Divested),
        (FullyBonded, Divested),
        (Divested, Bootstrapping),
    ]
    .contains(&(from, to))
}

fn apply(net: &mut BondedNetwork, op: &Op) -> Result<(), Error> {
    let now = net.now();
    match *op {
        Op::Bond { miner, commitment } => net.bond(miner, commitment, window(false), now),
        Op::Mine {
            miner,
            dt,
            report,
            proposed,
        } => {
            let c = net.account(miner).map(|a| a.commitment()).unwrap_or(1.0);
            net.mine(miner, now + dt, report * c, proposed * c.max(1e-3))
        }
        Op::Divest { miner } => net.divest(miner, now).map(|_| ()),
        Op::Tick { dt } => net.tick(now + dt),
        Op::Resize { miner, long } => net.set_params(miner, window(long)),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn ledger_invariants_hold(ops in proptest::collection::vec(op(), 10_000)) {
        let mut net = BondedNetwork::new(NetworkParams::default()).unwrap();
        let mut seen = 0;
        let mut states: HashMap<u32, BondState> = HashMap::new();
        let mut last_reconciled: HashMap<u32, u64> = HashMap::new();
        let mut accepted = 0usize;
        for op in &ops {
            match apply(&mut net, op) {
                Ok(()) => accepted += 1,
                Err(Error::ProtocolViolation(_)) => {}
                Err(e) => panic!("unexpected error {e} for {op:?}"),
            }
            prop_assert_eq!(net.conservation_gap(), 0);
            for e in &net.events()[seen..] {
                match e {
                    ProtocolEvent::Bond { miner, .. } => {
                        states.entry(*miner).or_insert(BondState::Bootstrapping);
                    }
                    ProtocolEvent::Transition { miner, from, to } => {
                        prop_assert!(legal(*from, *to), "{:?} -> {:?}", from, to);
                        prop_assert_eq!(states.get(miner), Some(from));
                        states.insert(*miner, *to);
                    }
                    ProtocolEvent::Reconcile { miner, deposit_height, .. } => {
                        let prev = last_reconciled.insert(*miner, *deposit_height).unwrap_or(0);
                        prop_assert!(*deposit_height > prev, "FIFO broken for miner {}", miner);
                    }
                    _ => {}
                }
            }
            seen = net.events().len();
            for a in net.accounts() {
                prop_assert_eq!(states.get(&a.id()), Some(&a.state()));
                prop_assert!(a.is_conserved());
                let deps = a.deposits();
                prop_assert!(deps.iter().zip(deps.iter().skip(1)).all(|(x, y)| x.height < y.height));
                match a.state() {
                    BondState::Bootstrapping => prop_assert!(deps.len() < a.params().n_l),
                    BondState::FullyBonded => prop_assert!(deps.len() >= a.params().n_l),
                    _ => prop_assert!(deps.is_empty()),
                }
            }
        }
        prop_assert!(accepted > ops.len() / 4);
        let ev = net.events();
        prop_assert!(ev.iter().any(|e| matches!(e, ProtocolEvent::Reconcile { .. })), "no reconcile event");
        prop_assert!(ev.iter().any(|e| matches!(e, ProtocolEvent::Slash { .. })), "no slash event");
        prop_assert!(ev.iter().any(|e| matches!(e, ProtocolEvent::Abandon { .. })), "no abandon event");
    }
}
