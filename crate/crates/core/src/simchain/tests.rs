use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::distribution::{DistributionContract, ProtocolParams};
use crate::invocation::TestContract;

const PRICE: u64 = 2;

fn addr(name: &str) -> Address {
    Address::derive(0, name)
}

fn chain(balances: &[(&str, u64)]) -> SimChain {
    let mut ledger = Ledger::new();
    for (name, amount) in balances {
        ledger.mint(addr(name), *amount);
    }
    let store = TestContract::new(addr("store"), "store").with_storage("int", Value::Int(7));
    let params = ChainParams {
        id: ChainId(0),
        gas_price: PRICE,
        costs: GasCostTable::default(),
    };
    let world = World::new(
        ledger,
        DistributionContract::new(ProtocolParams::default()),
        BTreeMap::from([(addr("store"), store)]),
    );
    SimChain::new(params, world)
}

fn direct(sender: &str, method: &str, params: Vec<Value>, gas_limit: u64) -> Transaction {
    let call = Call::Contract {
        callee: addr("store"),
        method: method.into(),
        params,
    };
    Transaction::new(addr(sender), call, gas_limit, PRICE)
}

/// Dispatch, one arithmetic step and one storage read.
fn getter_gas() -> u64 {
    let c = GasCostTable::default();
    c.call_dispatch + c.arithmetic + c.storage_read
}

#[test]
fn starts_with_an_empty_genesis_block() {
    let c = chain(&[("a", 5)]);
    assert_eq!(c.height(), 0);
    assert!(c.blocks()[0].receipts.is_empty());
    assert_eq!(c.genesis_total(), 5);
}

#[test]
fn admission_requires_the_full_fee_reservation() {
    let mut c = chain(&[("ten", 10), ("nine", 9)]);
    let t = |who| Transaction::new(addr(who), Call::Contract { callee: addr("store"), method: "get_int".into(), params: vec![] }, 5, PRICE);
    assert!(c.submit_transaction(t("ten")).is_ok());
    assert_eq!(
        c.submit_transaction(t("nine")),
        Err(ChainError::InsufficientBalance { sender: addr("nine"), available: 9, required: 10 })
    );
    assert_eq!(c.submit_transaction(t("ghost")), Err(ChainError::UnknownSender(addr("ghost"))));
    assert_eq!(c.submit_transaction(direct("ten", "get_int", vec![], 0)), Err(ChainError::ZeroGasLimit));
    assert_eq!(c.pending_len(), 1);
}

#[test]
fn fee_is_gas_used_times_price() {
    let mut c = chain(&[("a", 10_000)]);
    c.submit_transaction(direct("a", "get_int", vec![], 1_000)).unwrap();
    let block = c.mine_block().clone();
    let r = &block.receipts[0];
    assert_eq!(r.status, TxStatus::Success);
    assert_eq!(r.kind, OpKind::ManualCall);
    assert_eq!(r.gas_used, getter_gas());
    assert_eq!(r.fee, getter_gas() * PRICE);
    assert_eq!(c.get_balance(&addr("a")).unwrap(), 10_000 - r.fee);
    assert_eq!(block.gas_sink, r.fee);
    assert_eq!(block.balance_deltas[&addr("a")], -i128::from(r.fee));
}

#[test]
fn out_of_gas_consumes_the_whole_limit() {
    let mut c = chain(&[("a", 10_000)]);
    let limit = getter_gas() - 1;
    c.submit_transaction(direct("a", "get_int", vec![], limit)).unwrap();
    let r = c.mine_block().receipts[0].clone();
    assert_eq!(r.status, TxStatus::Failed);
    assert_eq!(r.gas_used, limit);
    assert_eq!(c.get_balance(&addr("a")).unwrap(), 10_000 - limit * PRICE);
}

#[test]
fn revert_undoes_state_but_keeps_the_fee() {
    let mut c = chain(&[("a", 10_000)]);
    c.submit_transaction(direct("a", "set_int", vec![Value::String("x".into())], 1_000)).unwrap();
    let r = c.mine_block().receipts[0].clone();
    assert_eq!(r.status, TxStatus::Failed);
    assert!(r.fee > 0);
    assert_eq!(c.world().contracts[&addr("store")].storage["int"], Value::Int(7));
}

#[test]
fn pool_executes_in_submission_order() {
    let mut c = chain(&[("a", 100_000), ("b", 100_000)]);
    c.submit_transaction(direct("b", "set_int", vec![Value::Int(1)], 1_000)).unwrap();
    c.submit_transaction(direct("a", "set_int", vec![Value::Int(2)], 1_000)).unwrap();
    c.submit_transaction(direct("b", "get_int", vec![], 1_000)).unwrap();
    let block = c.mine_block().clone();
    let ids: Vec<u64> = block.receipts.iter().map(|r| r.tx_id.0).collect();
    assert_eq!(ids, vec![0, 1, 2]);
    let nonces: Vec<u64> = block.receipts.iter().map(|r| r.tx.nonce).collect();
    assert_eq!(nonces, vec![0, 0, 1]);
    assert_eq!(c.world().contracts[&addr("store")].storage["int"], Value::Int(2));
    assert_eq!(c.pending_len(), 0);
}

#[test]
fn reservation_is_rechecked_at_execution() {
    // both fit at admission; after the first fee the second no longer does
    let mut c = chain(&[("a", 1_000)]);
    c.submit_transaction(direct("a", "get_int", vec![], 500)).unwrap();
    c.submit_transaction(direct("a", "get_int", vec![], 500)).unwrap();
    let block = c.mine_block().clone();
    assert_eq!(block.receipts[0].status, TxStatus::Success);
    let second = &block.receipts[1];
    assert_eq!((second.status, second.gas_used, second.fee), (TxStatus::Failed, 0, 0));
}

#[test]
fn events_and_balances_are_queryable() {
    let mut c = chain(&[("a", 1_000)]);
    c.mine_block();
    assert!(c.read_events(1, None).unwrap().is_empty());
    assert_eq!(
        c.read_events(2, None).unwrap_err(),
        ChainError::HeightOutOfRange { requested: 2, tip: 1 }
    );
    assert_eq!(c.get_balance(&addr("zed")), Err(ChainError::UnknownAccount(addr("zed"))));
}

#[test]
fn dry_run_leaves_the_chain_untouched() {
    let c = chain(&[("a", 1_000)]);
    let (receipt, value) = c.dry_run_call(addr("a"), addr("store"), "get_int", &vec![], 400);
    assert_eq!(receipt.gas_used, getter_gas());
    assert_eq!(value, Some(Value::Int(7)));
    assert_eq!(c.height(), 0);
    assert_eq!(c.get_balance(&addr("a")).unwrap(), 1_000);
}

#[test]
fn network_routes_by_chain_id() {
    let mut n = Network::new();
    n.add_chain(chain(&[("a", 7)]));
    assert_eq!(n.get_balance(ChainId(0), &addr("a")).unwrap(), 7);
    assert_eq!(n.chain(ChainId(3)).err(), Some(ChainError::UnknownChain(ChainId(3))));
    n.mine_block(ChainId(0)).unwrap();
    assert_eq!(n.chain(ChainId(0)).unwrap().height(), 1);
}

proptest! {
    /// Balances plus burned fees never change, whatever gets mined.
    #[test]
    fn tokens_are_conserved(ops in prop::collection::vec((0usize..3, 0u8..5, 1u64..400), 1..40)) {
        let names = ["a", "b", "c"];
        let mut c = chain(&[("a", 50_000), ("b", 3_000), ("c", 400)]);
        for (who, what, limit) in ops {
            let (method, params) = match what {
                0 => ("get_int", vec![]),
                1 => ("set_int", vec![Value::Int(limit as i64)]),
                2 => ("burn", vec![Value::Int(limit as i64)]),
                3 => ("revert", vec![]),
                _ => ("nothing", vec![]),
            };
            let _ = c.submit_transaction(direct(names[who], method, params, limit * 3));
            if what % 2 == 0 {
                c.mine_block();
            }
        }
        c.mine_block();
        prop_assert_eq!(c.ledger().total(), c.genesis_total());
        for block in c.blocks() {
            let fees: u64 = block.receipts.iter().map(|r| r.fee).sum();
            let net: i128 = block.balance_deltas.values().sum();
            prop_assert_eq!(net, -i128::from(fees));
        }
    }
}
