mod common;

use common::checks;
use xchain_core::Value;

fn agrees(method: &str, params: Vec<Value>) {
    if let Err(reason) = checks::end_to_end(method, params) {
        panic!("{reason}");
    }
}

#[test]
fn int_getter_matches_direct_execution() {
    agrees("get_int", vec![]);
}

#[test]
fn string_getter_matches_direct_execution() {
    agrees("get_string", vec![]);
}

#[test]
fn bytes_getter_matches_direct_execution() {
    agrees("get_bytes", vec![]);
}

#[test]
fn int_setter_matches_direct_execution() {
    agrees("set_int", vec![Value::Int(i64::MIN)]);
}

#[test]
fn string_setter_matches_direct_execution() {
    agrees("set_string", vec![Value::String("ünïcode".into())]);
}

#[test]
fn bytes_setter_matches_direct_execution() {
    agrees("set_bytes", vec![Value::Bytes(vec![])]);
}

#[test]
fn echo_matches_direct_execution() {
    agrees("echo", vec![Value::Bytes(vec![7; 64])]);
}
