//! The acceptance suite: every criterion must pass at its pinned
//! tolerance. One line per criterion is printed; run with
//! `cargo test --test acceptance -- --nocapture` to see all of them.

use seqcoord_core::acceptance;

#[test]
fn acceptance_criteria() {
    let outcomes = acceptance::run_all();
    let mut all_ok = true;
    for o in &outcomes {
        println!("{}", o.line());
        all_ok &= o.passed;
    }
    assert!(all_ok, "one or more acceptance criteria failed");
}
