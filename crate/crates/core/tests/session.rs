use std::sync::Arc;

use mmtrust_core::scenario::shipped_scenario;
use mmtrust_core::session::{append_log, read_log, replay, session_step, MuirResponses, Session, SessionRequest, SessionResponse};
use mmtrust_core::{Decision, Error, Observation};
use proptest::prelude::*;

fn open(name: &str) -> Session {
    Session::open("test", Arc::new(shipped_scenario(name).unwrap().unwrap())).unwrap()
}

#[test]
fn observe_eliminate_m2() {
    let (s, _, entry) = session_step(
        &open("coffee"),
        SessionRequest::Observe {
            observation: Observation::eliminate(["M2"]),
            action_id: None,
        },
    )
    .unwrap();
    assert!(entry.is_some());
    let w = &s.state().weights;
    assert_eq!(w[1], 0.0);
    for i in [0, 2, 3] {
        assert!((w[i] - 1.0 / 3.0).abs() < 1e-15);
    }
    assert!((s.state().assessment.p_contract - 0.45235127858068563).abs() < 1e-6);
}

#[test]
fn whatif_does_not_commit() {
    let s = open("coffee");
    let (after, resp, entry) = session_step(
        &s,
        SessionRequest::WhatIf {
            observation: Observation::eliminate(["M2"]),
        },
    )
    .unwrap();
    assert!(entry.is_none());
    let SessionResponse::Projection(p) = resp else { panic!("expected projection") };
    assert!((p.assessment.p_contract - 0.452351).abs() < 1e-6);
    let (_, read, _) = session_step(&after, SessionRequest::Read).unwrap();
    let SessionResponse::State(state) = read else { panic!() };
    assert_eq!(state.weights, vec![0.25; 4]);
    assert_eq!(&state, s.state());
}

#[derive(Debug, Clone)]
enum Op {
    Observe(Vec<usize>),
    WhatIf(Vec<usize>),
    Report([u8; 5]),
    Decide(bool),
    Behavior(usize),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        prop::collection::vec(0usize..4, 1..3).prop_map(Op::Observe),
        prop::collection::vec(0usize..4, 1..3).prop_map(Op::WhatIf),
        prop::array::uniform5(0u8..=10).prop_map(Op::Report),
        any::<bool>().prop_map(Op::Decide),
        (0usize..3).prop_map(Op::Behavior),
    ]
}

const TRACES: [&[&str]; 3] = [
    &["pick-cup", "reach-top-shelf", "make-coffee"],
    &["pick-cup", "use-grabber", "make-coffee"],
    &["go-to-storage", "pick-coffee-in-storage", "return-to-office", "pick-cup", "make-coffee"],
];

fn request(op: &Op) -> SessionRequest {
    let ids = |v: &[usize]| Observation::eliminate(v.iter().map(|i| format!("M{}", i + 1)));
    match op {
        Op::Observe(v) => SessionRequest::Observe {
            observation: ids(v),
            action_id: None,
        },
        Op::WhatIf(v) => SessionRequest::WhatIf { observation: ids(v) },
        Op::Report(r) => SessionRequest::Report {
            responses: MuirResponses {
                competence: r[0] as f64,
                predictability: r[1] as f64,
                reliability: r[2] as f64,
                faith: r[3] as f64,
                overall: r[4] as f64,
            },
            action_id: None,
        },
        Op::Decide(accept) => SessionRequest::Decide {
            choice: if *accept { Decision::Accept } else { Decision::Reject },
            action_id: None,
        },
        Op::Behavior(i) => SessionRequest::Observe {
            observation: Observation::behavior(TRACES[*i].iter().copied()),
            action_id: None,
        },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn replaying_the_log_reproduces_the_session(ops in prop::collection::vec(op(), 0..12)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("session.jsonl");
        let mut session = open("coffee");
        append_log(&path, &session.open_entry()).unwrap();
        for op in &ops {
            match session_step(&session, request(op)) {
                Ok((next, _, entry)) => {
                    if let Some(entry) = entry {
                        append_log(&path, &entry).unwrap();
                    }
                    session = next;
                }
                Err(Error::Contradiction) => {}
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            }
        }
        let replayed = replay(&read_log(&path).unwrap()).unwrap();
        prop_assert_eq!(replayed.state(), session.state());
        let bits = |w: &[f64]| w.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&replayed.state().weights), bits(&session.state().weights));
    }

    #[test]
    fn whatif_sequences_leave_state_untouched(sets in prop::collection::vec(prop::collection::vec(0usize..4, 1..4), 0..10)) {
        let initial = open("coffee");
        let mut s = initial.clone();
        for set in &sets {
            if let Ok((next, _, entry)) = session_step(&s, request(&Op::WhatIf(set.clone()))) {
                prop_assert!(entry.is_none());
                s = next;
            }
        }
        prop_assert_eq!(s.state(), initial.state());
    }
}
