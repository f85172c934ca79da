//! Encoder/decoder pipeline checked against a naive replay of the two
//! flowcharts, written without any of the crate's link types.

mod common;

use blend_core::link::{Decoder, Encoder, LinkCounters};
use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn decoded_sequence_is_exactly_one_to_n(
        n in 1u64..=500,
        bi in 1u32..=32,
        schedule in prop::collection::vec(0u32..=40, 1..64),
        drop_pick in any::<prop::sample::Index>(),
        do_drop in any::<bool>(),
    ) {
        let count = bundle_count(n, bi, &schedule);
        // Losing the last bundle needs a transport retransmission, which is out of scope here.
        let dropped = (do_drop && count >= 2).then(|| drop_pick.index(count - 1));
        let out = flow_balance_case(n, bi, &schedule, dropped).map_err(TestCaseError::fail)?;
        let expected: Vec<u64> = (1..=n).collect();
        prop_assert_eq!(out, expected);
    }

    #[test]
    fn retransmissions_match_the_replayer(
        n in 1u64..=300,
        bi in 1u32..=32,
        schedule in prop::collection::vec(0u32..=40, 1..32),
        rtx_every in 2u64..20,
        loss_mask in any::<u64>(),
    ) {
        let mut enc = Encoder::new(bi, IDLE);
        let mut nenc = NaiveEncoder::new(bi as u64);
        let mut dec = Decoder::new(IDLE);
        let mut ndec = NaiveDecoder { pes: 0 };
        let mut c = LinkCounters::default();
        let mut frame = 0u32;
        let mut step = |seq: u64, rtx: bool, cwnd: u32| -> Result<(), TestCaseError> {
            let got = crate_encode(&mut enc, seq, rtx, cwnd, &mut c);
            prop_assert_eq!(got, nenc.step(seq, rtx, cwnd as u64));
            if let Sent::Bundle(ss, es) = got {
                let lost = loss_mask >> (frame % 64) & 1 == 1 && frame.is_multiple_of(3);
                frame += 1;
                if !lost {
                    prop_assert_eq!(crate_decode(&mut dec, ss, es, &mut c), ndec.step(ss, es));
                }
            }
            Ok(())
        };
        for seq in 1..=n {
            let cwnd = schedule[(seq - 1) as usize % schedule.len()];
            step(seq, false, cwnd)?;
            if seq % rtx_every == 0 {
                step(seq - rtx_every / 2, true, cwnd)?;
            }
        }
    }
}

#[test]
fn lost_bundle_is_refilled_by_the_next_one() {
    let bundles = issue_all(30, 10, &[20]);
    let sent: Vec<_> = bundles.into_iter().filter(|s| *s != Sent::Nothing).collect();
    assert_eq!(sent, vec![Sent::Bundle(1, 10), Sent::Bundle(11, 20), Sent::Bundle(21, 30)]);

    let mut dec = Decoder::new(IDLE);
    let mut c = LinkCounters::default();
    assert_eq!(crate_decode(&mut dec, 1, 10, &mut c), (1..=10).collect::<Vec<_>>());
    // (11, 20) is lost on the air.
    assert_eq!(crate_decode(&mut dec, 21, 30, &mut c), (11..=30).collect::<Vec<_>>());
}

#[test]
fn shrinking_window_keeps_bundles_contiguous() {
    let sent: Vec<_> = issue_all(25, 10, &[20, 20, 20, 20, 20, 20, 20, 20, 20, 20, 3])
        .into_iter()
        .filter(|s| *s != Sent::Nothing)
        .collect();
    // seq 11 is tagged with cwnd 3.
    assert_eq!(sent[0], Sent::Bundle(1, 10));
    assert_eq!(sent[1], Sent::Bundle(11, 13));
    assert_eq!(sent[2], Sent::Bundle(14, 23));
    assert_eq!(sent[3], Sent::Bundle(24, 25));
}
