use blend_core::channel::ProfileId;
use blend_core::report;
use blend_core::scenario::{self, FileSize, Mode, RunOptions, ScenarioConfig};
use blend_core::transport::CcAlgo;

fn lossless(profile: ProfileId, mode: Mode, bi: Option<u32>, bytes: u64) -> ScenarioConfig {
    let mut c = ScenarioConfig {
        profile,
        mode,
        bi,
        file_size: FileSize(bytes),
        loss: vec!["none".into()],
        ..Default::default()
    };
    // Keep RTT jitter from firing retransmissions; those are transport
    // behaviour and would show up as repeated names.
    c.transport.rto_min_ms = 2000;
    c
}

fn trace(cfg: &ScenarioConfig) -> Vec<u64> {
    let opts = RunOptions {
        producer_trace: true,
        ..Default::default()
    };
    let out = scenario::run_scenario_with(cfg, opts).unwrap();
    assert!(out.report.completed);
    out.producer_trace.iter().map(|n| n.seq().unwrap()).collect()
}

#[test]
fn bundling_is_invisible_to_the_producer_forwarder() {
    for profile in [ProfileId::Ieee80211b, ProfileId::Ieee80211n] {
        for algo in [CcAlgo::Aimd, CcAlgo::Cubic] {
            let mut plain = lossless(profile, Mode::Default, None, 600_000);
            plain.algo = algo;
            let reference = trace(&plain);
            let n = plain.file_spec().n_chunks;
            assert_eq!(reference, (0..n).map(|s| s + 1).collect::<Vec<_>>());
            for bi in [1, 2, 7, 10, 15, 32] {
                let mut bundled = lossless(profile, Mode::Blend, Some(bi), 600_000);
                bundled.algo = algo;
                assert_eq!(trace(&bundled), reference, "{profile} {algo} bi={bi}");
            }
        }
    }
}

#[test]
fn lost_bundle_is_refilled_end_to_end() {
    let mut c = lossless(ProfileId::Ieee80211b, Mode::Blend, Some(10), 40 * 1460);
    c.transport.initial_cwnd = 10.0;
    // The second Interest frame from the consumer carries (11, 20).
    c.loss = vec!["nth:interest:consumer:2".into()];
    let opts = RunOptions {
        producer_trace: true,
        channel_log: true,
        ..Default::default()
    };
    let out = scenario::run_scenario_with(&c, opts).unwrap();
    assert!(out.report.completed);
    let seqs: Vec<u64> = out.producer_trace.iter().map(|n| n.seq().unwrap()).collect();
    assert_eq!(seqs[..30], (1..=30).collect::<Vec<_>>()[..]);
    assert_eq!(out.report.rtx, 0, "the next bundle covers the gap before any timer fires");
    assert_eq!(out.report.frames_dropped, 1);
}

#[test]
fn same_seed_same_csv() {
    let cfgs = [
        ScenarioConfig {
            file_size: FileSize(2 * 1024 * 1024),
            ..Default::default()
        },
        ScenarioConfig {
            profile: ProfileId::Ieee80211n,
            mode: Mode::Blend,
            bi: Some(15),
            algo: CcAlgo::Cubic,
            seed: 42,
            file_size: FileSize(2 * 1024 * 1024),
            ..Default::default()
        },
    ];
    let a = report::to_csv(&scenario::run_many(&cfgs).unwrap()).unwrap();
    let b = report::to_csv(&scenario::run_many(&cfgs).unwrap()).unwrap();
    assert_eq!(a, b);
    let other = ScenarioConfig {
        seed: 43,
        ..cfgs[1].clone()
    };
    let c = report::to_csv(&scenario::run_many(&[cfgs[0].clone(), other]).unwrap()).unwrap();
    assert_ne!(a, c, "a different seed should change the lossy run");
}

#[test]
fn identities_hold_across_modes_and_loss() {
    let mut cfgs = Vec::new();
    for profile in [ProfileId::Ieee80211b, ProfileId::Ieee80211n] {
        for (mode, bi) in [(Mode::Default, None), (Mode::Blend, Some(5)), (Mode::Blend, Some(15)), (Mode::OneInterest, None)] {
            for loss in ["random:0.01", "random:0.05"] {
                cfgs.push(ScenarioConfig {
                    profile,
                    mode,
                    bi,
                    loss: vec![loss.into()],
                    file_size: FileSize(1024 * 1024),
                    ..Default::default()
                });
            }
        }
    }
    for r in scenario::run_many(&cfgs).unwrap() {
        assert!(r.completed, "{r:?}");
        r.check_identities().unwrap();
        assert_eq!(r.data_pkts, 719);
        if r.mode != Mode::OneInterest {
            // Pushed chunks lost on the air are not recovered.
            assert!(r.c_rcv >= r.data_pkts);
        }
    }
}

#[test]
fn deadline_yields_a_partial_report() {
    let c = ScenarioConfig {
        deadline_s: 1,
        ..Default::default()
    };
    let r = scenario::run_scenario(&c).unwrap();
    assert!(!r.completed);
    assert!(r.app_sent > 0 && r.app_sent < r.data_pkts);
    assert!((r.completion_time_s - 1.0).abs() < 1e-6);
}
