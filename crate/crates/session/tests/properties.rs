use proptest::prelude::*;
use slowbeat_core::game::OutcomeKind;
use slowbeat_core::sim::PlayerModel;
use slowbeat_session::block::{replay, run_block, SimParticipant};
use slowbeat_session::config::{BlockConfig, BlockDefaults, Condition, Fidelity};
use slowbeat_session::log::{BlockRecord, LogHeader};
use slowbeat_session::population::{BlockPhysiology, ProbeModel};
use slowbeat_session::table::{CohortTable, TableRow};

fn condition() -> impl Strategy<Value = Condition> {
    prop_oneof![
        Just(Condition::EG),
        Just(Condition::DG),
        Just(Condition::DSG),
        Just(Condition::DSGR),
        Just(Condition::Training)
    ]
}

fn header(c: Condition, seed: u64, fidelity: Fidelity) -> LogHeader {
    let d = BlockDefaults { fidelity, duration_s: 40.0, training_duration_s: 40.0, probe_gap_s: (6.0, 10.0), ..Default::default() };
    LogHeader {
        participant: Some(0),
        config: BlockConfig::new(c, seed, &d),
        physiology: BlockPhysiology::nominal(c),
        signals: Default::default(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn logged_blocks_round_trip_and_replay(
        c in condition(),
        seed in any::<u64>(),
        sim_seed in any::<u64>(),
        waveform in any::<bool>(),
        interval in 200.0f64..900.0,
    ) {
        let fidelity = if waveform { Fidelity::Waveform } else { Fidelity::BeatLevel };
        let sim = SimParticipant {
            player: PlayerModel { press_interval_ms: interval, ..PlayerModel::default() },
            probe: ProbeModel { rt_mean_ms: 900.0, rt_cv: 0.3, omission_prob: 0.1, stress_omission_prob: 0.2 },
            seed: sim_seed,
        };
        let out = run_block(header(c, seed, fidelity), &sim, None, false).unwrap();
        let rec = &out.record;
        prop_assert!(rec.is_sorted());
        prop_assert!(rec.complete());
        prop_assert_eq!(rec.trigger_times().is_empty(), c != Condition::DSGR);
        if !c.stress() {
            prop_assert!(out.trials.iter().all(|t| t.outcome.kind != OutcomeKind::Timeout));
        }
        let text = rec.to_jsonl();
        let parsed = BlockRecord::from_jsonl(&text).unwrap();
        prop_assert_eq!(&parsed, rec);
        let again = replay(&parsed).unwrap();
        prop_assert_eq!(&again.record, rec);
        prop_assert_eq!(again.trials, out.trials);
    }

    #[test]
    fn table_csv_round_trip(
        rows in prop::collection::vec(
            (0u32..40, prop::option::of(0usize..4), prop::collection::vec(prop::option::of(-1e6f64..1e6), 3)),
            0..20,
        ),
    ) {
        let conditions = Condition::ANALYZED;
        let table = CohortTable {
            columns: vec!["a".into(), "b_norm".into(), "c".into()],
            rows: rows
                .into_iter()
                .enumerate()
                .map(|(i, (p, pos, values))| TableRow { participant: p, condition: conditions[i % 4], position: pos, values })
                .collect(),
        };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        prop_assert_eq!(CohortTable::read_csv(buf.as_slice()).unwrap(), table);
    }
}
