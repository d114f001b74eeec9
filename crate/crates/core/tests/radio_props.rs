use mtms_core::ids::Tti;
use mtms_core::radio::{
    cms_rate, cqi_from_geometry, d2d_rate, ChannelModel, Direction, FrameConfig, LinkBudget,
    Position, SidelinkScheduler, SpectralTable, SIDELINK_RBS,
};
use proptest::prelude::*;

fn link() -> LinkBudget {
    LinkBudget {
        tx_power_dbm: 28.1,
        noise_dbm: -114.4,
    }
}

proptest! {
    #[test]
    fn cqi_never_improves_with_distance(a in 1.0f64..3000.0, b in 1.0f64..3000.0) {
        let m = ChannelModel::default();
        let (near, far) = if a <= b { (a, b) } else { (b, a) };
        let o = Position::ORIGIN;
        let c1 = cqi_from_geometry(&o, &Position::new(near, 0.0), &m, &link(), 0.0);
        let c2 = cqi_from_geometry(&o, &Position::new(0.0, far), &m, &link(), 0.0);
        prop_assert!(c1 >= c2);
        prop_assert!(c1 <= 15);
    }

    #[test]
    fn cms_rate_is_worst_member(cqis in proptest::collection::vec(0u8..=15, 1..50)) {
        let t = SpectralTable::default();
        let worst = *cqis.iter().min().unwrap();
        prop_assert_eq!(cms_rate(&cqis, &t).unwrap(), t.carrier_rate(worst));
    }

    #[test]
    fn d2d_rate_linear_in_rbs(cqi in 0u8..=15, rbs in 0u32..=SIDELINK_RBS) {
        let t = SpectralTable::default();
        let one = d2d_rate(cqi, 1, &t).unwrap();
        prop_assert!((d2d_rate(cqi, rbs, &t).unwrap() - one * f64::from(rbs)).abs() < 1e-6);
    }

    #[test]
    fn airtime_carries_enough(bits in 1u64..5_000_000, rate in 1.0e3f64..1.0e7, start in 0u64..100) {
        let f = FrameConfig::tdd_config3();
        for dir in [Direction::Downlink, Direction::Uplink] {
            let n = f.airtime_from(bits, rate, dir, Tti(start)).unwrap();
            let carried: f64 = (start..start + n).map(|t| f.capacity(t as usize % 10, dir)).sum::<f64>() * rate / 1000.0;
            let short: f64 = (start..start + n - 1).map(|t| f.capacity(t as usize % 10, dir)).sum::<f64>() * rate / 1000.0;
            prop_assert!(carried >= bits as f64 * (1.0 - 1e-9));
            prop_assert!(short < bits as f64);
        }
    }

    #[test]
    fn sidelink_completions_never_precede_solo_airtime(sizes in proptest::collection::vec(1u64..200_000, 1..8)) {
        let f = FrameConfig::tdd_config3();
        let t = SpectralTable::default();
        let mut s = SidelinkScheduler::new(f.clone(), t.clone(), SIDELINK_RBS);
        for (i, &b) in sizes.iter().enumerate() {
            s.add(Tti(0), i as u64, 10, b).unwrap();
        }
        let solo_rate = d2d_rate(10, SIDELINK_RBS, &t).unwrap();
        for (i, &b) in sizes.iter().enumerate() {
            let done = s.completion(i as u64).unwrap().0;
            prop_assert!(done >= f.airtime(b, solo_rate, Direction::Uplink).unwrap());
        }
    }
}

#[test]
fn sidelink_uses_uplink_subframes_only() {
    let f = FrameConfig::tdd_config3();
    let mut s = SidelinkScheduler::new(f.clone(), SpectralTable::default(), SIDELINK_RBS);
    let done = s.add(Tti(0), 1, 15, 1).unwrap()[&1];
    assert_eq!(done, Tti(3));
}

#[test]
fn spectral_table_validation() {
    assert!(SpectralTable::new(vec![0.0; 16]).is_ok());
    assert!(SpectralTable::new(vec![0.0; 15]).is_err());
    let mut v = SpectralTable::default().values().to_vec();
    v.swap(3, 4);
    assert!(SpectralTable::new(v).is_err());
}
