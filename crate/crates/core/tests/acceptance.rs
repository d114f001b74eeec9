mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;

use mtms_core::crypto::{
    auth_tag, dhke_shared, verify_tag, CipherKind, DhkeParams, KeyPair, KeyRegistry,
    Signature, SignerId, SymmetricKey,
};
use mtms_core::ids::DeviceId;
use mtms_core::protocol::{select_d2d_pairs, SelectionParams, Variant};
use mtms_core::sim::{
    metrics::nan_mean, results_to_string, run_config, sweep, ResultRow, RunOptions, RunResult,
    ScenarioConfig, SweepGrid,
};
use mtms_core::trust::{
    classify, compute_nrv, record_malicious, ClassThresholds, NrvMode, ReliabilityClass,
    TrustLedger, TrustProfile,
};
use num_bigint::BigUint;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

const DEVICES: u32 = 200;
const SEEDS: u64 = 20;
const FRACTIONS: [f64; 7] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
const FILE_SIZES: [u64; 5] = [5_000, 50_000, 500_000, 40_000_000, 80_000_000];

type Verdict = Result<String, String>;

fn base() -> ScenarioConfig {
    ScenarioConfig {
        devices: DEVICES,
        ..Default::default()
    }
}

fn grid(variants: &[Variant], fractions: &[f64], sizes: &[u64]) -> SweepGrid {
    SweepGrid {
        variants: variants.to_vec(),
        malicious_fractions: fractions.to_vec(),
        file_bits: sizes.to_vec(),
        seeds: (1..=SEEDS).collect(),
    }
}

fn run_grid(g: &SweepGrid) -> Vec<RunResult> {
    let out = sweep(&base(), g, true);
    assert!(out.failures.is_empty(), "sweep failures: {:?}", out.failures);
    out.results
}

/// Per-point mean of `field`, skipping undefined values.
fn point_mean<F: Fn(&ResultRow) -> f64>(
    results: &[RunResult],
    variant: Variant,
    pick: impl Fn(&ResultRow) -> bool,
    field: F,
) -> f64 {
    nan_mean(
        results
            .iter()
            .map(|r| &r.row)
            .filter(|row| row.variant == variant && pick(row))
            .map(&field),
    )
}

fn pct_eq(row: &ResultRow, f: f64) -> bool {
    (row.malicious_pct - f * 100.0).abs() < 1e-6
}

fn crypto_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xd1ce);
    let primes: Vec<u64> = common::primes_below(4000).into_iter().filter(|&p| p >= 11).collect();
    let mut generators = BTreeMap::new();
    let mut triples = 0;
    while triples < 1000 {
        let q = primes[rng.random_range(0..primes.len())];
        let alpha = *generators.entry(q).or_insert_with(|| common::smallest_generator(q));
        let params = DhkeParams::new(q.into(), alpha.into()).map_err(|e| e.to_string())?;
        let xi = rng.random_range(1..=q - 2);
        let xj = rng.random_range(1..=q - 2);
        let (yi, yj) = (common::brute_pow(alpha, xi, q), common::brute_pow(alpha, xj, q));
        if yi == q - 1 || yj == q - 1 {
            continue;
        }
        let a = KeyPair::from_secret(&params, xi.into()).map_err(|e| e.to_string())?;
        let b = KeyPair::from_secret(&params, xj.into()).map_err(|e| e.to_string())?;
        if *a.public() != BigUint::from(yi) || *b.public() != BigUint::from(yj) {
            return Err(format!("public key mismatch at q={q} x={xi}"));
        }
        let kij = dhke_shared(b.public(), a.secret(), &params).map_err(|e| e.to_string())?;
        let kji = dhke_shared(a.public(), b.secret(), &params).map_err(|e| e.to_string())?;
        let oracle = common::brute_pow(yj, xi, q);
        if kij != kji || *kij.value() != BigUint::from(oracle) {
            return Err(format!("asymmetric secret at q={q} xi={xi} xj={xj}"));
        }
        triples += 1;
    }

    let key = random_key(&mut rng);
    let sizes = [0usize, 1, 15, 16, 17, 1000, 65_536, 1 << 20];
    for cipher in [CipherKind::ChaCha20Poly1305, CipherKind::Aes256Gcm] {
        for &n in &sizes {
            let mut pt = vec![0u8; n];
            rng.fill_bytes(&mut pt);
            let ct = cipher.encrypt(&pt, &key);
            if cipher.decrypt(&ct, &key).as_deref() != Ok(&pt[..]) {
                return Err(format!("{} roundtrip failed at {n} B", cipher.name()));
            }
        }
    }

    let mut reg = KeyRegistry::default();
    reg.register(SignerId::Gateway, [7; 32]);
    reg.register(SignerId::Device(DeviceId(1)), [8; 32]);
    let mut false_accepts = 0;
    let mutations = 10_000;
    for i in 0..mutations {
        let len = rng.random_range(1..512);
        let mut msg = vec![0u8; len];
        rng.fill_bytes(&mut msg);
        let accepted = match i % 4 {
            0 | 1 => {
                let cipher = if i % 4 == 0 { CipherKind::ChaCha20Poly1305 } else { CipherKind::Aes256Gcm };
                let ct = cipher.encrypt(&msg, &key);
                let bad = mutate(&mut rng, &ct);
                cipher.decrypt(&bad, &key).is_ok()
            }
            2 => {
                let tag = auth_tag(&msg, &key);
                if rng.random_bool(0.5) {
                    verify_tag(&mutate(&mut rng, &msg), &key, &tag)
                } else {
                    let mut t = *tag.as_bytes();
                    let bit = rng.random_range(0..t.len() * 8);
                    t[bit / 8] ^= 1 << (bit % 8);
                    verify_tag(&msg, &key, &mtms_core::crypto::AuthTag::from_bytes(t))
                }
            }
            _ => {
                let sig = reg.sign(&msg, SignerId::Gateway).map_err(|e| e.to_string())?;
                match rng.random_range(0..3) {
                    0 => reg.verify_sig(&mutate(&mut rng, &msg), &sig, SignerId::Gateway),
                    1 => {
                        let mut s: Signature = sig;
                        let bit = rng.random_range(0..s.bytes.len() * 8);
                        s.bytes[bit / 8] ^= 1 << (bit % 8);
                        reg.verify_sig(&msg, &s, SignerId::Gateway)
                    }
                    _ => reg.verify_sig(&msg, &sig, SignerId::Device(DeviceId(1))),
                }
            }
        };
        false_accepts += usize::from(accepted);
    }
    let detail = format!(
        "{triples} DHKE triples match oracle; roundtrip 0 B..1 MB on 2 ciphers; {false_accepts}/{mutations} false accepts"
    );
    if false_accepts == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_key(rng: &mut ChaCha8Rng) -> SymmetricKey {
    let mut k = [0u8; 32];
    rng.fill_bytes(&mut k);
    SymmetricKey::from_bytes(k)
}

/// A byte string guaranteed to differ from `data`.
fn mutate(rng: &mut ChaCha8Rng, data: &[u8]) -> Vec<u8> {
    let mut out = data.to_vec();
    match rng.random_range(0..4) {
        0 if !out.is_empty() => {
            let bit = rng.random_range(0..out.len() * 8);
            out[bit / 8] ^= 1 << (bit % 8);
        }
        1 if !out.is_empty() => {
            let i = rng.random_range(0..out.len());
            out[i] = out[i].wrapping_add(rng.random_range(1..=255));
        }
        2 if !out.is_empty() => {
            out.truncate(rng.random_range(0..out.len()));
        }
        _ => out.push(rng.random()),
    }
    assert_ne!(out, data);
    out
}

fn trust_suite() -> Verdict {
    let d = DeviceId(1);
    let nrv = |srf, mdc| compute_nrv(&TrustProfile::with_mdc(d, srf, mdc).unwrap());
    let cases = [
        (nrv(0.7, 0) == 0.7, "srf 0.7, mdc 0 -> 0.7"),
        (nrv(0.2, 3) == 3.0, "srf 0.2, mdc 3 -> 3"),
        (nrv(1.0, 0) == 1.0, "srf 1.0, mdc 0 -> 1.0"),
        (nrv(0.0, 0) == 0.0, "srf 0, mdc 0 -> 0"),
        (classify(3.0, 3) == ReliabilityClass::Banned, "(3, 3) banned"),
        (classify(0.9, 0) == ReliabilityClass::High, "(0.9, 0) high"),
        (classify(0.5, 0) == ReliabilityClass::Medium, "(0.5, 0) medium"),
        (classify(0.0, 0) == ReliabilityClass::Low, "(0, 0) low"),
        (classify(2.0 / 3.0, 0) == ReliabilityClass::High, "2/3 is high"),
        (classify(1.0 / 3.0, 0) == ReliabilityClass::Medium, "1/3 is medium"),
    ];
    if let Some((_, name)) = cases.iter().find(|(ok, _)| !ok) {
        return Err(format!("example failed: {name}"));
    }

    let mut ledger = TrustLedger::from_srf(NrvMode::Social, [(d, 1.0)]).unwrap();
    let t = ClassThresholds::default();
    for expect in 1..=2 {
        ledger = record_malicious(d, ledger).map_err(|e| e.to_string())?;
        let p = *ledger.profile(d).unwrap();
        if p.mdc != expect || p.nrv != f64::from(expect) || p.class(&t) != ReliabilityClass::Banned {
            return Err(format!("after {expect} records: {p:?}"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for _ in 0..100_000 {
        let srf: f64 = rng.random();
        let mdc = if rng.random_bool(0.3) { rng.random_range(1..50) } else { 0 };
        let p = TrustProfile::with_mdc(d, srf, mdc).unwrap();
        let expect_nrv = if mdc == 0 { srf } else { f64::from(mdc) };
        let class = p.class(&t);
        let bins = [
            mdc >= 1,
            mdc == 0 && p.nrv >= t.high_lower,
            mdc == 0 && p.nrv >= t.medium_lower && p.nrv < t.high_lower,
            mdc == 0 && p.nrv < t.medium_lower,
        ];
        let classes = [
            ReliabilityClass::Banned,
            ReliabilityClass::High,
            ReliabilityClass::Medium,
            ReliabilityClass::Low,
        ];
        if p.nrv != expect_nrv || bins.iter().filter(|b| **b).count() != 1 {
            return Err(format!("nrv or partition broken for {p:?}"));
        }
        let want = classes[bins.iter().position(|b| *b).unwrap()];
        if class != want {
            return Err(format!("{p:?} classed {class}, want {want}"));
        }
        let mut l = TrustLedger::from_srf(NrvMode::Social, [(d, srf)]).unwrap();
        let before = l.class_of(d, &t).unwrap();
        l.record_malicious(d).unwrap();
        if before == ReliabilityClass::Banned || l.class_of(d, &t).unwrap() != ReliabilityClass::Banned {
            return Err(format!("ban rule broken at srf {srf}"));
        }
        checked += 1;
    }
    Ok(format!("{} examples, ban after 1 and 2 records, {checked} random profiles partition", cases.len()))
}

fn fig2(results: &[RunResult]) -> Verdict {
    let wc = |v, f| point_mean(results, v, |r| pct_eq(r, f) && r.file_bits == 500_000, |r| r.wasted_capacity_pct);
    let mut notes = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    let mut ok = true;
    for &f in &FRACTIONS {
        let (d, s, st) = (wc(Variant::D2d, f), wc(Variant::Sd2d, f), wc(Variant::Std2d, f));
        let target = f * base().tamper_prob * 100.0;
        let good = d >= prev && (d - target).abs() <= 15.0 && st < 5.0 && st <= s && s <= d;
        ok &= good;
        prev = d;
        notes.push(format!("{:.0}%: d2d {d:.2} sd2d {s:.2} std2d {st:.2}", f * 100.0));
    }
    let detail = notes.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fig3(results: &[RunResult]) -> Verdict {
    let kb = point_mean(results, Variant::Std2d, |r| pct_eq(r, 0.6), |r| r.mean_noncorrupted_kbits);
    let detail = format!("std2d at 60% downloads {kb:.1} of 500 kbits (need >= 475)");
    if kb >= 475.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Least-squares slope of y on x and the two-sided p-value of a zero slope.
fn ols(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let sse: f64 = points
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    let se = (sse / (n - 2.0) / sxx).sqrt();
    let t = slope / se;
    let dist = StudentsT::new(0.0, 1.0, n - 2.0).unwrap();
    let p = if se == 0.0 { 0.0 } else { 2.0 * (1.0 - dist.cdf(t.abs())) };
    (slope, p)
}

fn fig4(results: &[RunResult]) -> Verdict {
    let pts = |v: Variant| -> Vec<(f64, f64)> {
        results
            .iter()
            .map(|r| &r.row)
            .filter(|r| r.variant == v && !r.wasted_energy_frac.is_nan())
            .map(|r| (r.malicious_pct / 100.0, r.wasted_energy_frac))
            .collect()
    };
    let (d, p) = ols(&pts(Variant::D2d));
    let (s, _) = ols(&pts(Variant::Std2d));
    let detail = format!("d2d slope {d:.4} (p = {p:.2e}), std2d slope {s:.4}, ratio {:.3}", s.abs() / d);
    if d > 0.0 && p < 0.05 && s.abs() < 0.2 * d {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fig5(results: &[RunResult]) -> Verdict {
    let at = |bits: u64, field: fn(&ResultRow) -> f64| {
        point_mean(results, Variant::Std2d, |r| r.file_bits == bits, field)
    };
    let relay: Vec<f64> = FILE_SIZES.iter().map(|&b| at(b, |r| r.relay_sec_pct)).collect();
    let recv: Vec<f64> = FILE_SIZES.iter().map(|&b| at(b, |r| r.receiver_sec_pct)).collect();
    let ok = relay.iter().zip(&recv).all(|(a, b)| b > a)
        && relay.windows(2).all(|w| w[1] <= w[0])
        && recv.windows(2).all(|w| w[1] <= w[0]);
    let detail = FILE_SIZES
        .iter()
        .zip(relay.iter().zip(&recv))
        .map(|(b, (a, c))| format!("{} bits: relay {a:.2}% receiver {c:.2}%", b))
        .collect::<Vec<_>>()
        .join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fig6(results: &[RunResult]) -> Verdict {
    let at = |v, bits: u64| point_mean(results, v, |r| r.file_bits == bits, |r| r.download_energy_j);
    let s: Vec<f64> = FILE_SIZES.iter().map(|&b| at(Variant::Std2d, b)).collect();
    let u: Vec<f64> = FILE_SIZES.iter().map(|&b| at(Variant::Unicast, b)).collect();
    let from = (0..s.len()).find(|&i| (i..s.len()).all(|j| s[j] < u[j]));
    let detail = FILE_SIZES
        .iter()
        .zip(s.iter().zip(&u))
        .map(|(b, (a, c))| format!("{b}: {a:.4} vs {c:.4} J"))
        .collect::<Vec<_>>()
        .join("; ");
    match from {
        Some(i) if (i..s.len() - 1).all(|j| u[j + 1] - s[j + 1] >= u[j] - s[j]) => {
            Ok(format!("std2d below unicast from {} bits; {detail}", FILE_SIZES[i]))
        }
        _ => Err(detail),
    }
}

fn detection(all: &[&RunResult]) -> Verdict {
    let secure: Vec<_> = all.iter().filter(|r| r.row.variant.is_secure()).collect();
    let mut totals = (0, 0, 0, 0);
    let mut bad = 0;
    for r in &secure {
        let d = &r.detection;
        totals.0 += d.verified_corrupted;
        totals.1 += d.correctly_attributed;
        totals.2 += d.false_increments;
        totals.3 += d.mdc_increments;
        if !d.is_perfect() || d.mdc_increments != d.correctly_attributed {
            bad += 1;
        }
    }
    let detail = format!(
        "{} secure runs: {} corrupted, {} attributed, {} false, {} increments, {bad} imperfect runs",
        secure.len(),
        totals.0,
        totals.1,
        totals.2,
        totals.3
    );
    if bad == 0 && totals.0 > 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism() -> Verdict {
    let cfg = ScenarioConfig {
        malicious_fraction: 0.3,
        seed: 11,
        ..base()
    };
    let once = run_config(&cfg, RunOptions::default()).map_err(|e| e.to_string())?;
    let twice = run_config(&cfg, RunOptions::default()).map_err(|e| e.to_string())?;
    if results_to_string(&[once.row]) != results_to_string(&[twice.row]) {
        return Err("repeated run differs".into());
    }
    let g = SweepGrid {
        variants: vec![Variant::D2d, Variant::Sd2d, Variant::Std2d],
        malicious_fractions: vec![0.0, 0.3, 0.6],
        file_bits: vec![500_000],
        seeds: vec![1, 2, 3],
    };
    let csv = |parallel| {
        let rows: Vec<ResultRow> = sweep(&base(), &g, parallel).results.into_iter().map(|r| r.row).collect();
        results_to_string(&rows)
    };
    let (serial, parallel) = (csv(false), csv(true));
    if serial != parallel {
        return Err("serial and parallel sweeps differ".into());
    }
    Ok(format!("repeat identical; serial == parallel over {} rows", serial.lines().count() - 1))
}

fn fallback_totality() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut fallbacks, mut matched) = (0, 0);
    for i in 0..10_000 {
        let n = rng.random_range(1..40);
        let reports = common::random_topology(&mut rng, n);
        let classes = common::random_classes(&mut rng, n);
        let params = SelectionParams {
            serve_direct_cqi: rng.random_range(1..=15),
            cqi_threshold: rng.random_range(0..=15),
            r_max: rng.random_range(1..=6),
        };
        let out = select_d2d_pairs(&reports, |d| classes[&d], &params);
        if !out.is_total() {
            return Err(format!("topology {i} partially matched"));
        }
        common::check_assignment(&reports, &classes, &params, &out)
            .map_err(|e| format!("topology {i}: {e}"))?;
        if out.fallback {
            fallbacks += 1;
        } else {
            matched += 1;
        }
    }
    Ok(format!("10000 topologies: {matched} fully matched, {fallbacks} fallback"))
}

fn main() -> ExitCode {
    let trends = run_grid(&grid(&[Variant::D2d, Variant::Sd2d, Variant::Std2d], &FRACTIONS, &[500_000]));
    let sizes = run_grid(&grid(&[Variant::Std2d, Variant::Unicast], &[0.0], &FILE_SIZES));
    let all: Vec<&RunResult> = trends.iter().chain(&sizes).collect();

    let verdicts: Vec<(&str, Verdict)> = vec![
        ("crypto property suite", crypto_suite()),
        ("reliability value suite", trust_suite()),
        ("fig2 wasted capacity trend", fig2(&trends)),
        ("fig3 non-corrupted kbits", fig3(&trends)),
        ("fig4 wasted energy slope", fig4(&trends)),
        ("fig5 security energy share", fig5(&sizes)),
        ("fig6 download energy crossover", fig6(&sizes)),
        ("detection completeness and soundness", detection(&all)),
        ("determinism", determinism()),
        ("fallback totality", fallback_totality()),
    ];
    let mut failed = 0;
    for (name, v) in &verdicts {
        match v {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria pass", verdicts.len() - failed, verdicts.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
