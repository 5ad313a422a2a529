use num_bigint::BigUint;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use jcj_core::bench::loglog_slope;
use jcj_core::board::{verify_chain, Author, AuthorityKey, Board, EntryKind, Role, Transcript};
use jcj_core::elgamal::{Ciphertext, KeyPair};
use jcj_core::group::{derive_rng, GroupParams};
use jcj_core::protocol::{
    generate_scenario, Backend, Credential, DuplicatePolicy, Election, ElectionConfig, ScenarioSpec,
};
use jcj_core::tally::{audit, tally};

fn group() -> GroupParams {
    GroupParams::generate(64, b"properties").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn elgamal_roundtrip_and_homomorphism(seed in any::<u64>(), a in 1u64.., b in 1u64..) {
        let g = group();
        let mut rng = derive_rng(seed, "elgamal");
        let key = KeyPair::generate(&g, &mut rng);
        let ma = g.hash_to_group("m", &a.to_be_bytes());
        let mb = g.hash_to_group("m", &b.to_be_bytes());
        let (ca, _) = key.public.encrypt_random(&g, &ma, &mut rng).unwrap();
        let (cb, _) = key.public.encrypt_random(&g, &mb, &mut rng).unwrap();
        prop_assert_eq!(key.decrypt(&g, &ca), ma.clone());
        prop_assert_eq!(key.decrypt(&g, &ca.mul(&g, &cb)), g.mul(&ma, &mb));
        let r = g.random_scalar(&mut rng);
        prop_assert_eq!(key.decrypt(&g, &key.public.reencrypt(&g, &ca, &r)), ma);
    }

    #[test]
    fn ciphertext_json_roundtrip(u in 1u64.., v in 1u64.., w in 1u64..) {
        let ct = Ciphertext::from_components([BigUint::from(u), BigUint::from(v), BigUint::from(w)]);
        let back: Ciphertext = serde_json::from_str(&serde_json::to_string(&ct).unwrap()).unwrap();
        prop_assert_eq!(back, ct);
    }

    #[test]
    fn board_chain_detects_any_payload_flip(
        payloads in prop::collection::vec(prop::collection::vec(any::<u8>(), 1..24), 1..12),
        pick in any::<prop::sample::Index>(),
        bit in 0u8..8,
    ) {
        let reg = AuthorityKey::from_seed("registrar-1", Role::Registrar, [1; 32]);
        let mut board = Board::new(vec![reg.info()], &reg).unwrap();
        for p in &payloads {
            board.append(EntryKind::Ballot, p.clone(), Author::Anonymous).unwrap();
        }
        let t = board.snapshot();
        prop_assert!(verify_chain(&t).valid);
        prop_assert_eq!(Transcript::from_jsonl(&t.to_jsonl()).unwrap(), t.clone());
        let mut bad = t.clone();
        let k = 1 + pick.index(payloads.len());
        let payload = &mut bad.entries[k].payload;
        let i = pick.index(payload.len());
        payload[i] ^= 1 << bit;
        prop_assert!(!verify_chain(&bad).valid);
    }

    #[test]
    fn slope_recovers_exponent(k in 0.5f64..3.0, c in 0.1f64..100.0) {
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0].iter().map(|&x: &f64| (x, c * x.powf(k))).collect();
        prop_assert!((loglog_slope(&pts).unwrap() - k).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn backends_agree_with_ground_truth(
        seed in any::<u64>(),
        honest in 1usize..10,
        dup in 0usize..4,
        invalid in 0usize..4,
        coerced in 0usize..3,
        keep_first in any::<bool>(),
    ) {
        let spec = ScenarioSpec::new(honest, dup.min(honest), invalid, coerced);
        for backend in Backend::ALL {
            let mut config = ElectionConfig::new("prop", &["a", "b", "c"], backend, seed);
            if keep_first {
                config.duplicate_policy = DuplicatePolicy::KeepFirst;
            }
            let mut s = generate_scenario(&config, spec).unwrap();
            let out = tally(&mut s.election).unwrap();
            prop_assert_eq!(&out.result.counts, &s.expected);
            for c in &s.coercions {
                prop_assert!(!out.trace.counted.contains(&c.fake_ballot));
                prop_assert!(out.trace.counted.contains(&c.real_ballot));
            }
            prop_assert!(audit(&s.election.board.snapshot(), backend).ok);
        }
    }

    #[test]
    fn canonical_counts_follow_formulas(seed in any::<u64>(), n in 0usize..12, dup in 0usize..4, invalid in 0usize..4) {
        let dup = dup.min(n);
        let spec = ScenarioSpec::new(n, dup, invalid, 0);
        let mut s = generate_scenario(&ElectionConfig::new("f", &["a", "b"], Backend::Quadratic, seed), spec).unwrap();
        let r = tally(&mut s.election).unwrap().result;
        let (n1, n2, l) = ((n + dup + invalid) as u64, (n + invalid) as u64, n as u64);
        prop_assert_eq!(r.counters.pet_count, n1 * n1.saturating_sub(1) / 2 + n2 * l);
        let mut s = generate_scenario(&ElectionConfig::new("f", &["a", "b"], Backend::Linear, seed), spec).unwrap();
        let r = tally(&mut s.election).unwrap().result;
        prop_assert_eq!(r.counters.hash_eval_count, n1 + n2 + l);
    }
}

/// Chi-square goodness of fit of byte nibbles against uniform.
fn nibble_p_value(samples: &[Vec<u8>]) -> f64 {
    let mut bins = [0f64; 16];
    for s in samples {
        for b in s {
            bins[(b >> 4) as usize] += 1.0;
            bins[(b & 15) as usize] += 1.0;
        }
    }
    let total: f64 = bins.iter().sum();
    let expected = total / 16.0;
    let stat: f64 = bins.iter().map(|o| (o - expected).powi(2) / expected).sum();
    1.0 - ChiSquared::new(15.0).unwrap().cdf(stat)
}

#[test]
fn coercer_view_of_fake_credentials_is_uniform() {
    let mut e = Election::setup(ElectionConfig::new("uniform", &["a", "b"], Backend::Linear, 5)).unwrap();
    let real: Vec<Vec<u8>> = e
        .register(1000)
        .unwrap()
        .into_iter()
        .map(|v| v.credential.key())
        .collect();
    let fake: Vec<Vec<u8>> = (0..1000)
        .map(|_| match e.fresh_credential() {
            Credential::Fhe { sigma, .. } => sigma,
            Credential::Classical(_) => unreachable!(),
        })
        .collect();
    assert!(nibble_p_value(&real) > 1e-3);
    assert!(nibble_p_value(&fake) > 1e-3);
    let mut all = real.clone();
    all.extend(fake.iter().cloned());
    all.sort();
    all.dedup();
    assert_eq!(all.len(), 2000);
}
