use freightbid_web::demo::{diagnose_pair, price_curves, simulate_bandit, to_json};

const A: [f64; 4] = [-1.0, 0.5, 4.6, -2.3];
const B: [f64; 4] = [-3.0, 1.5, 1.0, -0.5];

#[test]
fn curves_have_grid_length_and_nonnegative_kg() {
    let c = price_curves(&A, &B, 0.4, 5.0, 41).unwrap();
    assert_eq!(c.prices.len(), 41);
    assert_eq!(c.kg.len(), 41);
    assert!(c.kg.iter().all(|&v| v >= -1e-10));
    assert!(c.prices.contains(&c.kg_price) && c.prices.contains(&c.exploit_price));
}

#[test]
fn certain_belief_has_no_knowledge_gradient() {
    let c = price_curves(&A, &B, 1.0, 50.0, 41).unwrap();
    assert!(c.kg.iter().all(|v| v.abs() < 1e-12));
    assert_eq!(c.kg_price, c.exploit_price);
    // expected revenue equals candidate 1 when q1 = 1
    for (e, r) in c.expected_revenue.iter().zip(&c.candidate_revenue[0]) {
        assert!((e - r).abs() < 1e-12);
    }
}

#[test]
fn pair_diagnosis_matches_hand_values() {
    let d = diagnose_pair(&A, &B, 1.0, 80).unwrap();
    assert_eq!(d.uninstructive, "at");
    assert!((d.p_hat.unwrap() - 2.0).abs() < 1e-12);
    assert!(d.member);
    // both utilities vanish at p̂ = 2, so M = (α₁ + β₁) / 2
    assert!((d.m1.unwrap() + 0.9).abs() < 1e-9);
    assert!((d.m2.unwrap() - 0.5).abs() < 1e-9);
    // q1 M1 + (1 - q1) M2 = -1/2  gives q1 = 1/1.4
    assert!((d.stationary_q1.unwrap() - 1.0 / 1.4).abs() < 1e-9);
    let q = d.confounding_q1.expect("KG settles on p̂ at tau = 1");
    let c = price_curves(&A, &B, q, 1.0, 80).unwrap();
    assert!((c.kg_price - 2.0).abs() < 1e-12);
}

#[test]
fn rejects_bad_inputs() {
    assert!(price_curves(&[1.0, 2.0], &B, 0.5, 1.0, 10).is_err());
    assert!(price_curves(&A, &B, 1.5, 1.0, 10).is_err());
    assert!(price_curves(&A, &B, 0.5, -1.0, 10).is_err());
    assert!(price_curves(&A, &B, 0.5, 1.0, 1).is_err());
    assert!(diagnose_pair(&A, &[f64::NAN, 1.0, 1.0, -1.0], 1.0, 10).is_err());
    assert!(simulate_bandit(1, 10, 300, 30.0, "kg,nope").is_err());
    assert!(simulate_bandit(1, 0, 300, 30.0, "kg").is_err());
}

#[test]
fn short_bandit_run_is_reproducible() {
    let a = simulate_bandit(3, 40, 20, 30.0, "kg, exploit").unwrap();
    assert_eq!(a.len(), 2);
    assert_eq!(a[0].policy, "kg");
    assert_eq!(a[1].avg_regret.last().unwrap().0, 40);
    assert!(a.iter().all(|p| p.avg_regret.iter().all(|&(_, r)| r >= 0.0)));
    let b = simulate_bandit(3, 40, 20, 30.0, "kg,exploit").unwrap();
    assert_eq!(to_json(&a).unwrap(), to_json(&b).unwrap());
}
