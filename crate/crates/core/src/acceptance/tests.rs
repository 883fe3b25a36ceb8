use super::*;
use crate::booking::SyntheticNetwork;
use crate::fleet::{DriverAttributes, DriverScenario, DriverType, ResourceVector};

fn booking() -> BookingConfig {
    SyntheticNetwork::default().build(&mut rng::stream(3, &[])).unwrap()
}

fn quiet(mut b: BookingConfig) -> BookingConfig {
    b.outbound_intensity.values_mut().for_each(|v| *v = 0.0);
    b
}

fn offers_from(b: &BookingConfig, t: u32, seed: u64) -> Vec<AcceptedLoad> {
    b.sample_offers(t, &mut rng::stream(seed, &[]))
        .into_iter()
        .map(|o| AcceptedLoad { revenue: 2.5 * o.attributes.miles, attributes: o.attributes })
        .collect()
}

fn fleet(b: &BookingConfig, n: u32) -> FleetState {
    let scenario = DriverScenario { drivers: n, ..DriverScenario::default() };
    FleetState::new(scenario.generate(&b.network, &FleetParams::default(), &mut rng::stream(4, &[])))
}

fn model<'a>(b: &'a BookingConfig, p: &'a FleetParams, c: &'a Contribution, v: &'a ValueFunctionApprox) -> LookaheadModel<'a> {
    LookaheadModel { booking: b, fleet: p, costs: c, vfa: v }
}

#[test]
fn no_drivers_no_coverage() {
    let b = booking();
    let (p, c) = (FleetParams::default(), Contribution::default());
    let v = ValueFunctionApprox::new(4, 20.0).unwrap();
    let offers = offers_from(&b, 0, 9);
    let cfg = LookaheadConfig { n_paths: 3, horizon: 20, ..LookaheadConfig::default() };
    let cov = run_lookahead(&fleet(&b, 0), &offers, &cfg, model(&b, &p, &c, &v), &path_seeds(1, 0, 3)).unwrap();
    assert!(!cov.rho_bar.is_empty());
    assert!(cov.rho_bar.values().all(|&r| r == 0.0));
}

#[test]
fn lone_driver_covers_lone_load() {
    let b = quiet(booking());
    let (p, c) = (FleetParams::default(), Contribution::default());
    let v = ValueFunctionApprox::new(4, 20.0).unwrap();
    let mut offer = offers_from(&booking(), 0, 9).remove(0);
    offer.attributes.pickup = 5;
    let a = DriverAttributes {
        location: offer.attributes.origin,
        domicile: offer.attributes.origin,
        driver_type: DriverType::Team,
        equipment: offer.attributes.equipment,
        hours_remaining: 28.0,
        steps_since_home: 0,
    };
    let mut r = ResourceVector::default();
    r.add(a, 1);
    let cfg = LookaheadConfig { n_paths: 4, horizon: 10, ..LookaheadConfig::default() };
    let cov = run_lookahead(&FleetState::new(r), &[offer], &cfg, model(&b, &p, &c, &v), &path_seeds(2, 0, 4)).unwrap();
    assert_eq!(cov.rho_bar.len(), 1);
    assert_eq!(*cov.rho_bar.values().next().unwrap(), 1.0);
}

#[test]
fn matches_hand_replay() {
    let b = booking();
    let (p, c) = (FleetParams::default(), Contribution::default());
    let v = ValueFunctionApprox::new(4, 20.0).unwrap();
    let base = fleet(&b, 30);
    let offers: Vec<_> = offers_from(&b, 0, 12).into_iter().filter(|l| l.attributes.pickup <= 2).collect();
    assert!(!offers.is_empty());
    let cfg = LookaheadConfig { n_paths: 1, horizon: 2, ..LookaheadConfig::default() };
    let seeds = path_seeds(8, 0, 1);
    let cov = run_lookahead(&base, &offers, &cfg, model(&b, &p, &c, &v), &seeds).unwrap();

    // Replay: steps 0, 1, 2 with fresh demand sampled at 1 and 2.
    let mut s = base.clone();
    for l in &offers {
        s.loads.pending.entry(l.attributes.pickup).or_default().push(l.clone());
    }
    let mut g = rng::stream(seeds[0], &[]);
    let mut hand: BTreeMap<(u32, LoadKey), (f64, f64)> = BTreeMap::new();
    for t in 0..=2u32 {
        let sol = solve_dispatch(&s, &v, &b.network, &p, &c);
        let served: BTreeSet<usize> = sol.decision.moves().map(|(_, j, _)| j).collect();
        for (j, l) in s.due_loads().iter().enumerate() {
            let e = hand.entry((t, LoadKey::of(&l.attributes, p.miles_bucket))).or_default();
            e.0 += served.contains(&j) as u32 as f64;
            e.1 += 1.0;
        }
        s.advance_time(&sol.decision, Vec::new(), &[], &b.network, &p).unwrap();
        if t < 2 {
            for o in b.sample_offers(t + 1, &mut g) {
                if o.pickup_at <= 2 {
                    let revenue = cfg.market_rate * o.attributes.miles;
                    s.loads.pending.entry(o.pickup_at).or_default().push(AcceptedLoad { attributes: o.attributes, revenue });
                }
            }
        }
    }
    for (k, rho) in &cov.rho_bar {
        let (covered, accepted) = hand[k];
        assert_eq!(*rho, covered / accepted);
    }
}

#[test]
fn thresholds_and_isolation() {
    let b = booking();
    let (p, c) = (FleetParams::default(), Contribution::default());
    let mut v = ValueFunctionApprox::new(4, 20.0).unwrap();
    v.set(v.key(1, &fleet(&b, 1).drivers.units()[0]), 120.0).unwrap();
    let base = fleet(&b, 25);
    let (base0, v0) = (base.clone(), v.clone());
    let offers = offers_from(&b, 0, 5);
    let cfg = LookaheadConfig { n_paths: 5, horizon: 24, ..LookaheadConfig::default() };
    let seeds = path_seeds(3, 0, 5);
    let cov = run_lookahead(&base, &offers, &cfg, model(&b, &p, &c, &v), &seeds).unwrap();
    assert_eq!(base, base0);
    assert_eq!(v, v0);
    assert!(cov.rho_bar.values().all(|r| (0.0..=1.0).contains(r)));

    assert!(accept_loads(&offers, &cov, 0.0, p.miles_bucket).iter().all(|&x| x));
    assert!(accept_loads(&offers, &cov, 1.01, p.miles_bucket).iter().all(|&x| !x));
    let counts: Vec<usize> = [0.2, 0.5, 0.8]
        .iter()
        .map(|&th| accept_loads(&offers, &cov, th, p.miles_bucket).iter().filter(|&&x| x).count())
        .collect();
    assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");

    let mut rev = seeds.clone();
    rev.reverse();
    assert_eq!(run_lookahead(&base, &offers, &cfg, model(&b, &p, &c, &v), &rev).unwrap(), cov);
}

#[test]
fn rejects_bad_input() {
    let b = booking();
    let (p, c) = (FleetParams::default(), Contribution::default());
    let v = ValueFunctionApprox::new(4, 20.0).unwrap();
    let cfg = LookaheadConfig::default();
    assert!(run_lookahead(&fleet(&b, 2), &[], &cfg, model(&b, &p, &c, &v), &[1]).is_err());
    assert!(LookaheadConfig { theta_accept: 1.2, ..cfg }.validate().is_err());
    assert!(LookaheadConfig { n_paths: 0, ..cfg }.validate().is_err());
}

#[test]
fn coverage_csv_has_header() {
    let mut buf = Vec::new();
    write_coverage_csv(&CoverageEstimate::default(), &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "t_prime,origin,destination,equipment,miles_bucket,rho_bar\n");
}
