use super::*;
use crate::booking::Region;
use crate::choice_model::LoadAttributes;
use crate::fleet::{DriverType, ResourceVector};
use rand::{Rng, SeedableRng};

fn network() -> Network {
    Network::new(
        vec![
            Region { id: RegionId(0), x: 0.0, y: 0.0 },
            Region { id: RegionId(1), x: 200.0, y: 0.0 },
            Region { id: RegionId(2), x: 0.0, y: 150.0 },
            Region { id: RegionId(3), x: 400.0, y: 300.0 },
        ],
        1.0,
    )
    .unwrap()
}

fn driver(at: u32, hours: f64) -> DriverAttributes {
    DriverAttributes {
        location: RegionId(at),
        domicile: RegionId(0),
        driver_type: DriverType::Solo,
        equipment: Equipment::DryVan,
        hours_remaining: hours,
        steps_since_home: 1,
    }
}

fn load(o: u32, d: u32, revenue: f64, net: &Network) -> AcceptedLoad {
    AcceptedLoad {
        attributes: LoadAttributes {
            origin: RegionId(o),
            destination: RegionId(d),
            equipment: Equipment::DryVan,
            miles: net.miles(RegionId(o), RegionId(d)).max(50.0),
            call_in: 0,
            pickup: 0,
            lane_daily_load: 0.0,
            dest_daily_demand: 0.0,
        },
        revenue,
    }
}

fn state(drivers: &[DriverAttributes], due: Vec<AcceptedLoad>) -> FleetState {
    let mut r = ResourceVector::default();
    for d in drivers {
        r.add(*d, 1);
    }
    let mut s = FleetState::new(r);
    s.loads.pending.insert(0, due);
    s
}

#[test]
fn contribution_examples() {
    let net = network();
    let c = Contribution::default();
    let a = driver(0, 14.0);
    assert_eq!(contribution(&a, None, 0, &net, &c), 0.0);
    let mut l = load(0, 1, 800.0, &net);
    assert_eq!(contribution(&a, Some(&l), 0, &net, &c), 800.0);
    // 100 mi deadhead.
    let half = Network::new(vec![Region { id: RegionId(0), x: 0.0, y: 0.0 }, Region { id: RegionId(1), x: 100.0, y: 0.0 }], 1.0).unwrap();
    l.attributes.origin = RegionId(1);
    assert!((contribution(&a, Some(&l), 0, &half, &c) - 650.0).abs() < 1e-12);
}

#[test]
fn single_driver_assign_or_hold() {
    let net = network();
    let s = state(&[driver(0, 14.0)], vec![load(0, 1, 500.0, &net)]);
    let vfa = ValueFunctionApprox::new(4, 20.0).unwrap();
    let sol = solve_dispatch(&s, &vfa, &net, &FleetParams::default(), &Contribution::default());
    assert_eq!(sol.decision.moves().count(), 1);
    assert!((sol.objective - 500.0).abs() < 1e-12);

    let mut vfa = ValueFunctionApprox::new(4, 20.0).unwrap();
    vfa.set(VfaKey { bucket: 1, location: RegionId(0), equipment: Equipment::DryVan }, 900.0).unwrap();
    let sol = solve_dispatch(&s, &vfa, &net, &FleetParams::default(), &Contribution::default());
    assert_eq!(sol.decision.moves().count(), 0);
    assert!((sol.objective - 900.0).abs() < 1e-12);
    // One more driver would take the load: 900 hold value vs 500 + v̄(dest) = 500.
    assert!((sol.duals[&driver(0, 14.0)] - 900.0).abs() < 1e-12);
}

fn random_instance(rng: &mut rand_chacha::ChaCha8Rng, net: &Network) -> (FleetState, ValueFunctionApprox) {
    let nd = rng.random_range(1..=6);
    let nl = rng.random_range(0..=6);
    let drivers: Vec<_> = (0..nd).map(|_| driver(rng.random_range(0..4), rng.random_range(2.0..14.0))).collect();
    let loads = (0..nl).map(|_| load(rng.random_range(0..4), rng.random_range(0..4), rng.random_range(100.0..1500.0), net)).collect();
    let mut vfa = ValueFunctionApprox::new(4, 20.0).unwrap();
    for loc in 0..4 {
        vfa.set(VfaKey { bucket: 1, location: RegionId(loc), equipment: Equipment::DryVan }, rng.random_range(0.0..600.0)).unwrap();
    }
    (state(&drivers, loads), vfa)
}

fn brute_force(s: &FleetState, vfa: &ValueFunctionApprox, net: &Network, p: &FleetParams, c: &Contribution) -> f64 {
    let units = s.drivers.units();
    let m = s.due_loads().len();
    fn go(i: usize, units: &[DriverAttributes], used: &mut Vec<bool>, x: &mut DispatchDecision, f: &dyn Fn(&DispatchDecision) -> Option<f64>) -> f64 {
        if i == units.len() {
            return f(x).unwrap_or(f64::NEG_INFINITY);
        }
        let mut best = {
            let mut y = x.clone();
            y.add(units[i], Decision::Hold, 1);
            go(i + 1, units, used, &mut y, f)
        };
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                let mut y = x.clone();
                y.add(units[i], Decision::Move(j), 1);
                best = best.max(go(i + 1, units, used, &mut y, f));
                used[j] = false;
            }
        }
        best
    }
    let f = |x: &DispatchDecision| {
        if s.validate_decision(x, net, p).is_empty() {
            decision_value(s, x, vfa, net, p, c).ok()
        } else {
            None
        }
    };
    go(0, &units, &mut vec![false; m], &mut DispatchDecision::default(), &f)
}

#[test]
fn matches_exhaustive_enumeration() {
    let net = network();
    let p = FleetParams::default();
    let c = Contribution::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let (s, vfa) = random_instance(&mut rng, &net);
        let sol = solve_dispatch(&s, &vfa, &net, &p, &c);
        assert!(s.validate_decision(&sol.decision, &net, &p).is_empty());
        let v = decision_value(&s, &sol.decision, &vfa, &net, &p, &c).unwrap();
        assert!((v - sol.objective).abs() < 1e-9);
        let oracle = brute_force(&s, &vfa, &net, &p, &c);
        assert!((sol.objective - oracle).abs() < 1e-9, "{} vs {oracle}", sol.objective);
    }
}

#[test]
fn duals_are_marginal_values() {
    let net = network();
    let p = FleetParams::default();
    let c = Contribution::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let (s, vfa) = random_instance(&mut rng, &net);
        let sol = solve_dispatch(&s, &vfa, &net, &p, &c);
        for (a, &dual) in &sol.duals {
            let mut more = s.clone();
            more.drivers.add(*a, 1);
            let bigger = solve_dispatch(&more, &vfa, &net, &p, &c);
            assert!((bigger.objective - sol.objective - dual).abs() < 1e-9);
        }
    }
}

#[test]
fn deterministic() {
    let net = network();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let (s, vfa) = random_instance(&mut rng, &net);
    let a = solve_dispatch(&s, &vfa, &net, &FleetParams::default(), &Contribution::default());
    let b = solve_dispatch(&s, &vfa, &net, &FleetParams::default(), &Contribution::default());
    assert_eq!(a, b);
}

#[test]
fn stepsize_examples() {
    let a = driver(0, 14.0);
    let mut vfa = ValueFunctionApprox::new(4, 1.0).unwrap();
    vfa.update(&BTreeMap::from([(a, 123.0)]), 2);
    assert_eq!(vfa.value(2, &a), 123.0);
    assert_eq!(vfa.iteration(), 1);

    let mut vfa = ValueFunctionApprox::new(4, 20.0).unwrap();
    vfa.set(vfa.key(0, &a), 50.0).unwrap();
    let mut last = 50.0;
    for _ in 0..200 {
        vfa.update(&BTreeMap::from([(a, 0.0)]), 0);
        let v = vfa.value(0, &a);
        assert!(v <= last && v >= 0.0);
        last = v;
    }
    assert!(last < 5.0);
}

#[test]
fn constant_duals_converge() {
    // Iterating v ← (1−γ_n) v + γ_n c by hand gives the same sequence.
    let a = driver(1, 14.0);
    let mut vfa = ValueFunctionApprox::new(4, 20.0).unwrap();
    let mut v = 0.0;
    for n in 0..2000u32 {
        let g = 20.0 / (20.0 + n as f64);
        v = (1.0 - g) * v + g * 300.0;
        vfa.update(&BTreeMap::from([(a, 300.0)]), 3);
    }
    assert!((vfa.value(3, &a) - v).abs() < 1e-9);
    assert!((v - 300.0).abs() < 1e-6);
}

#[test]
fn vfa_csv_round_trip() {
    let mut vfa = ValueFunctionApprox::new(4, 20.0).unwrap();
    vfa.set(VfaKey { bucket: 3, location: RegionId(2), equipment: Equipment::Rgn }, -1.25).unwrap();
    vfa.set(VfaKey { bucket: 0, location: RegionId(7), equipment: Equipment::DryVan }, 410.5).unwrap();
    let mut buf = Vec::new();
    write_vfa_csv(&vfa, &mut buf).unwrap();
    let back = read_vfa_csv(buf.as_slice(), 4, 20.0).unwrap();
    assert_eq!(back.entries(), vfa.entries());
    assert!(read_vfa_csv("t_bucket,location,equipment,value\n9,0,DryVan,1\n".as_bytes(), 4, 20.0).is_err());
}
