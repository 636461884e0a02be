use cuedr_attack::{
    exhaustive_guess_oracle, feedback_leak_probe, keylogger_advantage, mapping_uniformity,
    phishing_portfolio_guess, simulate_keylogger_replay, simulate_random_guesser,
    simulate_screen_observer, AttackReport, DeskProfile, Observation,
};

fn profile(s: &str) -> DeskProfile {
    s.parse().unwrap()
}

fn assert_within(r: &AttackReport) {
    assert_eq!(
        r.within_3_sigma,
        Some(true),
        "\n{}",
        AttackReport::table([r])
    );
}

#[test]
fn exhaustive_oracle_finds_exactly_one_sequence() {
    for (p, sequences) in [("k4m2", 16), ("k2m3", 8), ("k3m3n5", 27), ("k1m4", 1)] {
        let r = exhaustive_guess_oracle(&profile(p), 11).unwrap();
        assert_eq!(r.sequences, sequences, "{p}");
        assert_eq!(r.successes, 1, "{p}");
        // every key sequence selects a different keyword path
        assert_eq!(r.distinct_paths, sequences, "{p}");
    }
}

#[test]
fn oracle_rejects_unenumerable_profiles() {
    assert!(exhaustive_guess_oracle(&profile("k26m6"), 1).is_err());
}

#[test]
fn random_guesser_matches_closed_form() {
    for p in ["k4m2", "k2m3", "k9m1", "k2m1"] {
        let r = simulate_random_guesser(&profile(p), 1, 20_000, 5).unwrap();
        assert_within(&r);
    }
}

#[test]
fn lockout_truncates_a_guessing_campaign() {
    let locked = simulate_random_guesser(&profile("k4m2l3"), 10, 20_000, 6).unwrap();
    assert_within(&locked);
    // 1 - (15/16)^3
    assert!((locked.analytic_rate - 0.176_025_390_625).abs() < 1e-12);
    assert!(locked.analytic_rate <= 3.0 / 16.0);
    let bound = 3.0 / 16.0 + 3.0 * locked.sigma.unwrap();
    assert!(locked.empirical_rate.unwrap() <= bound);

    let open = simulate_random_guesser(&profile("k4m2"), 10, 20_000, 6).unwrap();
    assert_within(&open);
    assert!(open.empirical_rate.unwrap() > locked.empirical_rate.unwrap() + 0.2);
}

#[test]
fn keylogger_gains_nothing_over_guessing() {
    for observed in [1, 10] {
        let a = keylogger_advantage(&profile("k4m2"), observed, 20_000, 21, 0.01).unwrap();
        assert_within(&a.replay);
        assert_within(&a.random);
        assert!(!a.advantage_detected, "observed {observed}: {:?}", a.test);
    }
}

#[test]
fn degenerate_single_key_alphabet_is_always_broken() {
    let p = profile("k1m3");
    assert_eq!(
        simulate_random_guesser(&p, 1, 200, 1).unwrap().successes,
        200
    );
    assert_eq!(
        simulate_keylogger_replay(&p, 1, 200, 1).unwrap().successes,
        200
    );
    let r = simulate_screen_observer(&p, 0, Observation::ScreenOnly, 200, 1).unwrap();
    assert_eq!(r.empirical_rate, Some(1.0));
}

#[test]
fn screen_observer_models() {
    let p = profile("k4m2");
    let full = simulate_screen_observer(&p, 1, Observation::Full, 2_000, 3).unwrap();
    assert_eq!(full.successes, full.trials);
    assert_eq!(full.analytic_rate, 1.0);
    assert_within(&full);
    let keys = simulate_screen_observer(&p, 1, Observation::KeysOnly, 20_000, 3).unwrap();
    assert_within(&keys);
    assert_eq!(keys.analytic_rate, 1.0 / 16.0);
    let screen = simulate_screen_observer(&p, 1, Observation::ScreenOnly, 20_000, 3).unwrap();
    assert_within(&screen);
    assert_eq!(screen.analytic_rate, 1.0 / 16.0);
}

#[test]
fn phishing_prefix_guesses() {
    let r = phishing_portfolio_guess(&profile("k4m2n10"), 1, 20_000, 8).unwrap();
    assert_eq!(r.analytic_rate, 0.1);
    assert_within(&r);
    let r = phishing_portfolio_guess(&profile("k4m2n10"), 2, 50_000, 8).unwrap();
    assert!((r.analytic_rate - 1.0 / 90.0).abs() < 1e-15);
    assert_within(&r);
    let r = phishing_portfolio_guess(&profile("k4m3n18"), 2, 50_000, 8).unwrap();
    assert!((r.analytic_rate - 1.0 / 306.0).abs() < 1e-15);
    assert_within(&r);
    assert!(phishing_portfolio_guess(&profile("k4m2"), 3, 10, 8).is_err());
}

#[test]
fn feedback_collisions_follow_remaining_portfolios() {
    let r = feedback_leak_probe(&profile("k26m6n18"), 4_000, 12).unwrap();
    assert!(r.all_within_3_sigma(), "\n{r}");
    assert_eq!(r.step(0).unwrap().analytic_rate, 1.0 / 17.0);
    assert_eq!(r.step(1).unwrap().analytic_rate, 1.0 / 16.0);
    assert_eq!(r.step(5).unwrap().analytic_rate, 1.0 / 12.0);
    assert_eq!(r.step(1).unwrap().samples, 4_000 * 25);

    let forced = feedback_leak_probe(&profile("k26m6n7"), 200, 12).unwrap();
    let last = forced.step(5).unwrap();
    assert_eq!(
        (last.candidates, last.collisions, last.samples),
        (1, 200 * 25, 200 * 25)
    );
}

#[test]
fn key_mappings_are_uniform() {
    let wide = mapping_uniformity(26, 50_000, 4).unwrap();
    assert!(!wide.positions.rejects_at(0.01), "{wide:?}");
    assert_eq!(wide.positions.degrees_of_freedom, 625.0);
    let narrow = mapping_uniformity(4, 50_000, 4).unwrap();
    assert!(!narrow.positions.rejects_at(0.01), "{narrow:?}");
    assert!(!narrow.permutations.unwrap().rejects_at(0.01), "{narrow:?}");
}

#[test]
fn reports_are_seed_reproducible() {
    let p = profile("k4m2l3");
    let a = simulate_random_guesser(&p, 4, 5_000, 99).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap();
    let b = pool
        .install(|| simulate_random_guesser(&p, 4, 5_000, 99))
        .unwrap();
    assert_eq!(a, b);
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    let c = simulate_random_guesser(&p, 4, 5_000, 100).unwrap();
    assert_ne!(a.successes, c.successes);
}

#[test]
fn full_scale_rows_are_analytic() {
    let r = AttackReport::analytic(
        "random-guesser",
        profile("k26m6"),
        cuedr_core::entropy::guess_probability(26, 6),
    );
    assert!((r.analytic_rate - 3.237e-9).abs() < 1e-12);
    assert!(r.within_3_sigma.is_none());
}
