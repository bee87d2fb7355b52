use sleeplite::features::rfe::{rfe_select, RfeConfig};

mod common;
use common::rfe::*;

#[test]
fn planted_features_survive() {
    let (names, x, y) = planted(500, 1);
    let sel = rfe_select(&names, &x, &y, 5, 3, &RfeConfig::default()).unwrap();
    assert_eq!(sel.kept_names.len(), 5);
    let hits = sel
        .kept_names
        .iter()
        .filter(|n| n.starts_with("inf"))
        .count();
    assert!(hits >= 4, "kept {:?}", sel.kept_names);
    let dropped: usize = sel.trace.iter().map(|r| r.dropped.len()).sum();
    assert_eq!(dropped, 25);
}

#[test]
fn same_seed_same_selection() {
    let (names, x, y) = planted(200, 2);
    let cfg = RfeConfig {
        n_trees: 30,
        ..RfeConfig::default()
    };
    let a = rfe_select(&names, &x, &y, 8, 11, &cfg).unwrap();
    let b = rfe_select(&names, &x, &y, 8, 11, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn one_below_the_width_is_one_round() {
    let (names, x, y) = planted(100, 3);
    let cfg = RfeConfig {
        n_trees: 20,
        ..RfeConfig::default()
    };
    let sel = rfe_select(&names, &x, &y, 29, 0, &cfg).unwrap();
    assert_eq!(sel.trace.len(), 1);
    assert_eq!(sel.trace[0].dropped.len(), 1);
    assert_eq!(sel.kept_names.len(), 29);
    // kept names stay in column order
    let pos: Vec<usize> = sel
        .kept_names
        .iter()
        .map(|n| names.iter().position(|m| m == n).unwrap())
        .collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn rejects_bad_targets_and_small_sets() {
    let (names, x, y) = planted(100, 4);
    let cfg = RfeConfig::default();
    assert!(rfe_select(&names, &x, &y, 0, 0, &cfg).is_err());
    assert!(rfe_select(&names, &x, &y, 30, 0, &cfg).is_err());
    assert!(rfe_select(&names, &x[..40], &y[..40], 5, 0, &cfg).is_err());
}
