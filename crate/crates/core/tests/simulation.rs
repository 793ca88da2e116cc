use std::collections::HashSet;

use pbooster::seed;
use pbooster::socialsim::{
    generate_dataset, generate_graph, simulate_history, LinkOrigin, SimConfig,
};

#[test]
fn friend_of_friend_share_matches_config_over_ten_thousand_draws() {
    let g = generate_graph(&SimConfig {
        n_users: 300,
        rng_seed: 17,
        ..SimConfig::default()
    })
    .unwrap();
    let mut rng = seed::rng(99);
    let mut fof = 0usize;
    let mut total = 0usize;
    for u in 0..100 {
        let h = simulate_history(&g, u, 100, 0.16, &mut rng).unwrap();
        for l in &h.links {
            total += 1;
            match l.origin {
                LinkOrigin::FriendOfFriend => {
                    fof += 1;
                    assert!(g.are_friends(l.via, l.poster));
                    assert!(g.are_friends(u, l.via));
                }
                LinkOrigin::Friend => assert!(g.are_friends(u, l.poster)),
            }
            assert!(g.posts(l.poster).contains(&l.link));
        }
    }
    assert_eq!(total, 10_000);
    let share = fof as f64 / total as f64;
    assert!((share - 0.16).abs() <= 0.01, "share {share}");
}

#[test]
fn default_scale_yields_one_history_per_user_and_size() {
    let ds = generate_dataset(&SimConfig::default(), &[30, 50, 100]).unwrap();
    assert_eq!(ds.graph.len(), 1200);
    let total: usize = ds.sets.iter().map(|s| s.histories.len()).sum();
    assert_eq!(total, 3600);
    assert_eq!(ds.truth.len(), 3600);
    for set in &ds.sets {
        assert!(set.histories.iter().all(|h| h.len() == set.size));
        let owners: HashSet<&str> = set
            .histories
            .iter()
            .map(|h| ds.truth.get(&h.user).unwrap())
            .collect();
        assert_eq!(owners.len(), 1200);
    }
    for u in 0..ds.graph.len() {
        let d = ds.graph.friends(u).len();
        assert!((5..=50).contains(&d), "degree {d}");
    }
}

#[test]
fn tiny_dataset() {
    let ds = generate_dataset(
        &SimConfig {
            n_users: 10,
            degree_min: 2,
            degree_max: 4,
            ..SimConfig::default()
        },
        &[5],
    )
    .unwrap();
    assert_eq!(ds.sets[0].histories.len(), 10);
    assert!(ds.sets[0].histories.iter().all(|h| h.len() == 5));
}

#[test]
fn same_seed_same_dataset_different_seed_different_dataset() {
    let cfg = SimConfig {
        n_users: 200,
        rng_seed: 4,
        ..SimConfig::default()
    };
    let a = generate_dataset(&cfg, &[20]).unwrap();
    let b = generate_dataset(&cfg, &[20]).unwrap();
    assert_eq!(a.sets[0].histories, b.sets[0].histories);
    assert_eq!(a.truth, b.truth);
    let c = generate_dataset(&SimConfig { rng_seed: 5, ..cfg }, &[20]).unwrap();
    assert_ne!(a.sets[0].histories, c.sets[0].histories);
}
