use fedminimax::federation::*;
use fedminimax::linalg::Vector;
use fedminimax::rng;
use proptest::prelude::*;

fn check_plan(plan: &PartitionPlan, n: usize, k: usize) {
    assert_eq!(plan.num_clients(), k);
    let mut all: Vec<usize> = plan.assignment.iter().flatten().copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..n).collect::<Vec<_>>());
    assert!(plan.assignment.iter().all(|a| !a.is_empty()));
}

#[test]
fn single_client_owns_everything() {
    let labels = vec![0, 1, 1, 0, 2];
    for scheme in [
        PartitionScheme::Iid,
        PartitionScheme::ByGroup,
        PartitionScheme::Dirichlet { beta: 0.3 },
    ] {
        let plan = partition(5, &labels, 1, scheme, 3).unwrap();
        assert_eq!(plan.assignment, vec![vec![0, 1, 2, 3, 4]]);
    }
}

#[test]
fn by_group_forced_assignment() {
    let labels = vec![0, 1, 0, 1, 1, 0];
    let plan = partition(6, &labels, 2, PartitionScheme::ByGroup, 0).unwrap();
    assert_eq!(plan.assignment, vec![vec![0, 2, 5], vec![1, 3, 4]]);
}

#[test]
fn errors() {
    assert!(partition(3, &[], 4, PartitionScheme::Iid, 0).is_err());
    assert!(partition(4, &[0, 0, 1, 1], 3, PartitionScheme::ByGroup, 0).is_err());
    assert!(partition(4, &[0, 0, 1, 1], 2, PartitionScheme::Dirichlet { beta: 0.0 }, 0).is_err());
}

#[test]
fn dirichlet_large_beta_approaches_iid() {
    let n = 10_000;
    let k = 10;
    let classes = 5;
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let plan = partition(n, &labels, k, PartitionScheme::Dirichlet { beta: 1000.0 }, 11).unwrap();
    check_plan(&plan, n, k);
    for c in 0..classes {
        let n_c = labels.iter().filter(|&&l| l == c).count() as f64;
        let tv: f64 = plan
            .assignment
            .iter()
            .map(|items| {
                let share = items.iter().filter(|&&i| labels[i] == c).count() as f64 / n_c;
                (share - 1.0 / k as f64).abs()
            })
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.05, "class {c}: tv {tv}");
    }
}

#[test]
fn listing_round_trip() {
    let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
    let plan = partition(40, &labels, 3, PartitionScheme::Dirichlet { beta: 0.5 }, 9).unwrap();
    let back = PartitionPlan::from_listing(&plan.to_listing()).unwrap();
    assert_eq!(back, plan);
}

#[test]
fn ledger_examples() {
    assert_eq!(expected_comm_rounds(100, 10), 10);
    assert_eq!(expected_comm_rounds(99, 10), 9);
    assert_eq!(expected_comm_rounds(37, 1), 37);
    let s = expected_sfo(100, 10);
    assert_eq!(s.exact, 200);
    assert_eq!(s.rounded, 220);
    let q = 7;
    assert_eq!(expected_sfo(q, q).exact, 2 * q + 2 * (q - 1));
}

#[test]
fn clusters_nonempty() {
    let mut r = rng::seeded(5);
    let pts: Vec<Vector> = (0..60).map(|_| rng::normal_vector(&mut r, 3, 1.0)).collect();
    let g = cluster_groups(&pts, 12, 1).unwrap();
    for id in 0..12 {
        assert!(g.contains(&id));
    }
    // duplicate points still give nonempty groups
    let same = vec![Vector::zeros(2); 5];
    let g = cluster_groups(&same, 5, 0).unwrap();
    let mut sorted = g.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
}

proptest! {
    #[test]
    fn partitions_are_disjoint_and_cover(
        n in 1usize..300,
        k_frac in 0.0f64..1.0,
        n_labels in 1usize..12,
        beta in 0.05f64..5.0,
        seed in any::<u64>(),
    ) {
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        let labels: Vec<usize> = (0..n).map(|i| (i * 7 + seed as usize) % n_labels).collect();
        for scheme in [PartitionScheme::Iid, PartitionScheme::Dirichlet { beta }] {
            let plan = partition(n, &labels, k, scheme, seed).unwrap();
            check_plan(&plan, n, k);
        }
        let groups = labels.iter().collect::<std::collections::BTreeSet<_>>().len();
        match partition(n, &labels, k, PartitionScheme::ByGroup, seed) {
            Ok(plan) => check_plan(&plan, n, k),
            Err(_) => prop_assert!(groups < k),
        }
    }

    #[test]
    fn sfo_never_exceeds_rounded(t in 1u64..100_000, q in 1u64..500) {
        let s = expected_sfo(t, q);
        prop_assert!(s.exact <= s.rounded);
    }
}
