use narlab_core::autodiff::cosine_lr;
use narlab_core::eval::{score_all, Tally};
use narlab_core::graph::{line_graph, sample_er, sample_k_regular};
use narlab_core::model::argmax;
use narlab_core::oracles::brute_force_check;
use narlab_core::taskgen::encoding::{random_scalar_positions, scalar_positions};
use narlab_core::taskgen::shard::{instance_from_line, instance_to_line};
use narlab_core::taskgen::{make_instance, GraphGenerator};
use narlab_core::{DatasetConfig, Labels, OutputKind, ParamSet, Preset, Rng, Split, TaskId, Tensor};
use proptest::prelude::*;

fn task_strategy() -> impl Strategy<Value = TaskId> {
    (0..TaskId::ALL.len()).prop_map(|i| TaskId::ALL[i])
}

fn small_config(n: usize) -> DatasetConfig {
    let mut c = DatasetConfig::preset(Preset::Clrs);
    c.train_len = n;
    c
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn oracle_labels_pass_brute_force(task in task_strategy(), n in 1usize..=7, seed in any::<u64>()) {
        let inst = make_instance(task, &small_config(n), Split::Train, &mut Rng::new(seed)).unwrap();
        prop_assert!(brute_force_check(task, &inst.problem(), &inst.labels).unwrap());
    }

    #[test]
    fn k_regular_degrees_are_exact(half in 3usize..12, k in 1usize..5, seed in any::<u64>()) {
        let n = 2 * half;
        prop_assume!(k < n);
        let g = sample_k_regular(n, k, &mut Rng::new(seed)).unwrap();
        prop_assert!(g.degrees().iter().all(|&d| d == k));
        prop_assert_eq!(g.num_edges(), n * k / 2);
    }

    #[test]
    fn er_graphs_are_simple(n in 1usize..20, p in 0.0f64..=1.0, directed in any::<bool>(), seed in any::<u64>()) {
        let g = sample_er(n, p, directed, &mut Rng::new(seed)).unwrap();
        let mut seen = std::collections::HashSet::new();
        for e in g.edges() {
            prop_assert_ne!(e.u, e.v);
            let key = if directed { (e.u, e.v) } else { (e.u.min(e.v), e.u.max(e.v)) };
            prop_assert!(seen.insert(key));
        }
    }

    #[test]
    fn line_graph_edge_count(n in 2usize..12, seed in any::<u64>()) {
        let g = sample_er(n, 0.4, false, &mut Rng::new(seed)).unwrap();
        let expected: usize = g.degrees().iter().map(|&d| d * d.saturating_sub(1) / 2).sum();
        let l = line_graph(&g);
        prop_assert_eq!(l.num_nodes(), g.num_edges());
        prop_assert_eq!(l.adjacency().len(), expected);
    }

    #[test]
    fn shard_lines_round_trip(task in task_strategy(), n in 1usize..=9, seed in any::<u64>()) {
        let inst = make_instance(task, &small_config(n), Split::Val, &mut Rng::new(seed)).unwrap();
        let line = instance_to_line(&inst).unwrap();
        prop_assert_eq!(instance_from_line(&line).unwrap(), inst);
    }

    #[test]
    fn scores_are_permutation_invariant(
        n in 1usize..10,
        raw in proptest::collection::vec((0usize..10, 0usize..10), 10),
        seed in any::<u64>(),
    ) {
        let pred: Vec<usize> = raw.iter().take(n).map(|&(p, _)| p % n).collect();
        let truth: Vec<usize> = raw.iter().take(n).map(|&(_, t)| t % n).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        Rng::new(seed).shuffle(&mut perm);
        let relabel = |xs: &[usize]| {
            let mut out = vec![0; n];
            for (i, &x) in xs.iter().enumerate() {
                out[perm[i]] = perm[x];
            }
            Labels::new(OutputKind::NodePointer, out)
        };
        let a = score_all(
            &[Labels::new(OutputKind::NodePointer, pred.clone())],
            &[Labels::new(OutputKind::NodePointer, truth.clone())],
        ).unwrap();
        let b = score_all(&[relabel(&pred)], &[relabel(&truth)]).unwrap();
        prop_assert_eq!(a.node_acc, b.node_acc);
        prop_assert_eq!(a.graph_acc, b.graph_acc);
    }

    #[test]
    fn tallies_merge_like_sequential_adds(
        graphs in proptest::collection::vec(proptest::collection::vec(any::<(bool, bool)>(), 0..8), 1..6),
        cut in 0usize..6,
    ) {
        let labels: Vec<(Labels, Labels)> = graphs
            .iter()
            .map(|g| {
                let pred = g.iter().map(|&(p, _)| p as usize).collect();
                let truth = g.iter().map(|&(_, t)| t as usize).collect();
                (Labels::new(OutputKind::EdgeMask, pred), Labels::new(OutputKind::EdgeMask, truth))
            })
            .collect();
        let cut = cut.min(labels.len());
        let tally = |xs: &[(Labels, Labels)]| {
            let mut t = Tally::default();
            for (p, l) in xs {
                t.add(p, l).unwrap();
            }
            t
        };
        let whole = tally(&labels);
        prop_assert_eq!(tally(&labels[..cut]).merge(tally(&labels[cut..])), whole);
    }

    #[test]
    fn flatten_unflatten_and_interpolation_endpoints(
        rows in 1usize..4,
        cols in 1usize..4,
        seed in any::<u64>(),
        lambda in 0.0f64..=1.0,
    ) {
        let mut rng = Rng::new(seed);
        let mut mk = || {
            let mut p = ParamSet::new();
            p.weight("a", rows, cols, rows, &mut rng).unwrap();
            p.weight("b", cols, 2, cols, &mut rng).unwrap();
            p
        };
        let (a, b) = (mk(), mk());
        prop_assert_eq!(&a.unflatten(&a.flatten()).unwrap(), &a);
        prop_assert_eq!(&ParamSet::interpolate(&a, &b, 0.0).unwrap(), &a);
        prop_assert_eq!(&ParamSet::interpolate(&a, &b, 1.0).unwrap(), &b);
        let mid = ParamSet::interpolate(&a, &b, lambda).unwrap().flatten();
        for ((m, x), y) in mid.iter().zip(a.flatten()).zip(b.flatten()) {
            prop_assert!(*m >= x.min(y) - 1e-15 && *m <= x.max(y) + 1e-15);
        }
    }

    #[test]
    fn argmax_takes_lowest_maximal_index(xs in proptest::collection::vec(-3i32..3, 1..20)) {
        let ys: Vec<f64> = xs.iter().map(|&x| x as f64).collect();
        let i = argmax(&ys);
        let best = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(ys[i], best);
        prop_assert!(ys[..i].iter().all(|&y| y < best));
    }

    #[test]
    fn cosine_schedule_is_monotone(total in 1u64..5000, base in 1e-6f64..1.0) {
        let mut prev = f64::INFINITY;
        for step in (0..=total).step_by((total as usize / 50).max(1)) {
            let lr = cosine_lr(step, total, base);
            prop_assert!((0.0..=base).contains(&lr));
            prop_assert!(lr <= prev + 1e-18);
            prev = lr;
        }
        prop_assert_eq!(cosine_lr(0, total, base), base);
    }

    #[test]
    fn position_channels_stay_in_unit_interval(n in 1usize..64, seed in any::<u64>()) {
        let s = scalar_positions(n);
        prop_assert!(s.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.iter().all(|&x| (0.0..1.0).contains(&x)));
        let r = random_scalar_positions(n, &mut Rng::new(seed));
        prop_assert!(r.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(r.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn tensors_reject_wrong_lengths(rows in 0usize..5, cols in 0usize..5, extra in 1usize..3) {
        prop_assert!(Tensor::new(rows, cols, vec![0.0; rows * cols + extra]).is_err());
        prop_assert!(Tensor::new(rows, cols, vec![0.0; rows * cols]).is_ok());
    }
}

#[test]
fn regular_generator_requires_degree() {
    let mut c = DatasetConfig::preset(Preset::LClrsLen);
    assert_eq!(c.generator, GraphGenerator::KRegular);
    c.k_train = None;
    assert!(c.validate().is_err());
}
