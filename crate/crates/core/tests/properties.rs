use cgssl_core::augment::{add_edge, apply, drop_edge, span_pair, AugmentationKind, AugmentationSpec};
use cgssl_core::encoder::{encode_graph, init_encoder, EncoderConfig};
use cgssl_core::graph::{Edge, Graph, Labels};
use cgssl_core::rng::seeded;
use cgssl_core::spectrum::{laplacian_spectrum, spectral_distance, Spectrum};
use ndarray::Array2;
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(128)
}

fn spectra(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..2.0, len)
}

/// Graph with `n` nodes, random edges and `n × 3` features.
fn graphs() -> impl Strategy<Value = Graph<f64>> {
    (2usize..20).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec((0..n, 0..n), 0..3 * n),
            prop::collection::vec(-2.0f64..2.0, n * 3),
        )
            .prop_map(|(n, pairs, feats)| {
                let mut edges: Vec<Edge> = pairs.into_iter().filter(|(a, b)| a != b).map(|(a, b)| (a.min(b), a.max(b))).collect();
                edges.sort_unstable();
                edges.dedup();
                Graph::new(n, edges, Array2::from_shape_vec((n, 3), feats).unwrap(), Labels::None).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn distance_is_a_metric((a, b, c) in (1usize..30).prop_flat_map(|n| (spectra(n), spectra(n), spectra(n)))) {
        let (a, b, c) = (Spectrum::new(a), Spectrum::new(b), Spectrum::new(c));
        let d = |x: &Spectrum<f64>, y: &Spectrum<f64>| spectral_distance(x, y).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!(d(&a, &b) >= 0.0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn laplacian_eigenvalues_lie_in_unit_range(g in graphs()) {
        let s = laplacian_spectrum(&g).unwrap();
        prop_assert_eq!(s.len(), g.n());
        for v in &s.values {
            prop_assert!((-1e-10..=2.0 + 1e-10).contains(v), "{}", v);
        }
        prop_assert!(s.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn encoding_commutes_with_relabeling(g in graphs(), seed in any::<u64>(), normalize in any::<bool>()) {
        let mut rng = seeded(seed);
        let mut perm: Vec<usize> = (0..g.n()).collect();
        use rand::Rng;
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let mut cfg = EncoderConfig::new(vec![3, 6, 4], 5);
        cfg.normalize_output = normalize;
        let state = init_encoder::<f64>(&cfg, &mut rng).unwrap();
        let z = encode_graph(&state, &cfg, &g);
        let zp = encode_graph(&state, &cfg, &g.permuted(&perm).unwrap());
        match (z, zp) {
            (Ok(z), Ok(zp)) => {
                for i in 0..g.n() {
                    for (a, b) in z.z.row(i).iter().zip(zp.z.row(perm[i])) {
                        prop_assert!((a - b).abs() <= 1e-10);
                    }
                }
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "only one labeling failed"),
        }
    }

    #[test]
    fn augmentations_leave_features_alone(g in graphs(), seed in any::<u64>(), p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
        let before = g.clone();
        let mut rng = seeded(seed);
        let specs = [
            AugmentationSpec::identity(),
            AugmentationSpec::drop_edge(p),
            AugmentationSpec::add_edge(q),
            AugmentationSpec::new(AugmentationKind::Spa { r_spa: 0.2, d_spa: 0.0, max_attempts: 3 }),
        ];
        for spec in &specs {
            let v = apply(spec, &g, &mut rng).unwrap();
            prop_assert_eq!(v.graph.features(), g.features());
            prop_assert_eq!(v.graph.n(), g.n());
        }
        let pair = span_pair(&g, 3, 4, &mut rng).unwrap();
        prop_assert_eq!(pair.views.0.graph.features(), g.features());
        prop_assert_eq!(pair.views.1.graph.features(), g.features());
        prop_assert_eq!(&g, &before);
    }

    #[test]
    fn drop_and_add_are_monotone(g in graphs(), seed in any::<u64>(), p in 0.0f64..=1.0) {
        let mut rng = seeded(seed);
        let dropped = drop_edge(&g, p, &mut rng).unwrap();
        prop_assert!(dropped.graph.edges().iter().all(|&(u, v)| g.has_edge(u, v)));
        prop_assert_eq!(dropped.report.edges_removed, g.num_edges() - dropped.graph.num_edges());
        let added = add_edge(&g, p, &mut rng).unwrap();
        prop_assert!(g.edges().iter().all(|&(u, v)| added.graph.has_edge(u, v)));
        prop_assert_eq!(added.report.edges_added, added.graph.num_edges() - g.num_edges());
    }
}

#[test]
fn extreme_rates() {
    let g = Graph::new(4, vec![(0, 1), (1, 2), (2, 3)], Array2::<f64>::ones((4, 2)), Labels::None).unwrap();
    let mut rng = seeded(0);
    assert_eq!(drop_edge(&g, 0.0, &mut rng).unwrap().graph.edges(), g.edges());
    assert_eq!(drop_edge(&g, 1.0, &mut rng).unwrap().graph.num_edges(), 0);
    assert_eq!(add_edge(&g, 0.0, &mut rng).unwrap().graph.edges(), g.edges());
    assert_eq!(add_edge(&g, 1.0, &mut rng).unwrap().graph.num_edges(), 6);
}
