use latent_anon::transform::{
    apply_transfer, load_table, modify_deterministic, modify_probabilistic, save_table, transfer_vector, Bijection,
    FixedCoin, LabeledLatent, MeanLatentTable, ModifyMode, ModifyPolicy, SecureSource,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_latents(seed: u64, n: usize, u: usize, m: usize, j: usize) -> Vec<LabeledLatent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| LabeledLatent {
            z: (0..j).map(|_| rng.random_range(-10.0..10.0)).collect(),
            // Cover every cell before going random.
            public: if k < u * m { k / m } else { rng.random_range(0..u) },
            private: if k < u * m { k % m } else { rng.random_range(0..m) },
        })
        .collect()
}

#[test]
fn mean_table_matches_accumulate_and_divide() {
    let (u, m, j) = (4, 2, 5);
    let latents = random_latents(1, 1000, u, m, j);
    let table = MeanLatentTable::compute(&latents, u, m).unwrap();
    for cu in 0..u {
        for ci in 0..m {
            let members: Vec<&LabeledLatent> = latents.iter().filter(|l| l.public == cu && l.private == ci).collect();
            let mut acc = vec![0.0; j];
            for l in &members {
                for k in 0..j {
                    acc[k] += l.z[k];
                }
            }
            let cell = table.cell(cu, ci).unwrap();
            assert_eq!(cell.count as usize, members.len());
            for k in 0..j {
                assert!((cell.mean[k] - acc[k] / members.len() as f64).abs() < 1e-12);
            }
            let d = transfer_vector(&table, cu, ci, (ci + 1) % m).unwrap();
            let other = table.mean(cu, (ci + 1) % m).unwrap();
            for k in 0..j {
                assert_eq!(d.delta[k], other[k] - cell.mean[k]);
            }
        }
    }
}

#[test]
fn table_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("means.zbar");
    let table = MeanLatentTable::compute(&random_latents(2, 50, 3, 3, 8), 3, 3).unwrap();
    save_table(&table, &path).unwrap();
    let back = load_table(&path).unwrap();
    assert_eq!(back, table);
    assert_eq!(back.to_bytes(), table.to_bytes());
    std::fs::write(&path, &table.to_bytes()[..40]).unwrap();
    assert!(load_table(&path).is_err());
}

#[test]
fn probabilistic_frequency_with_secure_source() {
    let mut src = SecureSource::new().unwrap();
    let map = Bijection::cycle(2);
    let n = 100_000;
    let mut applied = 0;
    for k in 0..n {
        let (t, a) = modify_probabilistic(k % 2, &map, &mut src).unwrap();
        assert_eq!(a, t != k % 2);
        applied += a as usize;
    }
    let f = applied as f64 / n as f64;
    assert!((0.495..=0.505).contains(&f), "{f}");
}

#[test]
fn policies_under_injected_coins() {
    let det = ModifyPolicy::new(ModifyMode::Deterministic, 3);
    let prob = ModifyPolicy::new(ModifyMode::Probabilistic, 3);
    let id = ModifyPolicy::new(ModifyMode::Identity, 3);
    for i in 0..3 {
        let d = det.modify(i, &mut FixedCoin::Never).unwrap();
        assert_eq!(prob.modify(i, &mut FixedCoin::Always).unwrap(), d);
        assert_eq!(
            prob.modify(i, &mut FixedCoin::Never).unwrap(),
            id.modify(i, &mut FixedCoin::Always).unwrap()
        );
        assert_eq!(d.target, modify_deterministic(i, &Bijection::cycle(3)).unwrap());
    }
}

proptest! {
    #[test]
    fn binary_transfer_is_an_involution(seed in any::<u64>(), u in 0..3usize) {
        let table = MeanLatentTable::compute(&random_latents(seed, 40, 3, 2, 6), 3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 9);
        let z: Vec<f64> = (0..6).map(|_| rng.random_range(-20.0..20.0)).collect();
        for i in 0..2 {
            let flip = modify_deterministic(i, &Bijection::cycle(2)).unwrap();
            prop_assert_eq!(modify_deterministic(flip, &Bijection::cycle(2)).unwrap(), i);
            let there = apply_transfer(&z, &table, u, i, flip).unwrap();
            let back = apply_transfer(&there, &table, u, flip, i).unwrap();
            for k in 0..6 {
                prop_assert!((back[k] - z[k]).abs() < 1e-12);
            }
            prop_assert_eq!(apply_transfer(&z, &table, u, i, i).unwrap(), z.clone());
        }
    }

    #[test]
    fn cycle_telescopes(seed in any::<u64>(), m in 2..6usize) {
        let table = MeanLatentTable::compute(&random_latents(seed, 60, 2, m, 4), 2, m).unwrap();
        let cyc = Bijection::cycle(m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let z: Vec<f64> = (0..4).map(|_| rng.random_range(-20.0..20.0)).collect();
        let start = rng.random_range(0..m);
        let (mut cur, mut i) = (z.clone(), start);
        for _ in 0..m {
            let next = modify_deterministic(i, &cyc).unwrap();
            cur = apply_transfer(&cur, &table, 1, i, next).unwrap();
            i = next;
        }
        prop_assert_eq!(i, start);
        for k in 0..4 {
            prop_assert!((cur[k] - z[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn centroid_maps_to_centroid(seed in any::<u64>()) {
        let table = MeanLatentTable::compute(&random_latents(seed, 30, 2, 2, 3), 2, 2).unwrap();
        let a = table.mean(0, 0).unwrap().to_vec();
        prop_assert_eq!(apply_transfer(&a, &table, 0, 0, 1).unwrap(), table.mean(0, 1).unwrap().to_vec());
    }

    #[test]
    fn mean_table_permutation_invariant(seed in any::<u64>(), n in 8..400usize) {
        let mut latents = random_latents(seed, n, 2, 2, 3);
        let a = MeanLatentTable::compute(&latents, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 5);
        rand::seq::SliceRandom::shuffle(latents.as_mut_slice(), &mut rng);
        let b = MeanLatentTable::compute(&latents, 2, 2).unwrap();
        for u in 0..2 {
            for i in 0..2 {
                prop_assert_eq!(a.cell(u, i).unwrap().count, b.cell(u, i).unwrap().count);
                for (x, y) in a.mean(u, i).unwrap().iter().zip(b.mean(u, i).unwrap()) {
                    prop_assert!((x - y).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn table_bytes_round_trip(seed in any::<u64>(), n in 1..60usize) {
        let t = MeanLatentTable::compute(&random_latents(seed, n, 3, 2, 5), 3, 2).unwrap();
        prop_assert_eq!(MeanLatentTable::from_bytes(&t.to_bytes()).unwrap(), t);
    }
}
