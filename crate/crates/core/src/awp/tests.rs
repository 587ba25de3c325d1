use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn small(seed: u64) -> (ParamStore, Awp) {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = AwpConfig {
        feature_dim: 6,
        embed_dim: 5,
        embed_depth: 2,
        motion_dim: 4,
        attn_dim: 3,
        view_hidden: 4,
        mam_hidden: 6,
        latent_dim: 2,
        dir_freqs: 1,
    };
    let awp = Awp::new(&mut store, "awp", cfg, &mut rng);
    (store, awp)
}

fn random(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn rows(t: &Tensor, width: usize) -> Vec<&[f64]> {
    t.data().chunks(width).collect()
}

#[test]
fn embedding_is_pointwise_and_sized() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let awp = Awp::new(&mut store, "awp", AwpConfig::default(), &mut rng);
    let mut z = random(&mut rng, vec![1, 5, 128, 128]);
    let copy = z.data()[..128].to_vec();
    z.data_mut()[128 * 77..128 * 78].copy_from_slice(&copy);
    let mut tape = Tape::new();
    let p = store.bind(&mut tape, false);
    let zv = tape.constant(z);
    let e = awp.embed_depth_features(&mut tape, &p, zv).unwrap();
    assert_eq!(tape.shape(e), &[1, 5, 128, 64]);
    let r = rows(tape.value(e), 64);
    assert_eq!(r[0], r[77]);
}

#[test]
fn zero_weight_embedding_is_constant() {
    let (mut store, awp) = small(2);
    for l in &awp.embed.layers {
        let shape = store.get(l.w).shape().to_vec();
        *store.get_mut(l.w) = Tensor::zeros(shape);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut tape = Tape::new();
    let p = store.bind(&mut tape, false);
    let z = tape.constant(random(&mut rng, vec![1, 2, 3, 6]));
    let e = awp.embed_depth_features(&mut tape, &p, z).unwrap();
    let last_b = store.get(awp.embed.layers[1].b).data().to_vec();
    for row in rows(tape.value(e), 5) {
        for (v, b) in row.iter().zip(&last_b) {
            assert_eq!(*v, b.max(0.0));
        }
    }
}

fn conditioned(store: &ParamStore, awp: &Awp, eta: Tensor, dirs: Tensor, latent: Tensor) -> Tensor {
    let mut tape = Tape::new();
    let p = store.bind(&mut tape, false);
    let e = tape.constant(eta);
    let d = tape.constant(dirs);
    let dv = tape.fourier_features(d, 1).unwrap();
    let l = tape.constant(latent);
    let out = awp.view_condition(&mut tape, &p, e, dv, l).unwrap();
    tape.value(out).clone()
}

#[test]
fn view_condition_is_row_wise() {
    let (store, awp) = small(4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let eta = random(&mut rng, vec![1, 3, 5]);
    let mut dirs = random(&mut rng, vec![1, 3, 3]);
    let latent = random(&mut rng, vec![1, 2]);
    let base = conditioned(&store, &awp, eta.clone(), dirs.clone(), latent.clone());
    assert_eq!(base.shape(), &[1, 3, 4]);
    dirs.data_mut()[3] += 0.25;
    let moved = conditioned(&store, &awp, eta.clone(), dirs, latent.clone());
    let (a, b) = (rows(&base, 4), rows(&moved, 4));
    assert_eq!(a[0], b[0]);
    assert_ne!(a[1], b[1]);
    assert_eq!(a[2], b[2]);

    let same_eta = Tensor::new(
        vec![1, 2, 5],
        [eta.data()[..5].to_vec(), eta.data()[..5].to_vec()].concat(),
    )
    .unwrap();
    let same_dir = Tensor::new(vec![1, 2, 3], vec![0.0, 0.6, 0.8, 0.0, 0.6, 0.8]).unwrap();
    let out = conditioned(&store, &awp, same_eta, same_dir, latent);
    let r = rows(&out, 4);
    assert_eq!(r[0], r[1]);
}

#[test]
fn default_condition_width() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let awp = Awp::new(&mut store, "awp", AwpConfig::default(), &mut rng);
    let out = conditioned_default(&store, &awp, &mut rng);
    assert_eq!(out.shape(), &[1, 5, 32]);
}

fn conditioned_default(store: &ParamStore, awp: &Awp, rng: &mut ChaCha8Rng) -> Tensor {
    let mut tape = Tape::new();
    let p = store.bind(&mut tape, false);
    let e = tape.constant(random(rng, vec![1, 5, 64]));
    let d = tape.constant(random(rng, vec![1, 5, 3]));
    let dv = tape.fourier_features(d, 4).unwrap();
    let l = tape.constant(random(rng, vec![1, 64]));
    let out = awp.view_condition(&mut tape, &p, e, dv, l).unwrap();
    tape.value(out).clone()
}

fn pool(store: &ParamStore, pool: &AttentivePool, x: Tensor, axis: usize) -> Tensor {
    let mut tape = Tape::new();
    let p = store.bind(&mut tape, false);
    let xv = tape.constant(x);
    let y = pool.forward(&mut tape, &p, xv, axis).unwrap();
    tape.value(y).clone()
}

#[test]
fn attentive_pool_singleton_mean_and_saturation() {
    let (mut store, awp) = small(7);
    let ap = &awp.mam.pool_motion;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random(&mut rng, vec![1, 1, 3, 4]);
    assert_eq!(pool(&store, ap, x.clone(), 1).data(), x.data());

    *store.get_mut(ap.scorer.w) = Tensor::zeros(vec![4, 1]);
    let x = random(&mut rng, vec![1, 3, 2, 4]);
    let y = pool(&store, ap, x.clone(), 1);
    for s in 0..2 {
        for c in 0..4 {
            let mean = (0..3).map(|m| x.data()[(m * 2 + s) * 4 + c]).sum::<f64>() / 3.0;
            assert!((y.data()[s * 4 + c] - mean).abs() < 1e-15);
        }
    }

    // Channel 0 carries the score; a gap of 50 saturates the softmax.
    *store.get_mut(ap.scorer.w) = Tensor::new(vec![4, 1], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let mut x = random(&mut rng, vec![1, 3, 1, 4]);
    x.data_mut()[0] = 0.0;
    x.data_mut()[4] = 50.0;
    x.data_mut()[8] = 0.0;
    let y = pool(&store, ap, x.clone(), 1);
    for c in 0..4 {
        assert!((y.data()[c] - x.data()[4 + c]).abs() < 1e-12);
    }
}

fn run_mam(store: &ParamStore, awp: &Awp, zh: Tensor, eh: Tensor) -> Tensor {
    let mut tape = Tape::new();
    let p = store.bind(&mut tape, false);
    let z = tape.constant(zh);
    let e = tape.constant(eh);
    let out = awp.mam.forward(&mut tape, &p, z, e).unwrap();
    tape.value(out).clone()
}

#[test]
fn mam_preserves_shape_including_single_motion() {
    let (store, awp) = small(9);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for nm in [1, 3] {
        let out = run_mam(
            &store,
            &awp,
            random(&mut rng, vec![2, nm, 4, 5]),
            random(&mut rng, vec![2, nm, 4]),
        );
        assert_eq!(out.shape(), &[2, nm, 4]);
        assert!(out.is_finite());
    }
}

fn weights(store: &ParamStore, awp: &Awp, eta_tilde: Tensor) -> Vec<f64> {
    let mut tape = Tape::new();
    let p = store.bind(&mut tape, false);
    let e = tape.constant(eta_tilde);
    let w = awp.propose_weights(&mut tape, &p, e).unwrap();
    tape.value(w).data().to_vec()
}

#[test]
fn proposal_single_motion_and_symmetry() {
    let (store, awp) = small(11);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    assert_eq!(
        weights(&store, &awp, random(&mut rng, vec![1, 1, 4])),
        vec![1.0]
    );
    let row = random(&mut rng, vec![1, 1, 4]).into_data();
    let same = Tensor::new(vec![1, 3, 4], row.repeat(3)).unwrap();
    for w in weights(&store, &awp, same) {
        assert!((w - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn proposal_is_normalized_and_interior() {
    let (store, awp) = small(13);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..100 {
        let w = weights(
            &store,
            &awp,
            random(&mut rng, vec![1, 5, 4]).map(|x| 10.0 * x),
        );
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&x| x > 0.0 && x < 1.0));
    }
}

#[test]
fn full_proposal_is_permutation_equivariant() {
    let (store, awp) = small(15);
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let (nm, ns) = (3, 4);
    let zeta = random(&mut rng, vec![1, nm, ns, 6]);
    let delta = random(&mut rng, vec![1, nm, ns]).map(f64::abs);
    let dirs = random(&mut rng, vec![1, nm, 3]);
    let latent = random(&mut rng, vec![1, 2]);
    let perm = [2usize, 0, 1];
    let permute = |t: &Tensor, width: usize| -> Tensor {
        let data: Vec<f64> = perm
            .iter()
            .flat_map(|&m| t.data()[m * width..(m + 1) * width].to_vec())
            .collect();
        Tensor::new(t.shape().to_vec(), data).unwrap()
    };
    let run = |zeta: Tensor, delta: Tensor, dirs: Tensor| -> Vec<f64> {
        let mut tape = Tape::new();
        let p = store.bind(&mut tape, false);
        let z = tape.constant(zeta);
        let d = tape.constant(dirs);
        let dv = tape.fourier_features(d, 1).unwrap();
        let l = tape.constant(latent.clone());
        let out = awp.forward(&mut tape, &p, z, &delta, dv, l).unwrap();
        tape.value(out.weights).data().to_vec()
    };
    let base = run(zeta.clone(), delta.clone(), dirs.clone());
    let permuted = run(
        permute(&zeta, ns * 6),
        permute(&delta, ns),
        permute(&dirs, 3),
    );
    for (i, &m) in perm.iter().enumerate() {
        assert!((permuted[i] - base[m]).abs() < 1e-14);
    }
}
