use nalgebra::DMatrix;
use nmd_core::channels::{apply_generator, apply_map, channel_at, propagator, scaling_factor};
use nmd_core::linalg::{hermiticity_defect, max_abs_diff};
use nmd_core::scenarios::{pauli_tanh, qutrit_e3, semigroup};
use nmd_core::witnesses::cp_check;
use nmd_core::{DensityMatrix, DiagonalMap, TimeGrid, WeylBasis};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn trace(m: &DMatrix<Complex64>) -> Complex64 {
    m.trace()
}

#[test]
fn channels_preserve_trace_hermiticity_and_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for s in [pauli_tanh(1.0).unwrap(), qutrit_e3(0.8).unwrap()] {
        let d = s.dim();
        let basis = WeylBasis::new(d).unwrap();
        let grid = TimeGrid::uniform(4.0, 41).unwrap();
        let spec = s.spectrum(&grid).unwrap();
        let mixed = DensityMatrix::maximally_mixed(d).unwrap();
        for i in 0..grid.len() {
            let map = channel_at(&spec, i).unwrap();
            for _ in 0..5 {
                let rho = DensityMatrix::random_mixed(d, &mut rng);
                let out = apply_map(&basis, &map, &rho).unwrap();
                assert!((trace(&out) - 1.0).norm() < 1e-12);
                assert!(hermiticity_defect(&out) < 1e-12);
            }
            let out = apply_map(&basis, &map, &mixed).unwrap();
            assert!(max_abs_diff(&out, mixed.matrix()) < 1e-12);
        }
    }
}

#[test]
fn weyl_operators_are_eigenvectors() {
    let s = qutrit_e3(1.0).unwrap();
    let basis = WeylBasis::new(3).unwrap();
    let grid = TimeGrid::uniform(2.0, 11).unwrap();
    let spec = s.spectrum(&grid).unwrap();
    for i in 0..grid.len() {
        let map = channel_at(&spec, i).unwrap();
        for (a, lam) in spec.row(i).iter().enumerate() {
            let u = basis.operator(a);
            let out = map.apply(&basis, u).unwrap();
            assert!(max_abs_diff(&out, &(u * *lam)) < 1e-12);
        }
    }
}

#[test]
fn propagator_composes() {
    let s = pauli_tanh(1.0).unwrap();
    let basis = WeylBasis::new(2).unwrap();
    let grid = TimeGrid::uniform(3.0, 31).unwrap();
    let spec = s.spectrum(&grid).unwrap();
    let rates = s.rate_profile(&grid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rho = DensityMatrix::random_mixed(2, &mut rng);
    for (si, ti) in [(0, 5), (3, 17), (10, 30), (12, 12)] {
        let v = propagator(&spec, si, ti).unwrap();
        let vs = v.as_map().unwrap();
        let mid = apply_map(&basis, &channel_at(&spec, si).unwrap(), &rho).unwrap();
        let via = vs.apply(&basis, &mid).unwrap();
        let direct = apply_map(&basis, &channel_at(&spec, ti).unwrap(), &rho).unwrap();
        assert!(max_abs_diff(&via, &direct) < 1e-12);
        // V_{t,0} = Lambda_t is CP; later propagators feel the negative rate
        let cp = cp_check(&basis, &vs).unwrap();
        assert!(cp.agree());
        if ti > si && si > 0 {
            assert!(!v.is_cp());
        }
        // two independent routes to v(t;s)
        let quad = scaling_factor(&grid, &rates.gamma0_series(), si, ti).unwrap();
        assert!((quad - v.scaling).abs() < 1e-3 * v.scaling);
    }
}

#[test]
fn semigroup_propagators_are_cp() {
    let s = semigroup(3, vec![0.1, 0.2, 0.0, 0.05, 0.3, 0.0, 0.1, 0.2]).unwrap();
    let grid = TimeGrid::uniform(2.0, 21).unwrap();
    let spec = s.spectrum(&grid).unwrap();
    for si in 0..grid.len() {
        for ti in si..grid.len() {
            assert!(propagator(&spec, si, ti).unwrap().is_cp());
        }
    }
}

#[test]
fn generator_acts_by_rate_combinations() {
    // L(U_a) = mu_a U_a with mu = d/dt ln lambda, checked on the closed form
    let c = 1.3;
    let s = pauli_tanh(c).unwrap();
    let basis = WeylBasis::new(2).unwrap();
    for t in [0.0, 0.4, 2.0] {
        let g = s.rates_at(t);
        let e = (-2.0 * c * t).exp();
        let dl = [0.0, -2.0 * c * e / (1.0 + e), -2.0 * c, -2.0 * c * e / (1.0 + e)];
        for (a, mu) in dl.iter().enumerate() {
            let u = basis.operator(a);
            let out = apply_generator(&basis, &g, u).unwrap();
            assert!(max_abs_diff(&out, &(u * Complex64::new(*mu, 0.0))) < 1e-12);
        }
    }
}

#[test]
fn process_matrix_of_identity_is_identity() {
    for d in 2..=4 {
        let basis = WeylBasis::new(d).unwrap();
        let pm = DiagonalMap::identity(d).unwrap().process_matrix(&basis).unwrap();
        let id = DMatrix::<Complex64>::identity(d * d, d * d);
        assert!(max_abs_diff(&pm, &id) < 1e-14);
    }
}
