use std::f64::consts::PI;

use mixlab_core::fields::*;
use mixlab_core::sard::*;
use mixlab_core::GridField;
use nalgebra::{DMatrix, Matrix2x3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const TWO_PI: f64 = 2.0 * PI;

fn cos_line(n: usize) -> GridField {
    GridField::from_fn(2, n, 1, |x, o| o[0] = (TWO_PI * x[0]).cos()).unwrap()
}

fn cos_points(n: usize) -> GridField {
    GridField::from_fn(2, n, 1, |x, o| o[0] = (TWO_PI * x[0]).cos() * (TWO_PI * x[1]).cos()).unwrap()
}

fn levels(n: usize) -> Vec<u32> {
    (1..=finest_level(n).unwrap()).collect()
}

/// Min over k-subsets S of the singular triplets of ‖M − Σ_{i∈S} σᵢuᵢvᵢᵀ‖_F.
fn truncation_oracle(m: &Matrix2x3<f64>, k: usize) -> f64 {
    let svd = m.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let s = svd.singular_values;
    let subsets: Vec<Vec<usize>> = match k {
        0 => vec![vec![]],
        1 => vec![vec![0], vec![1]],
        _ => vec![vec![0, 1]],
    };
    subsets
        .iter()
        .map(|sub| {
            let mut r = *m;
            for &i in sub {
                r -= s[i] * u.column(i) * vt.row(i);
            }
            r.norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// σ_min of a 2×3 matrix from its Gram determinant (Cauchy–Binet) and trace.
fn smallest_singular_value(m: &Matrix2x3<f64>) -> f64 {
    let minor = |a: usize, b: usize| m[(0, a)] * m[(1, b)] - m[(0, b)] * m[(1, a)];
    let det = minor(0, 1).powi(2) + minor(0, 2).powi(2) + minor(1, 2).powi(2);
    let tr = m.norm_squared();
    let lmax = 0.5 * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt());
    if lmax == 0.0 {
        0.0
    } else {
        (det / lmax).sqrt()
    }
}

#[test]
fn jet_of_single_mode_and_constant() {
    let jet = jet_grid(&cos_line(64)).unwrap();
    let lat = jet.phi().lattice();
    for p in 0..jet.points() {
        let x = lat.point(p);
        let j = jet.jacobian_at(p);
        assert!((j[0] + TWO_PI * (TWO_PI * x[0]).sin()).abs() < 1e-12);
        assert!(j[1].abs() < 1e-12);
    }
    let c = jet_grid(&GridField::from_fn(3, 16, 2, |_, o| o.copy_from_slice(&[1.0, -2.0])).unwrap()).unwrap();
    assert_eq!(c.max_jacobian_norm(), 0.0);
    assert!(jet_grid(&GridField::zeros(3, 16, 1).unwrap()).is_err());
    assert!(jet_grid(&GridField::zeros(2, 16, 2).unwrap()).is_err());
}

#[test]
fn jet_matches_central_differences() {
    let n = 256;
    let spec = SpectrumConfig::with_power_law(2, n, 6, 0.5, 1.0, 9);
    let phi = sample_stream_2d(&spec).unwrap();
    let jet = jet_grid(&phi).unwrap();
    let lat = phi.lattice();
    let h = 1.0 / n as f64;
    // |central difference − f'| ≤ h²/6·max|f'''| ≤ h²/6·Σ|φ̂_k|(2π|k_a|)³
    let third: Vec<f64> = (0..2)
        .map(|a| {
            phi.spectral()
                .iter()
                .enumerate()
                .map(|(f, z)| z.norm() * (TWO_PI * lat.wavevector(f)[a] as f64).abs().powi(3))
                .sum()
        })
        .collect();
    let vals = phi.real();
    for p in 0..lat.len() {
        for a in 0..2 {
            let mut up = lat.coords(p);
            let mut dn = lat.coords(p);
            up[a] = (up[a] + 1) % n;
            dn[a] = (dn[a] + n - 1) % n;
            let fd = (vals[lat.flat(&up[..2])] - vals[lat.flat(&dn[..2])]) / (2.0 * h);
            let err = (fd - jet.jacobian_at(p)[a]).abs();
            assert!(err <= h * h / 6.0 * third[a] + 1e-10, "point {p} axis {a}: {err}");
        }
    }
}

#[test]
fn eckart_young_matches_truncation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..100 {
        let m = Matrix2x3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let flat: Vec<f64> = m.transpose().iter().copied().collect();
        for k in [0, 1] {
            let got = distance_to_low_rank(&flat, 2, 3, k);
            assert!((got - truncation_oracle(&m, k)).abs() <= 1e-12, "k = {k}");
        }
        assert!((distance_to_low_rank(&flat, 2, 3, 0) - m.norm()).abs() <= 1e-12);
        assert!((distance_to_low_rank(&flat, 2, 3, 1) - smallest_singular_value(&m)).abs() <= 1e-12);
    }
}

#[test]
fn line_critical_set_count_and_dimension() {
    let n = 256;
    let jet = jet_grid(&cos_line(n)).unwrap();
    // Dφ is 4π²-Lipschitz
    let probe = RankVarietyProbe::new(2, 0, 1.0, 4.0 * PI * PI, 2.0 * TWO_PI).unwrap();
    for l in levels(n) {
        let side = 0.5f64.powi(l as i32);
        let t = probe.threshold(l);
        let columns = (0..1u64 << l)
            .filter(|&j| TWO_PI * (TWO_PI * (j as f64 + 0.5) * side).sin().abs() <= t)
            .count() as u64;
        assert_eq!(critical_cube_count(&jet, &probe, l).unwrap(), columns << l, "level {l}");
    }
    let curve = box_count_curve(&jet, &probe, &levels(n)).unwrap();
    assert!((curve.fitted_dim - 1.0).abs() <= 0.15, "{}", curve.fitted_dim);

    let estimated = RankVarietyProbe::from_jet(&jet, 0, AlphaSource::Estimated).unwrap();
    let curve = box_count_curve(&jet, &estimated, &levels(n)).unwrap();
    assert!((curve.fitted_dim - 1.0).abs() <= 0.15, "{}", curve.fitted_dim);
    // cos is not generic: its critical set exceeds the bound for random fields
    assert!(curve.exceeds_bound);
}

#[test]
fn isolated_critical_points_have_bounded_counts() {
    let n = 256;
    let jet = jet_grid(&cos_points(n)).unwrap();
    let probe = RankVarietyProbe::new(2, 0, 1.0, 4.0 * PI * PI, 4.0 * PI).unwrap();
    for l in levels(n) {
        let per = 1usize << l;
        let side = 1.0 / per as f64;
        let t = probe.threshold(l);
        let mut expect = 0;
        for i in 0..per {
            for j in 0..per {
                let (a, b) = (TWO_PI * (i as f64 + 0.5) * side, TWO_PI * (j as f64 + 0.5) * side);
                let g = TWO_PI * ((a.sin() * b.cos()).powi(2) + (a.cos() * b.sin()).powi(2)).sqrt();
                if g <= t {
                    expect += 1;
                }
            }
        }
        let got = critical_cube_count(&jet, &probe, l).unwrap();
        assert_eq!(got, expect, "level {l}");
        if l >= 3 {
            // four cubes around each of the eight critical points
            assert_eq!(got, 32);
        }
    }
    for p in [probe, RankVarietyProbe::from_jet(&jet, 0, AlphaSource::Estimated).unwrap()] {
        let curve = box_count_curve(&jet, &p, &levels(n)).unwrap();
        assert!(curve.fitted_dim <= 0.3, "{}", curve.fitted_dim);
    }
}

#[test]
fn empty_and_full_critical_sets_by_rank() {
    // Dφ has rank one and Frobenius norm 2π everywhere
    let phi = GridField::from_fn(3, 64, 2, |x, o| {
        o[0] = (TWO_PI * x[0]).cos();
        o[1] = (TWO_PI * x[0]).sin();
    })
    .unwrap();
    let jet = jet_grid(&phi).unwrap();
    let probe0 = RankVarietyProbe::new(3, 0, 1.0, 4.0 * PI * PI, 4.0 * PI).unwrap();
    let curve = box_count_curve(&jet, &probe0, &levels(64)).unwrap();
    for (&l, &c) in curve.levels.iter().zip(&curve.counts) {
        let expect = if probe0.threshold(l) >= TWO_PI { 8u64.pow(l) } else { 0 };
        assert_eq!(c, expect, "level {l}");
    }
    assert_eq!(curve.counts[2..], [0, 0]);
    assert_eq!(curve.fitted_dim, 0.0);
    let probe1 = RankVarietyProbe::new(3, 1, 1.0, 4.0 * PI * PI, 4.0 * PI).unwrap();
    let curve = box_count_curve(&jet, &probe1, &levels(64)).unwrap();
    assert_eq!(curve.counts, vec![8, 64, 512, 4096]);
    assert!((curve.fitted_dim - 3.0).abs() < 1e-12);
    assert!(critical_cube_count(&jet, &probe1, 5).is_err());

    let weak = weak_sard_proxy(&jet, &probe0, &[0.25, 0.125]).unwrap();
    for r in &weak.rows {
        assert_eq!((r.total_mass, r.max_bin_mass, r.z_fraction), (0.0, 0.0, 0.0));
    }
    assert!(!weak.atom_detected);
    assert_eq!(weak.measure_rate, None);
}

#[test]
fn dimension_fit_recovers_exact_powers() {
    for (s, lv) in [(0.5, vec![2, 4, 6, 8, 10, 12]), (1.5, vec![2, 4, 6, 8, 10, 12]), (2.0, vec![1, 2, 3, 4, 5])] {
        let counts = lv.iter().map(|&l: &u32| 2f64.powf(s * l as f64) as u64).collect();
        let c = dimension_fit(BoxCountCurve::new(3, lv, counts, 1.0)).unwrap();
        assert!((c.fitted_dim - s).abs() <= 1e-6);
        assert_eq!(c.exceeds_bound, s > 1.2);
    }
}

#[test]
fn image_of_line_and_constant_maps() {
    let n = 256;
    let jet = jet_grid(&cos_line(n)).unwrap();
    let probe = RankVarietyProbe::from_jet(&jet, 0, AlphaSource::Estimated).unwrap();
    let img = image_dimension_estimate(&jet, &probe, &levels(n)).unwrap();
    assert!(img.fitted_dim <= 0.2, "{}", img.fitted_dim);
    assert!(!img.empty_set);

    let c = jet_grid(&GridField::from_fn(2, 64, 1, |_, o| o[0] = 0.3).unwrap()).unwrap();
    let alpha = 0.5;
    let probe = RankVarietyProbe::from_jet(&c, 0, AlphaSource::Fixed(alpha)).unwrap();
    assert_eq!(probe.holder_norm, 0.0);
    let img = image_dimension_estimate(&c, &probe, &levels(64)).unwrap();
    assert!((img.domain.fitted_dim - 2.0).abs() < 1e-12);
    assert_eq!(img.fitted_dim, 0.0);
    assert!((img.bound - 2.0 / (1.0 + alpha)).abs() < 1e-12);
    assert!(img.bound > img.fitted_dim);
    assert!(matches!(
        RankVarietyProbe::from_jet(&c, 0, AlphaSource::Estimated),
        Err(mixlab_core::Error::EstimatorUndefined(_))
    ));
}

#[test]
fn critical_values_of_line_and_constant() {
    let jet = jet_grid(&cos_line(256)).unwrap();
    let probe = RankVarietyProbe::from_jet(&jet, 0, AlphaSource::Estimated).unwrap();
    // flagged points satisfy 2π|sin 2πx₁| ≤ t, so their values lie within
    // δ = 1 − √(1 − (t/2π)²) of ±1; each cluster meets at most δ/w + 2 bins
    let t = probe.threshold(finest_level(256).unwrap());
    let delta = 1.0 - (1.0 - (t / TWO_PI).powi(2)).sqrt();
    for w in [0.1, 0.03, 0.01, 0.003] {
        let m = critical_value_measure(&jet, &probe, w).unwrap();
        assert!(m >= 2.0 * w - 1e-15 && m <= 2.0 * (delta / w + 2.0).floor() * w + 1e-15, "{w}: {m}");
        if w > 10.0 * delta {
            assert!(m <= 4.0 * w + 1e-15);
        }
    }
    assert!(critical_value_measure(&jet, &probe, 1.0).is_err());

    let c = jet_grid(&GridField::from_fn(2, 64, 1, |_, o| o[0] = 0.3).unwrap()).unwrap();
    let probe = RankVarietyProbe::from_jet(&c, 0, AlphaSource::Fixed(0.5)).unwrap();
    for w in [0.5, 0.1, 0.01] {
        assert!((critical_value_measure(&c, &probe, w).unwrap() - w).abs() < 1e-15);
    }
    let weak = weak_sard_proxy(&c, &probe, &[0.5, 0.1, 0.01, 0.001]).unwrap();
    for r in &weak.rows {
        assert_eq!(r.max_bin_mass, 1.0);
        assert_eq!(r.z_fraction, 1.0);
    }
    assert!(weak.atom_detected);
}

#[test]
fn rough_gaussian_critical_values_shrink_with_bin_width() {
    let n = 256;
    let spec = SpectrumConfig::with_power_law(2, n, n / 3 - 1, 0.5, 1.0, 1);
    let jet = jet_grid(&sample_stream_2d(&spec).unwrap()).unwrap();
    let probe = RankVarietyProbe::from_jet(&jet, 0, AlphaSource::Estimated).unwrap();
    let widths: Vec<f64> = (2..=10).map(|j| 0.5f64.powi(j)).collect();
    let weak = weak_sard_proxy(&jet, &probe, &widths).unwrap();
    for w in weak.rows.windows(2) {
        assert!(w[1].occupied_measure <= w[0].occupied_measure);
    }
    assert!(weak.measure_rate.unwrap() > 0.0);
    assert!(!weak.atom_detected);
    for (r, &w) in weak.rows.iter().zip(&widths) {
        assert!((critical_value_measure(&jet, &probe, w).unwrap() - r.occupied_measure).abs() < 1e-12);
    }
}

#[test]
fn smooth_gaussian_critical_fraction_shrinks_with_resolution() {
    // a band-limited sample is smooth at grid scale, so the flagged
    // neighbourhoods of its Morse points shrink like the cube size squared
    let fraction = |n: usize| {
        let spec = SpectrumConfig::with_power_law(2, 64, 4, 0.5, 1.0, 3);
        let phi = sample_stream_2d(&spec).unwrap().resampled(n).unwrap();
        let jet = jet_grid(&phi).unwrap();
        let probe = RankVarietyProbe::from_jet(&jet, 0, AlphaSource::Fixed(1.0)).unwrap();
        weak_sard_proxy(&jet, &probe, &[0.01]).unwrap().rows[0].z_fraction
    };
    let (a, b, c) = (fraction(64), fraction(128), fraction(256));
    assert!(a > 0.0);
    assert!(b < 0.5 * a && c < 0.5 * b, "{a} {b} {c}");
}

#[test]
fn clebsch_orthogonality() {
    let n = 16;
    let phi1 = GridField::from_fn(3, n, 1, |x, o| o[0] = (TWO_PI * x[0]).sin() / TWO_PI).unwrap();
    let phi2 = GridField::from_fn(3, n, 1, |x, o| o[0] = (TWO_PI * x[1]).sin() / TWO_PI).unwrap();
    let pots = ClebschPotentials::new(phi1, phi2).unwrap();
    let v = velocity_from_clebsch(&pots).unwrap().velocity;
    let jet = jet_grid(&pots.stack()).unwrap();
    assert!(v.max_abs() > 0.5);
    assert!(orthogonality_residual(&jet, &v).unwrap() <= 1e-12);

    let spec = SpectrumConfig::with_power_law(3, 32, 5, 0.25, 1.0, 1);
    let a = sample_clebsch_3d(&spec).unwrap();
    let mut other = spec.clone();
    other.seed = 2;
    let b = sample_clebsch_3d(&other).unwrap();
    let vb = velocity_from_clebsch(&b).unwrap().velocity;
    let ja = jet_grid(&a.stack()).unwrap();
    assert!(orthogonality_residual(&ja, &vb).unwrap() > 1e-2);
    assert!(orthogonality_residual(&ja, &velocity_from_clebsch(&a).unwrap().velocity).unwrap() < 1e-10);
    assert_eq!(orthogonality_residual(&ja, &GridField::zeros(3, 32, 3).unwrap()).unwrap(), 0.0);
    assert!(orthogonality_residual(&ja, &GridField::zeros(3, 16, 3).unwrap()).is_err());
}

#[test]
fn clebsch_dimension_flag_follows_bound() {
    let spec = SpectrumConfig::with_power_law(3, 64, 10, 0.25, 1.0, 4);
    let jet = jet_grid(&sample_clebsch_3d(&spec).unwrap().stack()).unwrap();
    let probe = RankVarietyProbe::from_jet(&jet, 0, AlphaSource::Fixed(0.25)).unwrap();
    assert_eq!(probe.codimension, 6);
    assert!((probe.domain_bound() - 1.5).abs() < 1e-15);
    let img = image_dimension_estimate(&jet, &probe, &levels(64)).unwrap();
    assert_eq!(img.domain.exceeds_bound, img.domain.fitted_dim > 1.7);
    assert!((img.bound - probe.image_bound(img.domain.fitted_dim)).abs() < 1e-15);
    assert!(img.domain.fitted_dim >= 0.0 && img.domain.fitted_dim <= 3.0);
}

fn random_matrix(entries: &[f64]) -> Vec<f64> {
    entries.to_vec()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_vanishes_exactly_on_low_rank(u in prop::array::uniform2(-3.0f64..3.0), v in prop::array::uniform3(-3.0f64..3.0)) {
        let m: Vec<f64> = (0..6).map(|i| u[i / 3] * v[i % 3]).collect();
        let scale = DMatrix::from_row_slice(2, 3, &m).norm().max(1.0);
        prop_assert!(distance_to_low_rank(&m, 2, 3, 1) <= 1e-12 * scale);
    }

    #[test]
    fn distance_is_nonincreasing_in_rank(e in prop::collection::vec(-5.0f64..5.0, 6)) {
        let m = random_matrix(&e);
        let d0 = distance_to_low_rank(&m, 2, 3, 0);
        let d1 = distance_to_low_rank(&m, 2, 3, 1);
        let d2 = distance_to_low_rank(&m, 2, 3, 2);
        prop_assert!(d0 >= d1 && d1 >= d2);
        prop_assert_eq!(d2, 0.0);
        let full_rank = DMatrix::from_row_slice(2, 3, &m).rank(1e-9) == 2;
        prop_assert_eq!(d1 > 1e-12, full_rank);
    }

    #[test]
    fn counts_grow_with_threshold(scale in 0.1f64..3.0, extra in 1.0f64..4.0, level in 1u32..5) {
        let jet = jet_grid(&cos_points(64)).unwrap();
        let lo = RankVarietyProbe::new(2, 0, 0.7, scale, 10.0).unwrap();
        let hi = RankVarietyProbe::new(2, 0, 0.7, scale * extra, 10.0).unwrap();
        prop_assert!(critical_cube_count(&jet, &lo, level).unwrap() <= critical_cube_count(&jet, &hi, level).unwrap());
    }

    #[test]
    fn weak_sard_masses_are_a_sub_distribution(seed in 0u64..1000, w in 0.01f64..0.5) {
        let spec = SpectrumConfig::with_power_law(2, 64, 8, 0.5, 1.0, seed);
        let jet = jet_grid(&sample_stream_2d(&spec).unwrap()).unwrap();
        let probe = RankVarietyProbe::from_jet(&jet, 0, AlphaSource::Fixed(0.5)).unwrap();
        let row = weak_sard_proxy(&jet, &probe, &[w]).unwrap().rows[0];
        prop_assert!(row.max_bin_mass <= row.total_mass + 1e-15);
        prop_assert!((row.total_mass - row.z_fraction).abs() <= 1e-12);
        prop_assert!(row.z_fraction <= 1.0);
    }
}
